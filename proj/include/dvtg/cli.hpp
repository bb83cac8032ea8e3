#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dvtg/data_io.hpp"
#include "dvtg/model.hpp"

namespace dvtg::cli {

struct SynthArgs {
  SynthSpec spec;
  std::filesystem::path out_dir;
};

struct TrainArgs {
  std::filesystem::path manifest;
  std::filesystem::path embeddings;
  std::filesystem::path out_dir;
  std::string variant = "guided_dvtg";
  std::optional<std::string> modulation_mode;
  std::optional<std::filesystem::path> config;  // ArchConfig overrides (JSON)
  double lr = 1e-4;
  int epochs = 0;
  std::uint64_t seed = 0;
  int eval_every = 0;
  double aux_weight = 1.0;
  std::string agg = "mean";
};

struct EvalArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path manifest;
  std::filesystem::path embeddings;
  std::optional<std::filesystem::path> out_dir;
  std::string agg = "mean";  // mean | max | both
  std::string infer = "argmax";
};

struct PredictArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path manifest;
  std::filesystem::path embeddings;
  std::string video_id;
  std::vector<std::string> words;
  std::string infer = "argmax";
  std::optional<std::filesystem::path> svg;
};

struct InspectArgs {
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> manifest;
};

int cmd_synth(const SynthArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_eval(const EvalArgs& args);
int cmd_predict(const PredictArgs& args);
int cmd_inspect(const InspectArgs& args);

// Partial ArchConfig overrides from a JSON file; unknown keys are rejected.
ArchConfig load_arch_config(const std::filesystem::path& path);

// Maps library exceptions onto the documented exit codes
// (0 ok, 1 usage, 2 data/validation, 3 numeric).
int run_guarded(const std::function<int()>& fn);

}  // namespace dvtg::cli
