#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dvtg/model.hpp"
#include "dvtg/optim.hpp"
#include "dvtg/training.hpp"

namespace dvtg {

// ---------------------------------------------------------------------------
// Clip feature files: magic "DVTF", u32 version=1, u32 C, u32 D_c, then
// C*D_c little-endian f32, clip-major. Values are widened to f64 in memory;
// save narrows, so writers should hold f32-representable values.
// ---------------------------------------------------------------------------

VideoClipFeatures load_features(const std::filesystem::path& path);
void save_features(const std::filesystem::path& path,
                   const VideoClipFeatures& features);

// ---------------------------------------------------------------------------
// Word embeddings: text file, one "word v1 v2 ... vD" per line.
// ---------------------------------------------------------------------------

class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  static EmbeddingTable load(const std::filesystem::path& path);

  void insert(const std::string& word, std::vector<double> vec);
  void save(const std::filesystem::path& path) const;

  int dim() const { return dim_; }
  std::size_t size() const { return table_.size(); }
  bool contains(const std::string& word) const { return table_.count(word) != 0; }

  // Out-of-vocabulary words resolve to the zero vector; a warning is logged.
  std::vector<double> lookup(const std::string& word) const;

  SentenceTokens encode_words(const std::vector<std::string>& words) const;

 private:
  std::unordered_map<std::string, std::vector<double>> table_;
  int dim_ = 0;
};

// ---------------------------------------------------------------------------
// Dataset manifest (JSON on disk)
// ---------------------------------------------------------------------------

struct ManifestPair {
  std::string video_id;
  std::string feature_file;  // relative to the manifest's directory
  std::vector<std::string> sentence;
  std::array<std::vector<int>, 4> annotations;
};

struct DatasetManifest {
  int version = 1;
  int d_c = 0;
  int d_w = 0;
  std::vector<ManifestPair> pairs;
};

// Parses and validates eagerly: feature files must exist with matching d_c,
// annotation indices must be in range, exactly four annotations per pair.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);

// Materializes manifest + embeddings into training pairs.
std::vector<LabeledPair> load_dataset(const std::filesystem::path& manifest_path,
                                      const EmbeddingTable& embeddings);

// ---------------------------------------------------------------------------
// Checkpoints: versioned binary with the variant tag, architecture, named f64
// tensors, optional Adam state, and the training rng seed/state.
// ---------------------------------------------------------------------------

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::string rng_state;
};

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const AdamState* adam = nullptr,
                     const CheckpointMeta& meta = {});

Model load_checkpoint(const std::filesystem::path& path,
                      AdamState* adam_out = nullptr,
                      CheckpointMeta* meta_out = nullptr);

// ---------------------------------------------------------------------------
// Synthetic dataset generator
// ---------------------------------------------------------------------------

// Each clip carries one concept (prototype feature vector plus gaussian
// noise) or neutral background; every video appears in two pairs whose
// sentences name different concepts and whose ground truths are the disjoint
// clip sets matching those concepts. A predictor that ignores the sentence
// cannot fit both pairs of any video.
struct SynthSpec {
  int n_videos = 8;
  int clips_per_video = 32;  // multiples of 4 recommended
  int n_concepts = 2;
  int d_c = 12;
  int d_w = 16;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
  int max_thumb_clips = 5;
};

struct SynthOutput {
  DatasetManifest manifest;
  std::filesystem::path manifest_path;
  std::filesystem::path embeddings_path;
};

SynthOutput generate_synthetic(const SynthSpec& spec,
                               const std::filesystem::path& out_dir);

}  // namespace dvtg
