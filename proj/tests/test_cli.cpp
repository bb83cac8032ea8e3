#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "dvtg/cli.hpp"
#include "dvtg/errors.hpp"

using namespace dvtg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dvtg_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

// Small dataset + tiny-arch config shared by the command tests.
struct Fixture {
  TempDir tmp;
  fs::path data_dir;
  fs::path config;

  Fixture() {
    data_dir = tmp.path / "data";
    cli::SynthArgs synth;
    synth.spec.n_videos = 4;
    synth.spec.clips_per_video = 16;
    synth.spec.d_c = 6;
    synth.spec.d_w = 8;
    synth.spec.seed = 13;
    synth.out_dir = data_dir;
    REQUIRE(cli::cmd_synth(synth) == 0);

    config = tmp.path / "tiny.json";
    std::ofstream out(config);
    out << R"({"block_channels":[4,4,4,4,4],"fc6_channels":4,"fc7_channels":4})";
  }

  cli::TrainArgs train_args(const fs::path& out_dir) const {
    cli::TrainArgs args;
    args.manifest = data_dir / "manifest.json";
    args.embeddings = data_dir / "embeddings.txt";
    args.out_dir = out_dir;
    args.config = config;
    args.epochs = 2;
    args.seed = 3;
    return args;
  }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("train writes checkpoint, history, and summary") {
  Fixture fx;
  const fs::path run = fx.tmp.path / "run";
  CHECK(cli::cmd_train(fx.train_args(run)) == 0);
  CHECK(fs::exists(run / "checkpoint.bin"));
  CHECK(fs::exists(run / "history.csv"));
  CHECK(fs::exists(run / "summary.json"));

  const std::string csv = slurp(run / "history.csv");
  CHECK(csv.rfind("epoch,loss,thumb_loss,aux_loss,val_f1,val_iou\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 epochs
}

TEST_CASE("train with zero epochs still snapshots the initial params") {
  Fixture fx;
  cli::TrainArgs args = fx.train_args(fx.tmp.path / "run0");
  args.epochs = 0;
  CHECK(cli::cmd_train(args) == 0);
  AdamState adam;
  Model model = load_checkpoint(fx.tmp.path / "run0" / "checkpoint.bin", &adam);
  CHECK(adam.step == 0);
  CHECK(model.params.count() > 0);
}

TEST_CASE("identical flags and seed give identical artifacts") {
  Fixture fx;
  CHECK(cli::cmd_train(fx.train_args(fx.tmp.path / "r1")) == 0);
  CHECK(cli::cmd_train(fx.train_args(fx.tmp.path / "r2")) == 0);
  CHECK(slurp(fx.tmp.path / "r1" / "history.csv") ==
        slurp(fx.tmp.path / "r2" / "history.csv"));
  CHECK(slurp(fx.tmp.path / "r1" / "summary.json") ==
        slurp(fx.tmp.path / "r2" / "summary.json"));
  CHECK(slurp(fx.tmp.path / "r1" / "checkpoint.bin") ==
        slurp(fx.tmp.path / "r2" / "checkpoint.bin"));
}

TEST_CASE("eval prints both aggregations and writes the report") {
  Fixture fx;
  const fs::path run = fx.tmp.path / "run";
  REQUIRE(cli::cmd_train(fx.train_args(run)) == 0);

  cli::EvalArgs args;
  args.checkpoint = run / "checkpoint.bin";
  args.manifest = fx.data_dir / "manifest.json";
  args.embeddings = fx.data_dir / "embeddings.txt";
  args.agg = "both";
  args.out_dir = fx.tmp.path / "eval";
  CHECK(cli::cmd_eval(args) == 0);

  const std::string json = slurp(fx.tmp.path / "eval" / "eval.json");
  CHECK(json.find("\"mean\"") != std::string::npos);
  CHECK(json.find("\"max\"") != std::string::npos);
  CHECK(json.find("per_pair") != std::string::npos);
}

TEST_CASE("predict emits probabilities and an SVG with one cell per clip") {
  Fixture fx;
  const fs::path run = fx.tmp.path / "run";
  REQUIRE(cli::cmd_train(fx.train_args(run)) == 0);

  cli::PredictArgs args;
  args.checkpoint = run / "checkpoint.bin";
  args.manifest = fx.data_dir / "manifest.json";
  args.embeddings = fx.data_dir / "embeddings.txt";
  args.video_id = "video000";
  args.words = {"c0w0", "c0w1", "c0w2"};
  args.svg = fx.tmp.path / "timeline.svg";
  CHECK(cli::cmd_predict(args) == 0);

  const std::string svg = slurp(*args.svg);
  std::size_t cells = 0, at = 0;
  while ((at = svg.find("class=\"clip\"", at)) != std::string::npos) {
    ++cells;
    at += 1;
  }
  CHECK(cells == 16);

  // All-OOV sentences still produce a prediction (zero-vector sentence).
  args.words = {"zzz", "qqq"};
  args.svg.reset();
  CHECK(cli::cmd_predict(args) == 0);

  args.video_id = "nope";
  CHECK_THROWS_AS(cli::cmd_predict(args), DataError);
}

TEST_CASE("inspect summarizes checkpoints and manifests") {
  Fixture fx;
  const fs::path run = fx.tmp.path / "run";
  REQUIRE(cli::cmd_train(fx.train_args(run)) == 0);

  cli::InspectArgs args;
  args.checkpoint = run / "checkpoint.bin";
  args.manifest = fx.data_dir / "manifest.json";
  CHECK(cli::cmd_inspect(args) == 0);
  CHECK_THROWS_AS(cli::cmd_inspect(cli::InspectArgs{}), UsageError);
}

TEST_CASE("exit codes map exception categories") {
  CHECK(cli::run_guarded([] { return 0; }) == 0);
  CHECK(cli::run_guarded([]() -> int { throw UsageError("u"); }) == 1);
  CHECK(cli::run_guarded([]() -> int { throw DataError("d"); }) == 2);
  CHECK(cli::run_guarded([]() -> int { throw ShapeError("s"); }) == 2);
  CHECK(cli::run_guarded([]() -> int { throw NumericError("n"); }) == 3);
  CHECK(cli::run_guarded([]() -> int { throw std::runtime_error("x"); }) == 2);
}

TEST_CASE("empty manifest evaluates to a data error") {
  Fixture fx;
  const fs::path run = fx.tmp.path / "run";
  REQUIRE(cli::cmd_train(fx.train_args(run)) == 0);

  const fs::path empty = fx.tmp.path / "empty.json";
  {
    std::ofstream out(empty);
    out << R"({"version":1,"d_c":6,"d_w":8,"pairs":[]})";
  }
  cli::EvalArgs args;
  args.checkpoint = run / "checkpoint.bin";
  args.manifest = empty;
  args.embeddings = fx.data_dir / "embeddings.txt";
  CHECK_THROWS_AS(cli::cmd_eval(args), DataError);
  CHECK(cli::run_guarded([&] { return cli::cmd_eval(args); }) == 2);
}

TEST_CASE("arch config overrides validate unknown keys and bad values") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "cfg.json";
  {
    std::ofstream out(cfg);
    out << R"({"conv_kernel":5,"fc7_channels":8})";
  }
  const ArchConfig parsed = cli::load_arch_config(cfg);
  CHECK(parsed.conv_kernel == 5);
  CHECK(parsed.fc7_channels == 8);
  CHECK(parsed.fc6_channels == 256);  // untouched default

  {
    std::ofstream out(cfg);
    out << R"({"kernel":5})";
  }
  CHECK_THROWS_AS(cli::load_arch_config(cfg), DataError);

  {
    std::ofstream out(cfg);
    out << R"({"conv_kernel":4})";
  }
  CHECK_THROWS_AS(cli::load_arch_config(cfg), DataError);
}

}  // TEST_SUITE
