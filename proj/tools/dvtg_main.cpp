#include <CLI11.hpp>

#include "dvtg/cli.hpp"

namespace {

std::filesystem::path to_path(const std::string& s) { return {s}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sentence-guided dynamic video thumbnail generation"};
  app.require_subcommand(1);

  // ---- synth-data ----
  dvtg::cli::SynthArgs synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth-data", "Generate a synthetic dataset");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--videos", synth.spec.n_videos, "Number of videos");
  synth_cmd->add_option("--clips", synth.spec.clips_per_video, "Clips per video");
  synth_cmd->add_option("--concepts", synth.spec.n_concepts, "Number of concepts");
  synth_cmd->add_option("--dc", synth.spec.d_c, "Clip feature dimension");
  synth_cmd->add_option("--dw", synth.spec.d_w, "Word embedding dimension");
  synth_cmd->add_option("--noise", synth.spec.noise_sigma, "Feature noise sigma");
  synth_cmd->add_option("--seed", synth.spec.seed, "Random seed");
  synth_cmd->add_option("--max-thumb", synth.spec.max_thumb_clips,
                        "Max clips per thumbnail (1-5)");

  // ---- train ----
  dvtg::cli::TrainArgs train;
  std::string train_manifest, train_embeddings, train_out, train_mode, train_config;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--manifest", train_manifest, "Dataset manifest")->required();
  train_cmd->add_option("--embeddings", train_embeddings, "Embedding table")->required();
  train_cmd->add_option("--out", train_out, "Output directory")->required();
  train_cmd->add_option("--variant", train.variant,
                        "fcsn | in_fcsn | in_fcsn_concat | guided_dvtg | "
                        "guided_dvtg_na | guided_dvtg_unsup");
  train_cmd->add_option("--mode", train_mode,
                        "Modulation override: fixed_identity | learned | predicted");
  train_cmd->add_option("--config", train_config, "ArchConfig overrides (JSON)");
  train_cmd->add_option("--lr", train.lr, "Learning rate");
  train_cmd->add_option("--epochs", train.epochs, "Training epochs");
  train_cmd->add_option("--seed", train.seed, "Random seed");
  train_cmd->add_option("--eval-every", train.eval_every,
                        "Validate every N epochs (0 = never)");
  train_cmd->add_option("--aux-weight", train.aux_weight, "Auxiliary loss weight");
  train_cmd->add_option("--agg", train.agg, "Eval aggregation: mean | max");

  // ---- eval ----
  dvtg::cli::EvalArgs eval;
  std::string eval_ckpt, eval_manifest, eval_embeddings, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "Dataset manifest")->required();
  eval_cmd->add_option("--embeddings", eval_embeddings, "Embedding table")->required();
  eval_cmd->add_option("--out", eval_out, "Output directory for eval.json");
  eval_cmd->add_option("--agg", eval.agg, "mean | max | both");
  eval_cmd->add_option("--infer", eval.infer, "argmax | topk:K");

  // ---- predict ----
  dvtg::cli::PredictArgs predict;
  std::string pred_ckpt, pred_manifest, pred_embeddings, pred_svg;
  auto* predict_cmd = app.add_subcommand("predict", "Predict a thumbnail");
  predict_cmd->add_option("--checkpoint", pred_ckpt, "Checkpoint file")->required();
  predict_cmd->add_option("--manifest", pred_manifest, "Dataset manifest")->required();
  predict_cmd->add_option("--embeddings", pred_embeddings, "Embedding table")->required();
  predict_cmd->add_option("--video", predict.video_id, "Video id")->required();
  predict_cmd->add_option("--sentence", predict.words, "Query sentence words")
      ->required()
      ->expected(-1);
  predict_cmd->add_option("--infer", predict.infer, "argmax | topk:K");
  predict_cmd->add_option("--svg", pred_svg, "Write an SVG timeline here");

  // ---- inspect ----
  std::string inspect_ckpt, inspect_manifest;
  auto* inspect_cmd = app.add_subcommand("inspect", "Describe a checkpoint or manifest");
  inspect_cmd->add_option("--checkpoint", inspect_ckpt, "Checkpoint file");
  inspect_cmd->add_option("--manifest", inspect_manifest, "Dataset manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // usage errors exit 1
  }

  return dvtg::cli::run_guarded([&]() -> int {
    if (synth_cmd->parsed()) {
      synth.out_dir = to_path(synth_out);
      return dvtg::cli::cmd_synth(synth);
    }
    if (train_cmd->parsed()) {
      train.manifest = to_path(train_manifest);
      train.embeddings = to_path(train_embeddings);
      train.out_dir = to_path(train_out);
      if (!train_mode.empty()) train.modulation_mode = train_mode;
      if (!train_config.empty()) train.config = to_path(train_config);
      return dvtg::cli::cmd_train(train);
    }
    if (eval_cmd->parsed()) {
      eval.checkpoint = to_path(eval_ckpt);
      eval.manifest = to_path(eval_manifest);
      eval.embeddings = to_path(eval_embeddings);
      if (!eval_out.empty()) eval.out_dir = to_path(eval_out);
      return dvtg::cli::cmd_eval(eval);
    }
    if (predict_cmd->parsed()) {
      predict.checkpoint = to_path(pred_ckpt);
      predict.manifest = to_path(pred_manifest);
      predict.embeddings = to_path(pred_embeddings);
      if (!pred_svg.empty()) predict.svg = to_path(pred_svg);
      return dvtg::cli::cmd_predict(predict);
    }
    dvtg::cli::InspectArgs inspect;
    if (!inspect_ckpt.empty()) inspect.checkpoint = to_path(inspect_ckpt);
    if (!inspect_manifest.empty()) inspect.manifest = to_path(inspect_manifest);
    return dvtg::cli::cmd_inspect(inspect);
  });
}
