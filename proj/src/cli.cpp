#include "dvtg/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "dvtg/errors.hpp"
#include "dvtg/training.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace dvtg::cli {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

struct Split {
  std::vector<LabeledPair> train;
  std::vector<LabeledPair> val;
  std::vector<LabeledPair> test;
};

// 70/15/15 by seeded shuffle; very small datasets keep at least one training
// pair and give up the held-out splits first.
Split split_dataset(std::vector<LabeledPair> pairs, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);

  const std::size_t n = pairs.size();
  std::size_t n_train = std::max<std::size_t>(1, static_cast<std::size_t>(0.7 * static_cast<double>(n)));
  std::size_t n_val = static_cast<std::size_t>(0.15 * static_cast<double>(n));
  n_train = std::min(n_train, n);
  n_val = std::min(n_val, n - n_train);

  Split split;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledPair& p = pairs[order[i]];
    if (i < n_train) {
      split.train.push_back(std::move(p));
    } else if (i < n_train + n_val) {
      split.val.push_back(std::move(p));
    } else {
      split.test.push_back(std::move(p));
    }
  }
  return split;
}

EvalAggregation agg_from_string(const std::string& s) {
  if (s == "mean") return EvalAggregation::kMeanOver4;
  if (s == "max") return EvalAggregation::kMaxOver4;
  throw UsageError("unknown aggregation '" + s + "' (mean | max | both)");
}

std::string history_csv(const std::vector<EpochStats>& history) {
  std::ostringstream out;
  out << "epoch,loss,thumb_loss,aux_loss,val_f1,val_iou\n";
  for (const EpochStats& e : history) {
    out << e.epoch << ',' << fmt_double(e.loss) << ',';
    if (e.thumb) out << fmt_double(*e.thumb);
    out << ',';
    if (e.aux) out << fmt_double(*e.aux);
    out << ',';
    if (e.val_f1) out << fmt_double(*e.val_f1);
    out << ',';
    if (e.val_iou) out << fmt_double(*e.val_iou);
    out << '\n';
  }
  return std::move(out).str();
}

ordered_json eval_to_json(const EvalResult& result) {
  ordered_json j;
  j["f1"] = result.f1;
  j["iou"] = result.iou;
  j["per_pair"] = ordered_json::array();
  for (const PairEval& p : result.per_pair) {
    j["per_pair"].push_back({{"video_id", p.video_id}, {"f1", p.f1}, {"iou", p.iou}});
  }
  return j;
}

}  // namespace

ArchConfig load_arch_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }

  ArchConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    try {
      if (key == "block_channels") {
        const auto v = value.get<std::vector<int>>();
        if (v.size() != 5) {
          throw DataError(path.string() + ": block_channels must list 5 values");
        }
        std::copy(v.begin(), v.end(), cfg.block_channels.begin());
      } else if (key == "convs_per_block") {
        cfg.convs_per_block = value.get<int>();
      } else if (key == "fc6_channels") {
        cfg.fc6_channels = value.get<int>();
      } else if (key == "fc7_channels") {
        cfg.fc7_channels = value.get<int>();
      } else if (key == "conv_kernel") {
        cfg.conv_kernel = value.get<int>();
      } else if (key == "pool_size") {
        cfg.pool_size = value.get<int>();
      } else if (key == "pool_stride") {
        cfg.pool_stride = value.get<int>();
      } else if (key == "dropout_p") {
        cfg.dropout_p = value.get<double>();
      } else if (key == "deconv1_kernel") {
        cfg.deconv1_kernel = value.get<int>();
      } else if (key == "deconv1_stride") {
        cfg.deconv1_stride = value.get<int>();
      } else if (key == "deconv2_kernel") {
        cfg.deconv2_kernel = value.get<int>();
      } else if (key == "deconv2_stride") {
        cfg.deconv2_stride = value.get<int>();
      } else {
        throw DataError(path.string() + ": unknown config key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ": bad value for '" + key + "': " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

int cmd_synth(const SynthArgs& args) {
  const SynthOutput out = generate_synthetic(args.spec, args.out_dir);
  std::cout << "wrote " << out.manifest.pairs.size() << " pairs ("
            << args.spec.n_videos << " videos, seed " << args.spec.seed << ") to "
            << args.out_dir.string() << "\n"
            << "  manifest:   " << out.manifest_path.string() << "\n"
            << "  embeddings: " << out.embeddings_path.string() << "\n";
  return 0;
}

int cmd_train(const TrainArgs& args) {
  if (args.agg != "mean" && args.agg != "max") {
    throw UsageError("train --agg must be mean or max");
  }
  const EmbeddingTable embeddings = EmbeddingTable::load(args.embeddings);
  std::vector<LabeledPair> all = load_dataset(args.manifest, embeddings);
  const DatasetManifest manifest_meta = load_manifest(args.manifest);

  VariantConfig variant = VariantConfig::make(variant_from_string(args.variant));
  if (args.modulation_mode) {
    variant = variant.with_modulation_mode(
        modulation_mode_from_string(*args.modulation_mode));
  }
  const ArchConfig arch =
      args.config ? load_arch_config(*args.config) : ArchConfig{};

  const std::size_t total = all.size();
  Split split = split_dataset(std::move(all), args.seed);

  Rng init_rng(args.seed);
  Model model = Model::init(variant, arch, manifest_meta.d_c, manifest_meta.d_w,
                            init_rng);

  TrainHyper hyper;
  hyper.lr = args.lr;
  hyper.epochs = args.epochs;
  hyper.seed = args.seed;
  hyper.eval_every = args.eval_every;
  hyper.aux_weight = args.aux_weight;
  hyper.eval_agg = agg_from_string(args.agg);

  std::cout << "training " << args.variant << " (" << to_string(variant.modulation_mode)
            << " modulation) on " << split.train.size() << "/" << split.val.size()
            << "/" << split.test.size() << " train/val/test pairs, seed "
            << args.seed << ", lr " << args.lr << ", " << args.epochs
            << " epochs\n";

  const TrainOutput trained =
      train(model, split.train, split.val.empty() ? nullptr : &split.val, hyper);

  fs::create_directories(args.out_dir);
  CheckpointMeta meta;
  meta.seed = args.seed;
  meta.rng_state = trained.rng_state;
  save_checkpoint(args.out_dir / "checkpoint.bin", model, &trained.adam, meta);
  write_text(args.out_dir / "history.csv", history_csv(trained.history));

  const EvalAggregation agg = hyper.eval_agg;
  const EvalResult train_eval = evaluate(model, split.train, agg);
  std::optional<EvalResult> val_eval;
  if (!split.val.empty()) val_eval = evaluate(model, split.val, agg);

  ordered_json summary;
  summary["variant"] = args.variant;
  summary["modulation_mode"] = to_string(variant.modulation_mode);
  summary["seed"] = args.seed;
  summary["lr"] = args.lr;
  summary["epochs"] = args.epochs;
  summary["aux_weight"] = args.aux_weight;
  summary["agg"] = args.agg;
  summary["dataset"] = {{"pairs", total},
                        {"train", split.train.size()},
                        {"val", split.val.size()},
                        {"test", split.test.size()}};
  summary["final"] = ordered_json::object();
  if (!trained.history.empty()) {
    summary["final"]["loss"] = trained.history.back().loss;
  }
  summary["final"]["train_f1"] = train_eval.f1;
  summary["final"]["train_iou"] = train_eval.iou;
  if (val_eval) {
    summary["final"]["val_f1"] = val_eval->f1;
    summary["final"]["val_iou"] = val_eval->iou;
  }
  write_text(args.out_dir / "summary.json", summary.dump(2) + "\n");

  std::cout << "final train f1 " << fmt_double(train_eval.f1) << ", iou "
            << fmt_double(train_eval.iou);
  if (val_eval) {
    std::cout << "; val f1 " << fmt_double(val_eval->f1) << ", iou "
              << fmt_double(val_eval->iou);
  }
  std::cout << "\nwrote checkpoint.bin, history.csv, summary.json to "
            << args.out_dir.string() << "\n";
  return 0;
}

int cmd_eval(const EvalArgs& args) {
  Model model = load_checkpoint(args.checkpoint);
  const EmbeddingTable embeddings = EmbeddingTable::load(args.embeddings);
  const std::vector<LabeledPair> dataset = load_dataset(args.manifest, embeddings);
  const InferenceRule rule = InferenceRule::from_string(args.infer);

  std::vector<std::string> aggs;
  if (args.agg == "both") {
    aggs = {"mean", "max"};
  } else {
    aggs = {args.agg};
  }

  ordered_json doc;
  doc["variant"] = to_string(model.variant.variant);
  doc["rule"] = rule.to_string();
  doc["pairs"] = dataset.size();
  doc["aggregations"] = ordered_json::object();
  for (const std::string& name : aggs) {
    const EvalResult result = evaluate(model, dataset, agg_from_string(name), rule);
    doc["aggregations"][name] = eval_to_json(result);
    std::cout << "agg=" << name << " rule=" << rule.to_string() << " pairs="
              << dataset.size() << " f1=" << fmt_double(result.f1)
              << " iou=" << fmt_double(result.iou) << "\n";
  }

  if (args.out_dir) {
    fs::create_directories(*args.out_dir);
    write_text(*args.out_dir / "eval.json", doc.dump(2) + "\n");
    std::cout << "wrote " << (*args.out_dir / "eval.json").string() << "\n";
  }
  return 0;
}

namespace {

std::string timeline_svg(int clips, const std::vector<int>& predicted,
                         const std::vector<int>* gt) {
  const int cell = 12;
  const int width = clips * cell + 20;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"70\">\n";
  // Video bar: one gray cell per clip.
  for (int i = 0; i < clips; ++i) {
    svg << "  <rect class=\"clip\" x=\"" << 10 + i * cell
        << "\" y=\"10\" width=\"" << cell - 1 << "\" height=\"14\" fill=\"#b0b0b0\"/>\n";
  }
  if (gt) {
    for (int i : *gt) {
      svg << "  <rect class=\"gt\" x=\"" << 10 + i * cell
          << "\" y=\"28\" width=\"" << cell - 1 << "\" height=\"14\" fill=\"#2e8b57\"/>\n";
    }
  }
  for (int i : predicted) {
    svg << "  <rect class=\"pred\" x=\"" << 10 + i * cell
        << "\" y=\"46\" width=\"" << cell - 1 << "\" height=\"14\" fill=\"#ff8c00\"/>\n";
  }
  svg << "</svg>\n";
  return std::move(svg).str();
}

}  // namespace

int cmd_predict(const PredictArgs& args) {
  if (args.words.empty()) throw UsageError("predict needs a sentence");
  Model model = load_checkpoint(args.checkpoint);
  const EmbeddingTable embeddings = EmbeddingTable::load(args.embeddings);
  const DatasetManifest manifest = load_manifest(args.manifest);

  const ManifestPair* found = nullptr;
  for (const ManifestPair& p : manifest.pairs) {
    if (p.video_id == args.video_id) {
      found = &p;
      break;
    }
  }
  if (!found) {
    throw DataError("video id '" + args.video_id + "' not present in manifest");
  }
  const VideoClipFeatures video =
      load_features(args.manifest.parent_path() / found->feature_file);
  const SentenceTokens sentence = embeddings.encode_words(args.words);

  Rng rng(0);
  const ForwardResult fwd = forward(
      model, video, model.variant.uses_sentence ? &sentence : nullptr, false, rng);
  const InferenceRule rule = InferenceRule::from_string(args.infer);
  const ThumbnailAnnotation pred = predict_thumbnail(fwd.scores, rule);
  const std::vector<double> probs = thumbnail_probabilities(fwd.scores);

  std::cout << "video " << args.video_id << " (" << video.clip_count()
            << " clips), rule " << rule.to_string() << "\n";
  std::cout << "selected clips:";
  for (int i : pred.selected) std::cout << ' ' << i;
  std::cout << "\n";
  for (int i = 0; i < video.clip_count(); ++i) {
    const bool sel =
        std::binary_search(pred.selected.begin(), pred.selected.end(), i);
    std::cout << "  clip " << i << "  p=" << fmt_double(probs[static_cast<std::size_t>(i)])
              << (sel ? "  *" : "") << "\n";
  }

  if (args.svg) {
    // Ground truth is only known when the query matches a labeled pair.
    const std::vector<int>* gt = nullptr;
    std::vector<int> gt_storage;
    for (const ManifestPair& p : manifest.pairs) {
      if (p.video_id == args.video_id && p.sentence == args.words) {
        std::array<ThumbnailAnnotation, 4> anns;
        for (std::size_t i = 0; i < 4; ++i) {
          anns[i] = ThumbnailAnnotation(p.annotations[i], video.clip_count());
        }
        gt_storage = select_consistent_gt(anns).selected;
        gt = &gt_storage;
        break;
      }
    }
    write_text(*args.svg, timeline_svg(video.clip_count(), pred.selected, gt));
    std::cout << "wrote " << args.svg->string() << "\n";
  }
  return 0;
}

int cmd_inspect(const InspectArgs& args) {
  if (!args.checkpoint && !args.manifest) {
    throw UsageError("inspect needs --checkpoint and/or --manifest");
  }
  if (args.checkpoint) {
    AdamState adam;
    CheckpointMeta meta;
    Model model = load_checkpoint(*args.checkpoint, &adam, &meta);
    std::cout << "checkpoint " << args.checkpoint->string() << "\n"
              << "  variant: " << to_string(model.variant.variant)
              << " (modulation " << to_string(model.variant.modulation_mode) << ")\n"
              << "  d_c: " << model.feature_dim << ", d_w: " << model.embed_dim << "\n"
              << "  seed: " << meta.seed << ", adam step: " << adam.step << "\n"
              << "  arch: blocks [";
    for (std::size_t i = 0; i < model.arch.block_channels.size(); ++i) {
      std::cout << (i ? "," : "") << model.arch.block_channels[i];
    }
    std::cout << "] fc " << model.arch.fc6_channels << "/" << model.arch.fc7_channels
              << " kernel " << model.arch.conv_kernel << "\n"
              << "  parameters (" << model.params.count() << " tensors, "
              << model.params.scalar_count() << " scalars):\n";
    for (const auto& [name, t] : model.params) {
      std::cout << "    " << name << " " << shape_str(t.shape()) << "\n";
    }
  }
  if (args.manifest) {
    const DatasetManifest m = load_manifest(*args.manifest);
    std::size_t videos = 0;
    {
      std::vector<std::string> ids;
      for (const auto& p : m.pairs) ids.push_back(p.video_id);
      std::sort(ids.begin(), ids.end());
      videos = static_cast<std::size_t>(
          std::unique(ids.begin(), ids.end()) - ids.begin());
    }
    std::cout << "manifest " << args.manifest->string() << "\n"
              << "  version " << m.version << ", d_c " << m.d_c << ", d_w " << m.d_w
              << "\n"
              << "  " << m.pairs.size() << " pairs over " << videos << " videos\n";
  }
  return 0;
}

int run_guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace dvtg::cli
