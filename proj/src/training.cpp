#include "dvtg/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dvtg/errors.hpp"

namespace dvtg {

Tensor thumb_loss(const ClipScores& scores, const ThumbnailAnnotation& gt) {
  if (gt.clip_count != scores.clip_count()) {
    throw ShapeError("thumb_loss: annotation covers " +
                     std::to_string(gt.clip_count) + " clips, scores cover " +
                     std::to_string(scores.clip_count()));
  }
  std::vector<int> labels(static_cast<std::size_t>(gt.clip_count), 0);
  for (int idx : gt.selected) labels[static_cast<std::size_t>(idx)] = 1;
  return softmax_cross_entropy(scores.scores, labels);
}

Tensor aux_loss(const Tensor& z, const Tensor& z_hat) {
  if (z.shape() != z_hat.shape()) {
    throw ShapeError("aux_loss: dimension mismatch " + shape_str(z.shape()) +
                     " vs " + shape_str(z_hat.shape()));
  }
  Tensor diff = sub(z, z_hat);
  return sum(mul(diff, diff));
}

Tensor final_loss(const std::optional<Tensor>& thumb,
                  const std::optional<Tensor>& aux, const VariantConfig& variant,
                  double aux_weight) {
  std::optional<Tensor> total;
  if (variant.uses_thumb_loss) {
    if (!thumb) throw UsageError("variant trains with the thumbnail loss but none was given");
    total = *thumb;
  }
  if (variant.uses_aux_loss) {
    if (!aux) throw UsageError("variant trains with the auxiliary loss but none was given");
    Tensor a = aux_weight == 1.0 ? *aux : mul(*aux, Tensor::scalar(aux_weight));
    total = total ? add(*total, a) : a;
  }
  if (!total) throw UsageError("variant has no active loss terms");
  return *total;
}

InferenceRule InferenceRule::from_string(const std::string& s) {
  if (s == "argmax") return argmax();
  if (s.rfind("topk:", 0) == 0) {
    const int k = std::stoi(s.substr(5));
    if (k < 1) throw UsageError("topk rule needs k >= 1");
    return top_k(k);
  }
  throw UsageError("unknown inference rule '" + s + "' (argmax | topk:K)");
}

std::string InferenceRule::to_string() const {
  return kind == Kind::kArgmax ? "argmax" : "topk:" + std::to_string(k);
}

std::vector<double> thumbnail_probabilities(const ClipScores& scores) {
  const int c = scores.clip_count();
  std::vector<double> probs(static_cast<std::size_t>(c));
  for (int i = 0; i < c; ++i) {
    const double s0 = scores.scores.at(static_cast<std::size_t>(i * 2));
    const double s1 = scores.scores.at(static_cast<std::size_t>(i * 2 + 1));
    const double mx = std::max(s0, s1);
    const double e0 = std::exp(s0 - mx);
    const double e1 = std::exp(s1 - mx);
    probs[static_cast<std::size_t>(i)] = e1 / (e0 + e1);
  }
  return probs;
}

ThumbnailAnnotation predict_thumbnail(const ClipScores& scores,
                                      const InferenceRule& rule) {
  const int c = scores.clip_count();
  std::vector<int> selected;
  if (rule.kind == InferenceRule::Kind::kArgmax) {
    int best = 0;
    double best_margin = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < c; ++i) {
      const double margin = scores.scores.at(static_cast<std::size_t>(i * 2 + 1)) -
                            scores.scores.at(static_cast<std::size_t>(i * 2));
      if (margin > 0.0) selected.push_back(i);
      if (margin > best_margin) {
        best_margin = margin;
        best = i;
      }
    }
    if (selected.empty()) selected.push_back(best);  // never predict nothing
  } else {
    const int k = std::min(rule.k, c);
    std::vector<int> order(static_cast<std::size_t>(c));
    std::iota(order.begin(), order.end(), 0);
    // Probability is monotone in the margin; sort by margin, index breaks ties.
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      const double ma = scores.scores.at(static_cast<std::size_t>(a * 2 + 1)) -
                        scores.scores.at(static_cast<std::size_t>(a * 2));
      const double mb = scores.scores.at(static_cast<std::size_t>(b * 2 + 1)) -
                        scores.scores.at(static_cast<std::size_t>(b * 2));
      return ma > mb;
    });
    selected.assign(order.begin(), order.begin() + k);
  }
  return ThumbnailAnnotation(std::move(selected), c);
}

const char* to_string(EvalAggregation agg) {
  return agg == EvalAggregation::kMeanOver4 ? "mean" : "max";
}

EvalResult evaluate(const Model& model, const std::vector<LabeledPair>& dataset,
                    EvalAggregation agg, const InferenceRule& rule) {
  if (dataset.empty()) throw DataError("evaluate: empty dataset");
  Rng rng(0);  // eval mode draws nothing
  EvalResult result;
  result.per_pair.reserve(dataset.size());
  for (const LabeledPair& pair : dataset) {
    ForwardResult fwd = forward(
        model, pair.video,
        model.variant.uses_sentence ? &pair.sentence : nullptr, false, rng);
    const ThumbnailAnnotation pred = predict_thumbnail(fwd.scores, rule);

    double f1 = 0.0, iou = 0.0;
    const auto& anns = pair.annotations.get();
    if (agg == EvalAggregation::kMeanOver4) {
      for (const auto& ann : anns) {
        f1 += f1_score(pred, ann) / static_cast<double>(anns.size());
        iou += iou_score(pred, ann) / static_cast<double>(anns.size());
      }
    } else {
      for (const auto& ann : anns) {
        f1 = std::max(f1, f1_score(pred, ann));
        iou = std::max(iou, iou_score(pred, ann));
      }
    }
    result.per_pair.push_back({pair.video_id, f1, iou});
    result.f1 += f1;
    result.iou += iou;
  }
  result.f1 /= static_cast<double>(dataset.size());
  result.iou /= static_cast<double>(dataset.size());
  return result;
}

TrainOutput train(Model& model, const std::vector<LabeledPair>& train_pairs,
                  const std::vector<LabeledPair>* val_pairs,
                  const TrainHyper& hyper) {
  if (train_pairs.empty()) throw DataError("train: empty dataset");
  const VariantConfig& vc = model.variant;

  TrainOutput out;
  out.adam.lr = hyper.lr;
  Rng rng(hyper.seed);

  std::vector<std::size_t> order(train_pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0, thumb_sum = 0.0, aux_sum = 0.0;

    for (std::size_t idx : order) {
      const LabeledPair& pair = train_pairs[idx];
      ForwardResult fwd = forward(model, pair.video,
                                  vc.uses_sentence ? &pair.sentence : nullptr,
                                  true, rng);

      std::optional<Tensor> thumb, aux;
      if (vc.uses_thumb_loss) {
        const ThumbnailAnnotation& gt = select_consistent_gt(pair.annotations.get());
        thumb = thumb_loss(fwd.scores, gt);
        thumb_sum += thumb->value();
      }
      if (vc.uses_aux_loss) {
        // When the thumbnail loss is also active, the sentence vector acts as
        // the reconstruction target: gradients flow into z_hat's path only.
        // Training through both sides lets the reconstruction term collapse z
        // to a sentence-independent point before the (identity-initialized)
        // modulation heads develop any counter-pressure, which destroys the
        // conditioning signal. The purely unsupervised variant keeps the
        // symmetric joint flow; with no other loss there is nothing to
        // protect.
        aux = vc.uses_thumb_loss ? aux_loss(detach(fwd.z), fwd.z_hat)
                                 : aux_loss(fwd.z, fwd.z_hat);
        aux_sum += aux->value();
      }
      Tensor loss = final_loss(thumb, aux, vc, hyper.aux_weight);
      if (!std::isfinite(loss.value())) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                           ", pair " + std::to_string(idx) + " (video '" +
                           pair.video_id + "')");
      }
      loss_sum += loss.value();

      model.params.zero_grad();
      loss.backward();
      adam_step(model.params, out.adam);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = loss_sum / static_cast<double>(train_pairs.size());
    if (vc.uses_thumb_loss) stats.thumb = thumb_sum / static_cast<double>(train_pairs.size());
    if (vc.uses_aux_loss) stats.aux = aux_sum / static_cast<double>(train_pairs.size());

    if (val_pairs && !val_pairs->empty() && hyper.eval_every > 0 &&
        epoch % hyper.eval_every == 0) {
      const EvalResult val = evaluate(model, *val_pairs, hyper.eval_agg);
      stats.val_f1 = val.f1;
      stats.val_iou = val.iou;
    }
    out.history.push_back(stats);
  }
  out.rng_state = rng.serialize();
  return out;
}

}  // namespace dvtg
