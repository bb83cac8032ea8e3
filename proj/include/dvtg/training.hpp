#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dvtg/metrics.hpp"
#include "dvtg/model.hpp"
#include "dvtg/optim.hpp"
#include "dvtg/sentence_encoder.hpp"

namespace dvtg {

// The four human annotations of one pair, behind an access counter so tests
// can assert that unsupervised training never reads them.
class AnnotationSet {
 public:
  AnnotationSet() = default;
  explicit AnnotationSet(std::array<ThumbnailAnnotation, 4> items)
      : items_(std::move(items)) {}

  const std::array<ThumbnailAnnotation, 4>& get() const {
    ++accesses_;
    return items_;
  }
  std::size_t access_count() const { return accesses_; }

 private:
  std::array<ThumbnailAnnotation, 4> items_{};
  mutable std::size_t accesses_ = 0;
};

struct LabeledPair {
  std::string video_id;
  VideoClipFeatures video;
  SentenceTokens sentence;
  AnnotationSet annotations;
};

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Per-clip binary cross entropy, mean over clips; labels come from gt.
Tensor thumb_loss(const ClipScores& scores, const ThumbnailAnnotation& gt);

// Squared L2 distance between the sentence vector and its reconstruction.
// Gradients flow into both sides.
Tensor aux_loss(const Tensor& z, const Tensor& z_hat);

// Sum of the loss terms the variant trains with. aux_weight defaults to the
// plain unweighted sum.
Tensor final_loss(const std::optional<Tensor>& thumb,
                  const std::optional<Tensor>& aux, const VariantConfig& variant,
                  double aux_weight = 1.0);

// ---------------------------------------------------------------------------
// Inference and evaluation
// ---------------------------------------------------------------------------

struct InferenceRule {
  enum class Kind { kArgmax, kTopK };
  Kind kind = Kind::kArgmax;
  int k = 5;

  static InferenceRule argmax() { return {Kind::kArgmax, 0}; }
  static InferenceRule top_k(int k) { return {Kind::kTopK, k}; }
  static InferenceRule from_string(const std::string& s);
  std::string to_string() const;
};

// Argmax rule: clips whose thumbnail score beats the non-thumbnail score;
// falls back to the single best clip when that set is empty. Top-k rule: the
// k clips with the highest thumbnail probability.
ThumbnailAnnotation predict_thumbnail(const ClipScores& scores,
                                      const InferenceRule& rule = {});

// Per-clip thumbnail probabilities (softmax class 1), for reporting.
std::vector<double> thumbnail_probabilities(const ClipScores& scores);

enum class EvalAggregation { kMeanOver4, kMaxOver4 };
const char* to_string(EvalAggregation agg);

struct PairEval {
  std::string video_id;
  double f1 = 0.0;
  double iou = 0.0;
};

struct EvalResult {
  double f1 = 0.0;
  double iou = 0.0;
  std::vector<PairEval> per_pair;
};

// Scores every pair's prediction against its four annotations and aggregates
// per the chosen rule; dataset values are means over pairs. Deterministic:
// pairs are visited in order.
EvalResult evaluate(const Model& model, const std::vector<LabeledPair>& dataset,
                    EvalAggregation agg = EvalAggregation::kMeanOver4,
                    const InferenceRule& rule = {});

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainHyper {
  double lr = 1e-4;
  int epochs = 0;
  std::uint64_t seed = 0;
  int eval_every = 0;  // 0 disables validation passes
  double aux_weight = 1.0;
  EvalAggregation eval_agg = EvalAggregation::kMeanOver4;
};

struct EpochStats {
  int epoch = 0;                 // 1-based
  double loss = 0.0;             // mean final loss over pairs
  std::optional<double> thumb;   // mean thumbnail loss, when trained
  std::optional<double> aux;     // mean auxiliary loss, when trained
  std::optional<double> val_f1;
  std::optional<double> val_iou;
};

struct TrainOutput {
  std::vector<EpochStats> history;
  AdamState adam;
  std::string rng_state;  // training stream state after the last epoch
};

// Seeded shuffling per epoch; one Adam update per video-sentence pair.
// Supervised variants train against the most consistent of the four
// annotations; the unsupervised variant never touches annotations. Aborts
// with NumericError naming epoch and pair if the loss goes non-finite.
TrainOutput train(Model& model, const std::vector<LabeledPair>& train_pairs,
                  const std::vector<LabeledPair>* val_pairs,
                  const TrainHyper& hyper);

}  // namespace dvtg
