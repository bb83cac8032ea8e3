#include <doctest.h>

#include <cmath>

#include "dvtg/errors.hpp"
#include "dvtg/training.hpp"
#include "test_helpers.hpp"

using namespace dvtg;
using testutil::random_tensor;

namespace {

// Hand-built two-pair dataset: one video, two sentences pointing at disjoint
// clip sets whose features match distinct prototypes.
std::vector<LabeledPair> toy_dataset(int clips, int d_c, int d_w, Rng& rng) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(clips),
                                        std::vector<double>(static_cast<std::size_t>(d_c), 0.0));
  std::vector<double> proto_a(static_cast<std::size_t>(d_c)), proto_b(static_cast<std::size_t>(d_c));
  for (double& v : proto_a) v = rng.gaussian();
  for (double& v : proto_b) v = rng.gaussian();
  const std::vector<int> gt_a = {1, 5, 9};
  const std::vector<int> gt_b = {2, 12};
  for (int i : gt_a) rows[static_cast<std::size_t>(i)] = proto_a;
  for (int i : gt_b) rows[static_cast<std::size_t>(i)] = proto_b;

  auto annotations = [clips](const std::vector<int>& gt) {
    std::vector<int> drop(gt.begin() + 1, gt.end());
    std::vector<int> swap = gt;
    ++swap[0];
    while (std::find(swap.begin() + 1, swap.end(), swap[0]) != swap.end()) ++swap[0];
    std::sort(swap.begin(), swap.end());
    return AnnotationSet({ThumbnailAnnotation(gt, clips), ThumbnailAnnotation(gt, clips),
                          drop.empty() ? ThumbnailAnnotation(gt, clips)
                                       : ThumbnailAnnotation(drop, clips),
                          ThumbnailAnnotation(swap, clips)});
  };

  std::vector<LabeledPair> out;
  for (int which = 0; which < 2; ++which) {
    LabeledPair pair;
    pair.video_id = "toy";
    pair.video = VideoClipFeatures::from_rows(rows);
    pair.sentence = SentenceTokens{random_tensor({d_w, 3}, rng)};
    pair.annotations = annotations(which == 0 ? gt_a : gt_b);
    out.push_back(std::move(pair));
  }
  return out;
}

Model toy_model(Variant v, int d_c, int d_w, std::uint64_t seed = 5) {
  Rng rng(seed);
  return Model::init(VariantConfig::make(v), ArchConfig::tiny(), d_c, d_w, rng);
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("thumb_loss on uniform and confident scores") {
  ClipScores zeros{Tensor::zeros({1, 4, 2})};
  const ThumbnailAnnotation gt({1, 3}, 4);
  CHECK(thumb_loss(zeros, gt).value() == doctest::Approx(std::log(2.0)));

  std::vector<double> confident(8, 0.0);
  for (int c = 0; c < 4; ++c) {
    const bool selected = c == 1 || c == 3;
    confident[static_cast<std::size_t>(c * 2 + (selected ? 1 : 0))] = 1000.0;
  }
  CHECK(thumb_loss(ClipScores{Tensor::from_data({1, 4, 2}, confident)}, gt).value() ==
        doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS(thumb_loss(zeros, ThumbnailAnnotation({0}, 5)), ShapeError);
}

TEST_CASE("thumb_loss matches the extended-precision formula oracle") {
  Rng rng(1);
  Tensor logits = random_tensor({1, 6, 2}, rng, -2.0, 2.0);
  const ThumbnailAnnotation gt({0, 4}, 6);
  std::vector<int> labels = {1, 0, 0, 0, 1, 0};
  CHECK(thumb_loss(ClipScores{logits}, gt).value() ==
        doctest::Approx(oracle::softmax_cross_entropy(testutil::map_rows(logits), labels))
            .epsilon(1e-10));
}

TEST_CASE("aux_loss is the squared distance") {
  Tensor z = Tensor::from_data({2}, {1, 0});
  CHECK(aux_loss(z, z).value() == 0.0);
  CHECK(aux_loss(z, Tensor::zeros({2})).value() == doctest::Approx(1.0));

  Rng rng(2);
  Tensor a = random_tensor({8}, rng);
  Tensor b = random_tensor({8}, rng);
  double expect = 0.0;
  for (std::size_t i = 0; i < 8; ++i) expect += (a.at(i) - b.at(i)) * (a.at(i) - b.at(i));
  CHECK(aux_loss(a, b).value() == doctest::Approx(expect).epsilon(1e-12));

  CHECK_THROWS_AS(aux_loss(z, Tensor::zeros({3})), ShapeError);
}

TEST_CASE("final_loss respects the variant flags") {
  const Tensor thumb = Tensor::scalar(0.7);
  const Tensor aux = Tensor::scalar(0.1);

  CHECK(final_loss(thumb, aux, VariantConfig::make(Variant::kGuidedDvtg)).value() ==
        doctest::Approx(0.8));
  CHECK(final_loss(thumb, aux, VariantConfig::make(Variant::kGuidedDvtgUnsup)).value() ==
        doctest::Approx(0.1));  // unsup ignores the thumbnail term
  CHECK(final_loss(thumb, aux, VariantConfig::make(Variant::kGuidedDvtgNa)).value() ==
        doctest::Approx(0.7));
  CHECK(final_loss(thumb, std::nullopt, VariantConfig::make(Variant::kFcsn)).value() ==
        doctest::Approx(0.7));
  CHECK(final_loss(thumb, aux, VariantConfig::make(Variant::kGuidedDvtg), 0.5).value() ==
        doctest::Approx(0.75));
  CHECK_THROWS_AS(final_loss(std::nullopt, aux, VariantConfig::make(Variant::kFcsn)),
                  UsageError);
}

TEST_CASE("argmax inference with non-empty fallback") {
  auto scores_from_margins = [](const std::vector<double>& margins) {
    std::vector<double> data;
    for (double m : margins) {
      data.push_back(0.0);
      data.push_back(m);
    }
    return ClipScores{Tensor::from_data({1, static_cast<int>(margins.size()), 2}, data)};
  };

  CHECK(predict_thumbnail(scores_from_margins({1, -1, 1})).selected ==
        std::vector<int>{0, 2});
  CHECK(predict_thumbnail(scores_from_margins({-3, -1, -2})).selected ==
        std::vector<int>{1});  // all-negative: best single clip
  CHECK(predict_thumbnail(scores_from_margins({0.9, 0.5, 0.7}), InferenceRule::top_k(2))
            .selected == std::vector<int>{0, 2});
  CHECK(predict_thumbnail(scores_from_margins({0.1, 0.2}), InferenceRule::top_k(5))
            .selected == std::vector<int>{0, 1});  // k capped at C
}

TEST_CASE("inference rule parsing") {
  CHECK(InferenceRule::from_string("argmax").kind == InferenceRule::Kind::kArgmax);
  CHECK(InferenceRule::from_string("topk:3").k == 3);
  CHECK_THROWS_AS(InferenceRule::from_string("best"), UsageError);
  CHECK_THROWS_AS(InferenceRule::from_string("topk:0"), UsageError);
}

TEST_CASE("evaluate aggregation semantics") {
  // A model-free check through a model that always scores the same: instead
  // of training, pick annotations around a known prediction.
  Rng rng(3);
  Model m = toy_model(Variant::kFcsn, 4, 4);
  std::vector<std::vector<double>> rows(8, std::vector<double>(4, 0.0));
  LabeledPair pair;
  pair.video_id = "v";
  pair.video = VideoClipFeatures::from_rows(rows);
  pair.sentence = SentenceTokens{random_tensor({4, 2}, rng)};

  Rng fwd(0);
  const ThumbnailAnnotation pred =
      predict_thumbnail(forward(m, pair.video, nullptr, false, fwd).scores);

  // Annotation 0 equals the prediction; the rest are disjoint from it.
  std::vector<int> rest;
  for (int i = 0; i < 8 && rest.size() < 2; ++i) {
    if (!std::binary_search(pred.selected.begin(), pred.selected.end(), i)) {
      rest.push_back(i);
    }
  }
  REQUIRE(rest.size() == 2);
  pair.annotations = AnnotationSet({ThumbnailAnnotation(pred.selected, 8),
                                    ThumbnailAnnotation({rest[0]}, 8),
                                    ThumbnailAnnotation({rest[1]}, 8),
                                    ThumbnailAnnotation(rest, 8)});

  std::vector<LabeledPair> dataset;
  dataset.push_back(std::move(pair));
  const EvalResult max_result = evaluate(m, dataset, EvalAggregation::kMaxOver4);
  CHECK(max_result.f1 == doctest::Approx(1.0));
  CHECK(max_result.iou == doctest::Approx(1.0));
  const EvalResult mean_result = evaluate(m, dataset, EvalAggregation::kMeanOver4);
  CHECK(mean_result.f1 == doctest::Approx(0.25));

  CHECK_THROWS_AS(evaluate(m, {}, EvalAggregation::kMeanOver4), DataError);
}

TEST_CASE("evaluate matches a loop-and-mean oracle") {
  Rng rng(4);
  Model m = toy_model(Variant::kGuidedDvtg, 5, 8);
  std::vector<LabeledPair> dataset = toy_dataset(16, 5, 8, rng);

  const EvalResult got = evaluate(m, dataset, EvalAggregation::kMeanOver4);
  double f1 = 0.0, iou = 0.0;
  for (const LabeledPair& pair : dataset) {
    Rng fwd(0);
    const ThumbnailAnnotation pred = predict_thumbnail(
        forward(m, pair.video, &pair.sentence, false, fwd).scores);
    double pf = 0.0, pi = 0.0;
    for (const auto& ann : pair.annotations.get()) {
      pf += oracle::f1_sets(pred.selected, ann.selected) / 4.0;
      pi += oracle::iou_sets(pred.selected, ann.selected) / 4.0;
    }
    f1 += pf / static_cast<double>(dataset.size());
    iou += pi / static_cast<double>(dataset.size());
  }
  CHECK(got.f1 == doctest::Approx(f1).epsilon(1e-12));
  CHECK(got.iou == doctest::Approx(iou).epsilon(1e-12));
}

TEST_CASE("train: zero epochs returns initial params and empty history") {
  Rng rng(5);
  Model m = toy_model(Variant::kGuidedDvtg, 5, 8);
  const std::vector<double> before = m.params.get("enc.fc7.weight").data();
  std::vector<LabeledPair> dataset = toy_dataset(16, 5, 8, rng);
  TrainHyper hyper;
  hyper.epochs = 0;
  const TrainOutput out = train(m, dataset, nullptr, hyper);
  CHECK(out.history.empty());
  CHECK(m.params.get("enc.fc7.weight").data() == before);
}

TEST_CASE("train: identical seeds give identical histories") {
  Rng rng(6);
  std::vector<LabeledPair> dataset = toy_dataset(16, 5, 8, rng);
  TrainHyper hyper;
  hyper.epochs = 4;
  hyper.seed = 33;

  Model m1 = toy_model(Variant::kGuidedDvtg, 5, 8, 77);
  Model m2 = toy_model(Variant::kGuidedDvtg, 5, 8, 77);
  const TrainOutput o1 = train(m1, dataset, nullptr, hyper);
  const TrainOutput o2 = train(m2, dataset, nullptr, hyper);
  REQUIRE(o1.history.size() == o2.history.size());
  for (std::size_t i = 0; i < o1.history.size(); ++i) {
    CHECK(o1.history[i].loss == o2.history[i].loss);  // bit-identical
  }
  // And the resulting weights agree bit for bit.
  CHECK(m1.params.get("enc.fc7.weight").data() == m2.params.get("enc.fc7.weight").data());
}

TEST_CASE("train: loss trends down on a tiny overfit run") {
  Rng rng(7);
  std::vector<LabeledPair> dataset = toy_dataset(16, 5, 8, rng);
  Model m = toy_model(Variant::kGuidedDvtg, 5, 8, 88);
  TrainHyper hyper;
  hyper.epochs = 60;
  hyper.seed = 1;
  const TrainOutput out = train(m, dataset, nullptr, hyper);
  // Windowed monotone-trend check: the minimum within any 30-epoch window
  // does not exceed the window's start.
  for (std::size_t start = 0; start + 30 <= out.history.size(); start += 30) {
    double min_loss = out.history[start].loss;
    for (std::size_t i = start; i < start + 30; ++i) {
      min_loss = std::min(min_loss, out.history[i].loss);
    }
    CHECK(min_loss <= out.history[start].loss);
  }
  CHECK(out.history.back().loss < out.history.front().loss);
}

TEST_CASE("train: unsupervised variant never touches annotations") {
  Rng rng(8);
  std::vector<LabeledPair> dataset = toy_dataset(16, 5, 8, rng);
  Model m = toy_model(Variant::kGuidedDvtgUnsup, 5, 8);
  TrainHyper hyper;
  hyper.epochs = 3;
  train(m, dataset, nullptr, hyper);
  for (const LabeledPair& pair : dataset) {
    CHECK(pair.annotations.access_count() == 0);  // tripwire
  }

  // The supervised sibling does read them.
  Model sup = toy_model(Variant::kGuidedDvtg, 5, 8);
  train(sup, dataset, nullptr, hyper);
  for (const LabeledPair& pair : dataset) {
    CHECK(pair.annotations.access_count() > 0);
  }
}

TEST_CASE("train: non-finite loss aborts naming epoch and pair") {
  Rng rng(9);
  std::vector<LabeledPair> dataset = toy_dataset(16, 5, 8, rng);
  Model m = toy_model(Variant::kGuidedDvtg, 5, 8);
  Tensor& w = m.params.get("enc.block1.conv0.weight");
  w.data()[0] = std::numeric_limits<double>::quiet_NaN();
  TrainHyper hyper;
  hyper.epochs = 1;
  try {
    train(m, dataset, nullptr, hyper);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("toy") != std::string::npos);
  }
}

TEST_CASE("train: empty dataset is rejected") {
  Model m = toy_model(Variant::kGuidedDvtg, 5, 8);
  TrainHyper hyper;
  hyper.epochs = 1;
  CHECK_THROWS_AS(train(m, {}, nullptr, hyper), DataError);
}

TEST_CASE("validation metrics land in the history at the requested cadence") {
  Rng rng(10);
  std::vector<LabeledPair> dataset = toy_dataset(16, 5, 8, rng);
  std::vector<LabeledPair> val = toy_dataset(16, 5, 8, rng);
  Model m = toy_model(Variant::kGuidedDvtg, 5, 8);
  TrainHyper hyper;
  hyper.epochs = 4;
  hyper.eval_every = 2;
  const TrainOutput out = train(m, dataset, &val, hyper);
  CHECK_FALSE(out.history[0].val_f1.has_value());
  CHECK(out.history[1].val_f1.has_value());
  CHECK_FALSE(out.history[2].val_f1.has_value());
  CHECK(out.history[3].val_f1.has_value());
}

}  // TEST_SUITE
