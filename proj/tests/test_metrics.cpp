#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "dvtg/errors.hpp"
#include "dvtg/metrics.hpp"
#include "dvtg/rng.hpp"
#include "oracles.hpp"

using namespace dvtg;

namespace {

ThumbnailAnnotation random_annotation(int clips, Rng& rng) {
  const int size = 1 + static_cast<int>(rng.uniform_int(5));
  std::vector<int> pool(static_cast<std::size_t>(clips));
  for (int i = 0; i < clips; ++i) pool[static_cast<std::size_t>(i)] = i;
  rng.shuffle(pool);
  pool.resize(static_cast<std::size_t>(std::min(size, clips)));
  return ThumbnailAnnotation(pool, clips);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("f1 basics") {
  const ThumbnailAnnotation a({0, 1}, 10);
  CHECK(f1_score(a, a) == 1.0);
  CHECK(f1_score(ThumbnailAnnotation({0}, 10), ThumbnailAnnotation({0, 1}, 10)) ==
        doctest::Approx(2.0 / 3.0));
  CHECK(f1_score(ThumbnailAnnotation({5}, 10), ThumbnailAnnotation({0, 1}, 10)) == 0.0);
  CHECK_THROWS_AS(f1_score(a, ThumbnailAnnotation({0}, 8)), DataError);
}

TEST_CASE("iou basics") {
  const ThumbnailAnnotation a({0, 1}, 10);
  CHECK(iou_score(a, a) == 1.0);
  CHECK(iou_score(ThumbnailAnnotation({0}, 10), a) == doctest::Approx(0.5));
  CHECK(iou_score(ThumbnailAnnotation({7}, 10), a) == 0.0);
}

TEST_CASE("metrics match the set oracle on 1000 random pairs") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int clips = 4 + static_cast<int>(rng.uniform_int(28));
    const ThumbnailAnnotation pred = random_annotation(clips, rng);
    const ThumbnailAnnotation gt = random_annotation(clips, rng);
    CHECK(f1_score(pred, gt) == oracle::f1_sets(pred.selected, gt.selected));
    CHECK(iou_score(pred, gt) == oracle::iou_sets(pred.selected, gt.selected));
  }
}

TEST_CASE("f1 and iou are symmetric and obey F1 = 2*IoU/(1+IoU)") {
  Rng rng(55);
  for (int trial = 0; trial < 1000; ++trial) {
    const int clips = 4 + static_cast<int>(rng.uniform_int(28));
    const ThumbnailAnnotation a = random_annotation(clips, rng);
    const ThumbnailAnnotation b = random_annotation(clips, rng);
    CHECK(f1_score(a, b) == f1_score(b, a));
    CHECK(iou_score(a, b) == iou_score(b, a));

    const double f1 = f1_score(a, b);
    const double iou = iou_score(a, b);
    CHECK(0.0 <= iou);
    CHECK(iou <= f1);
    CHECK(f1 <= 1.0);
    // F1 = 2*IoU/(1+IoU) is exact in the integers behind both ratios:
    // |A|+|B| == |A∪B|+|A∩B|, hence 2i/(p+g) == 2(i/u)/(1+i/u).
    std::set<int> sa(a.selected.begin(), a.selected.end());
    std::set<int> sb(b.selected.begin(), b.selected.end());
    std::vector<int> inter, uni;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                          std::back_inserter(inter));
    std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(),
                   std::back_inserter(uni));
    CHECK(uni.size() + inter.size() == sa.size() + sb.size());
    CHECK(f1 == 2.0 * static_cast<double>(inter.size()) /
                    static_cast<double>(sa.size() + sb.size()));
    CHECK(iou == (uni.empty() ? 0.0
                              : static_cast<double>(inter.size()) /
                                    static_cast<double>(uni.size())));
    CHECK(f1 == doctest::Approx(2.0 * iou / (1.0 + iou)).epsilon(1e-15));
  }
}

TEST_CASE("select_consistent_gt basics") {
  const ThumbnailAnnotation same({0, 1}, 10);
  std::array<ThumbnailAnnotation, 4> identical{same, same, same, same};
  CHECK(&select_consistent_gt(identical) == &identical[0]);  // tie -> lowest index

  std::array<ThumbnailAnnotation, 4> outlier{
      ThumbnailAnnotation({0, 1}, 10), ThumbnailAnnotation({0, 1}, 10),
      ThumbnailAnnotation({0, 1}, 10), ThumbnailAnnotation({5}, 10)};
  CHECK(select_consistent_gt(outlier).selected == std::vector<int>{0, 1});
}

TEST_CASE("select_consistent_gt matches the exhaustive pairwise oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const int clips = 6 + static_cast<int>(rng.uniform_int(20));
    std::array<ThumbnailAnnotation, 4> anns{
        random_annotation(clips, rng), random_annotation(clips, rng),
        random_annotation(clips, rng), random_annotation(clips, rng)};

    double best = -1.0;
    std::size_t best_idx = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      double mean = 0.0;
      for (std::size_t j = 0; j < 4; ++j) {
        if (j != k) mean += oracle::f1_sets(anns[k].selected, anns[j].selected);
      }
      mean /= 3.0;
      if (mean > best) {
        best = mean;
        best_idx = k;
      }
    }
    CHECK(&select_consistent_gt(anns) == &anns[best_idx]);
  }
}

TEST_CASE("select_consistent_gt is invariant to reordering the others") {
  Rng rng(7);
  auto mean_f1 = [](const ThumbnailAnnotation& cand,
                    const std::array<ThumbnailAnnotation, 4>& all) {
    std::vector<double> scores;
    for (const auto& other : all) {
      if (&other != &cand) scores.push_back(f1_score(cand, other));
    }
    std::sort(scores.begin(), scores.end());  // order-independent summation
    double total = 0.0;
    for (double s : scores) total += s;
    return total / static_cast<double>(scores.size());
  };

  for (int trial = 0; trial < 100; ++trial) {
    const int clips = 12;
    std::array<ThumbnailAnnotation, 4> anns{
        random_annotation(clips, rng), random_annotation(clips, rng),
        random_annotation(clips, rng), random_annotation(clips, rng)};
    const double chosen_score = mean_f1(select_consistent_gt(anns), anns);

    std::array<ThumbnailAnnotation, 4> swapped{anns[0], anns[2], anns[3], anns[1]};
    const double swapped_score = mean_f1(select_consistent_gt(swapped), swapped);
    // Consistency scores do not depend on ordering, so the winning score
    // cannot either (ties may pick a different but equally consistent set).
    CHECK(chosen_score == swapped_score);
    for (const auto& cand : swapped) {
      CHECK(mean_f1(cand, swapped) <= swapped_score);
    }
  }
}

TEST_CASE("annotation validation") {
  CHECK_THROWS_AS(ThumbnailAnnotation({0, 0}, 4), DataError);
  CHECK_THROWS_AS(ThumbnailAnnotation({}, 4), DataError);
  CHECK_THROWS_AS(ThumbnailAnnotation({4}, 4), DataError);
  CHECK_THROWS_AS(ThumbnailAnnotation({-1}, 4), DataError);
  const ThumbnailAnnotation ok({3, 1}, 4);
  CHECK(ok.selected == std::vector<int>{1, 3});  // sorted on construction
}

}  // TEST_SUITE
