#include "dvtg/metrics.hpp"

#include <algorithm>

#include "dvtg/errors.hpp"

namespace dvtg {

ThumbnailAnnotation::ThumbnailAnnotation(std::vector<int> indices, int clips)
    : selected(std::move(indices)), clip_count(clips) {
  std::sort(selected.begin(), selected.end());
  if (std::adjacent_find(selected.begin(), selected.end()) != selected.end()) {
    throw DataError("annotation contains duplicate clip indices");
  }
  if (selected.empty()) {
    throw DataError("annotation must select at least one clip");
  }
  if (selected.front() < 0 || selected.back() >= clip_count) {
    throw DataError("annotation index " +
                    std::to_string(selected.front() < 0 ? selected.front()
                                                        : selected.back()) +
                    " out of range for " + std::to_string(clip_count) + " clips");
  }
}

namespace {

int intersection_size(const std::vector<int>& a, const std::vector<int>& b) {
  // Both sorted.
  int n = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++n;
      ++ia;
      ++ib;
    }
  }
  return n;
}

void require_same_clip_count(const ThumbnailAnnotation& a,
                             const ThumbnailAnnotation& b) {
  if (a.clip_count != b.clip_count) {
    throw DataError("annotations refer to different clip counts: " +
                    std::to_string(a.clip_count) + " vs " +
                    std::to_string(b.clip_count));
  }
}

}  // namespace

double f1_score(const ThumbnailAnnotation& pred, const ThumbnailAnnotation& gt) {
  require_same_clip_count(pred, gt);
  if (pred.selected.empty() || gt.selected.empty()) return 0.0;
  const int inter = intersection_size(pred.selected, gt.selected);
  // 2PR/(P+R) reduced to one integer ratio; keeps F1 = 2*IoU/(1+IoU) exact.
  return 2.0 * inter /
         static_cast<double>(pred.selected.size() + gt.selected.size());
}

double iou_score(const ThumbnailAnnotation& pred, const ThumbnailAnnotation& gt) {
  require_same_clip_count(pred, gt);
  const int inter = intersection_size(pred.selected, gt.selected);
  const int uni = static_cast<int>(pred.selected.size() + gt.selected.size()) - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

const ThumbnailAnnotation& select_consistent_gt(
    const std::array<ThumbnailAnnotation, 4>& annotations) {
  double best = -1.0;
  std::size_t best_idx = 0;
  for (std::size_t k = 0; k < annotations.size(); ++k) {
    double mean = 0.0;
    for (std::size_t j = 0; j < annotations.size(); ++j) {
      if (j == k) continue;
      mean += f1_score(annotations[k], annotations[j]);
    }
    mean /= 3.0;
    if (mean > best) {  // strict: ties keep the lowest index
      best = mean;
      best_idx = k;
    }
  }
  return annotations[best_idx];
}

}  // namespace dvtg
