#pragma once

#include <array>
#include <vector>

namespace dvtg {

// A thumbnail: sorted unique clip indices into a video of clip_count clips.
struct ThumbnailAnnotation {
  std::vector<int> selected;
  int clip_count = 0;

  ThumbnailAnnotation() = default;
  ThumbnailAnnotation(std::vector<int> indices, int clip_count);

  bool operator==(const ThumbnailAnnotation&) const = default;
};

// Set-F1 of two clip selections: harmonic mean of precision and recall.
// Empty prediction scores 0.
double f1_score(const ThumbnailAnnotation& pred, const ThumbnailAnnotation& gt);

// Intersection over union of the clip sets; 0 when the union is empty.
double iou_score(const ThumbnailAnnotation& pred, const ThumbnailAnnotation& gt);

// The annotation with the highest mean F1 against the other three; ties go to
// the lowest index.
const ThumbnailAnnotation& select_consistent_gt(
    const std::array<ThumbnailAnnotation, 4>& annotations);

}  // namespace dvtg
