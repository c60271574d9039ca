#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "udg/core.hpp"

namespace udg {

// One query's ranked gallery with per-position relevance (gallery label ==
// query label).
struct RankedResult {
  std::uint64_t query_id = 0;
  std::vector<std::uint64_t> gallery_ids;
  std::vector<std::uint8_t> relevant;
};

// A detection ({frame, box, score}) or a ground-truth box ({frame, box,
// identity}).
struct BoxRecord {
  std::uint64_t frame_id = 0;
  Box box;
  double score = 1.0;
  std::optional<int> identity;
};

// Intersection area over union area, in [0, 1].
double iou(const Box& a, const Box& b);

// Greedy matching in descending detection score, frame by frame: each
// detection takes the highest-IoU still-unmatched ground truth of its frame
// with IoU >= threshold. Returns the matched gt index per detection.
std::vector<std::optional<std::size_t>> match_detections(
    const std::vector<BoxRecord>& detections,
    const std::vector<BoxRecord>& ground_truth, double iou_threshold = 0.5);

struct DetectionMetrics {
  double ap = 0.0;
  double recall = 0.0;
};

// Recall plus average precision under all-points interpolation of the
// precision-recall curve over score-sorted detections.
DetectionMetrics detection_ap_recall(const std::vector<BoxRecord>& detections,
                                     const std::vector<BoxRecord>& ground_truth,
                                     double iou_threshold = 0.5);

// Average precision of one ranked list: mean of precision-at-r over the
// ranks r holding a relevant item.
double retrieval_ap(const RankedResult& result);

struct RetrievalMetrics {
  double map = 0.0;
  std::vector<std::pair<int, double>> rank_at;  // (k, rank-k accuracy)
  std::size_t valid_queries = 0;
  std::size_t excluded_queries = 0;  // queries with no positive in gallery
};

// Mean AP over queries that have at least one positive; queries without one
// are excluded and counted. Rank-k is the fraction of valid queries with a
// positive in the top k.
RetrievalMetrics map_and_cmc(const std::vector<RankedResult>& results,
                             const std::vector<int>& ks = {1, 5, 10});

// Person-search style gallery labeling: each detection inherits the identity
// of its matched ground-truth box (IoU >= threshold), if any.
std::vector<std::optional<int>> assign_labels_from_gt(
    const std::vector<BoxRecord>& detections,
    const std::vector<BoxRecord>& ground_truth, double iou_threshold = 0.5);

}  // namespace udg
