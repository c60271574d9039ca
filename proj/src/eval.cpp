#include "udg/eval.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace udg {

double iou(const Box& a, const Box& b) {
  if (!a.valid() || !b.valid()) {
    throw BoxError("iou: degenerate box");
  }
  const double ix1 = std::max(a.x1, b.x1);
  const double iy1 = std::max(a.y1, b.y1);
  const double ix2 = std::min(a.x2, b.x2);
  const double iy2 = std::min(a.y2, b.y2);
  const double iw = ix2 - ix1;
  const double ih = iy2 - iy1;
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

std::vector<std::optional<std::size_t>> match_detections(
    const std::vector<BoxRecord>& detections,
    const std::vector<BoxRecord>& ground_truth, double iou_threshold) {
  // Detections in descending score (ties keep input order); gts grouped by
  // frame.
  std::vector<std::size_t> det_order(detections.size());
  std::iota(det_order.begin(), det_order.end(), 0);
  std::stable_sort(det_order.begin(), det_order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return detections[a].score > detections[b].score;
                   });

  std::map<std::uint64_t, std::vector<std::size_t>> gts_by_frame;
  for (std::size_t g = 0; g < ground_truth.size(); ++g) {
    gts_by_frame[ground_truth[g].frame_id].push_back(g);
  }

  std::vector<std::optional<std::size_t>> matches(detections.size());
  std::vector<std::uint8_t> gt_taken(ground_truth.size(), 0);
  for (std::size_t d : det_order) {
    auto it = gts_by_frame.find(detections[d].frame_id);
    if (it == gts_by_frame.end()) continue;
    double best_iou = 0.0;
    std::optional<std::size_t> best_gt;
    for (std::size_t g : it->second) {
      if (gt_taken[g]) continue;
      const double overlap = iou(detections[d].box, ground_truth[g].box);
      if (overlap >= iou_threshold && overlap > best_iou) {
        best_iou = overlap;
        best_gt = g;
      }
    }
    if (best_gt) {
      gt_taken[*best_gt] = 1;
      matches[d] = best_gt;
    }
  }
  return matches;
}

DetectionMetrics detection_ap_recall(const std::vector<BoxRecord>& detections,
                                     const std::vector<BoxRecord>& ground_truth,
                                     double iou_threshold) {
  if (ground_truth.empty()) {
    throw EmptySetError("detection_ap_recall: no ground-truth boxes");
  }
  const auto matches = match_detections(detections, ground_truth,
                                        iou_threshold);

  std::vector<std::size_t> det_order(detections.size());
  std::iota(det_order.begin(), det_order.end(), 0);
  std::stable_sort(det_order.begin(), det_order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return detections[a].score > detections[b].score;
                   });

  const double n_gt = static_cast<double>(ground_truth.size());
  std::size_t tp = 0;
  std::vector<double> precisions, recalls;
  precisions.reserve(detections.size());
  recalls.reserve(detections.size());
  for (std::size_t rank = 0; rank < det_order.size(); ++rank) {
    if (matches[det_order[rank]]) ++tp;
    precisions.push_back(static_cast<double>(tp) /
                         static_cast<double>(rank + 1));
    recalls.push_back(static_cast<double>(tp) / n_gt);
  }

  DetectionMetrics metrics;
  metrics.recall = detections.empty() ? 0.0 : recalls.back();

  // All-points interpolation: running max of precision from the right, then
  // sum precision * recall increment.
  double running_max = 0.0;
  double prev_recall = 0.0;
  std::vector<double> envelope(precisions.size());
  for (std::size_t i = precisions.size(); i-- > 0;) {
    running_max = std::max(running_max, precisions[i]);
    envelope[i] = running_max;
  }
  for (std::size_t i = 0; i < envelope.size(); ++i) {
    metrics.ap += envelope[i] * (recalls[i] - prev_recall);
    prev_recall = recalls[i];
  }
  return metrics;
}

double retrieval_ap(const RankedResult& result) {
  if (result.relevant.size() != result.gallery_ids.size()) {
    throw DimensionError("retrieval_ap: flag/id length mismatch");
  }
  std::size_t positives = 0;
  double sum = 0.0;
  for (std::size_t rank = 0; rank < result.relevant.size(); ++rank) {
    if (!result.relevant[rank]) continue;
    ++positives;
    sum += static_cast<double>(positives) / static_cast<double>(rank + 1);
  }
  if (positives == 0) {
    throw NoPositiveError("retrieval_ap: query " +
                          std::to_string(result.query_id) +
                          " has no positive gallery sample");
  }
  return sum / static_cast<double>(positives);
}

RetrievalMetrics map_and_cmc(const std::vector<RankedResult>& results,
                             const std::vector<int>& ks) {
  RetrievalMetrics metrics;
  std::vector<double> hits(ks.size(), 0.0);
  double ap_sum = 0.0;
  for (const auto& result : results) {
    const bool has_positive =
        std::find(result.relevant.begin(), result.relevant.end(),
                  std::uint8_t{1}) != result.relevant.end();
    if (!has_positive) {
      ++metrics.excluded_queries;
      continue;
    }
    ++metrics.valid_queries;
    ap_sum += retrieval_ap(result);

    std::size_t first_hit = result.relevant.size();
    for (std::size_t rank = 0; rank < result.relevant.size(); ++rank) {
      if (result.relevant[rank]) {
        first_hit = rank;
        break;
      }
    }
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (first_hit < static_cast<std::size_t>(ks[i])) hits[i] += 1.0;
    }
  }
  if (metrics.valid_queries == 0) {
    throw EmptySetError("map_and_cmc: no query has a positive");
  }
  metrics.map = ap_sum / static_cast<double>(metrics.valid_queries);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    metrics.rank_at.emplace_back(
        ks[i], hits[i] / static_cast<double>(metrics.valid_queries));
  }
  return metrics;
}

std::vector<std::optional<int>> assign_labels_from_gt(
    const std::vector<BoxRecord>& detections,
    const std::vector<BoxRecord>& ground_truth, double iou_threshold) {
  const auto matches = match_detections(detections, ground_truth,
                                        iou_threshold);
  std::vector<std::optional<int>> labels(detections.size());
  for (std::size_t d = 0; d < detections.size(); ++d) {
    if (matches[d]) labels[d] = ground_truth[*matches[d]].identity;
  }
  return labels;
}

}  // namespace udg
