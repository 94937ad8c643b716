#pragma once

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "tiertrack/records.hpp"

namespace tiertrack {

/// HOTA localization thresholds 0.05, 0.10, ..., 0.95.
inline constexpr std::size_t kHotaAlphaCount = 19;
std::array<double, kHotaAlphaCount> hota_alphas();

struct SequenceMetrics {
  double mota = 0.0;
  double idf1 = 0.0;
  double hota = 0.0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t id_switches = 0;
  std::size_t gt_count = 0;
  std::size_t pred_count = 0;
  std::size_t matches = 0;

  // Raw tallies that make aggregation across sequences exact.
  std::size_t idtp = 0;
  std::array<double, kHotaAlphaCount> hota_tp{};
  std::array<double, kHotaAlphaCount> hota_fn{};
  std::array<double, kHotaAlphaCount> hota_fp{};
  std::array<double, kHotaAlphaCount> hota_assoc{};  // sum over TPs of the pair's association score
};

/// Evaluable ground truth: not flagged ignore and visibility >= 0.1.
std::vector<GtBox> evaluable_groundtruth(std::span<const GtBox> gt);

/// CLEAR-MOT counts and MOTA. Matches need IoU >= iou_threshold; last frame's
/// pairs are kept when still above threshold before the rest are solved.
/// Throws EmptyGroundTruth.
SequenceMetrics clear_metrics(std::span<const GtBox> gt, std::span<const TrackRecord> pred,
                              double iou_threshold = 0.5);

/// Global one-to-one identity matching maximizing identity true positives.
struct IdentityMatching {
  std::map<int, int> pred_to_gt;  // only pairs with at least one shared frame
  std::size_t idtp = 0;
  std::size_t gt_count = 0;
  std::size_t pred_count = 0;
};

IdentityMatching identity_matching(std::span<const GtBox> gt, std::span<const TrackRecord> pred,
                                   double iou_threshold = 0.5);

/// 2 IDTP / (2 IDTP + IDFP + IDFN). Throws EmptyGroundTruth.
double idf1(std::span<const GtBox> gt, std::span<const TrackRecord> pred, double iou_threshold = 0.5);

/// Mean over the 19 alphas of sqrt(DetA * AssA). Throws EmptyGroundTruth.
double hota(std::span<const GtBox> gt, std::span<const TrackRecord> pred);

/// All of the above for one sequence.
SequenceMetrics evaluate_sequence(std::span<const GtBox> gt, std::span<const TrackRecord> pred,
                                  double iou_threshold = 0.5);

/// Pools raw tallies of several sequences and recomputes the scores.
SequenceMetrics aggregate(std::span<const SequenceMetrics> sequences);

enum class VoteScheme { MajorityVote, LogitSum };

/// Classes ranked best first for a track's logit sequence. Majority vote ranks
/// by vote count, then summed logits, then lower class id; logit sum ranks by
/// the summed logits, then lower class id. Throws EmptyTrack.
std::vector<int> rank_track_classes(std::span<const Eigen::VectorXd> logits, VoteScheme scheme);

int track_based_prediction(std::span<const Eigen::VectorXd> logits, VoteScheme scheme);

/// Classes ranked by a single detection's logits.
std::vector<int> rank_logits(const Eigen::VectorXd& logits);

/// Fraction of items whose truth is among the first k ranked classes.
double topk_accuracy(std::span<const std::vector<int>> ranked, std::span<const int> truth, std::size_t k);

struct ClassificationReport {
  double top1 = 0.0;
  double top3 = 0.0;
  std::size_t items = 0;
  std::map<std::pair<int, int>, std::size_t> confusion;  // (truth, top-1 prediction) -> count
};

ClassificationReport classification_report(std::span<const std::vector<int>> ranked,
                                           std::span<const int> truth);

/// One item per predicted track that is identity-matched to a ground-truth
/// track; the truth is that identity's class. Track rows are tied to the
/// detections (and their logits) by per-frame IoU assignment.
ClassificationReport classify_tracks(std::span<const GtBox> gt, std::span<const TrackRecord> tracks,
                                     std::span<const Detection> detections, VoteScheme scheme,
                                     double iou_threshold = 0.5);

/// One item per detection with logits that matches a ground-truth box.
ClassificationReport classify_images(std::span<const GtBox> gt, std::span<const Detection> detections,
                                     double iou_threshold = 0.5);

}  // namespace tiertrack
