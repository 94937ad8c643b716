#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tiertrack/assignment.hpp"
#include "tiertrack/geometry.hpp"
#include "tiertrack/kalman.hpp"
#include "tiertrack/records.hpp"

namespace tiertrack {

/// Confidence boundaries 1.0 = t_0 >= t_1 >= ... >= t_n >= 0. Tier m holds
/// t_m <= conf < t_{m-1}; tier 1 is closed at 1.0. A repeated boundary yields
/// an empty tier. Detections below t_n are discarded.
struct TierConfig {
  std::vector<double> thresholds{1.0, 0.6, 0.1};

  std::size_t tier_count() const { return thresholds.size() - 1; }
  void validate() const;
};

struct LifecycleConfig {
  double init_threshold = 0.7;
  int max_age = 30;
  int min_hits = 0;  // matches needed before a track is written out

  void validate(const TierConfig& tiers) const;
};

struct TrackerConfig {
  TierConfig tiers;
  CostConfig cost;
  LifecycleConfig lifecycle;
  NoiseProfile<double> noise;
  bool use_reid = false;  // appearance term on the first tier only
  bool use_ocr = true;
  bool use_oos = true;

  void validate() const;
};

enum class TrackStatus { Active, Lost };

struct Observation {
  int frame = 0;
  Measurement<double> measurement;
  BBoxd box{0, 0, 1, 1};
};

struct Track {
  int id = 0;
  KalmanState<double> state;
  KalmanState<double> state_at_last_observation;  // posterior right after last_observation
  Observation last_observation;
  std::optional<Eigen::VectorXd> embedding;
  std::vector<std::pair<int, Eigen::VectorXd>> logits_history;
  TrackStatus status = TrackStatus::Active;
  int frames_since_update = 0;
  int hit_count = 0;

  BBoxd predicted_box() const { return measurement_to_bbox(state.mean.head<4>()); }
};

struct TierPartition {
  std::vector<std::vector<Detection>> tiers;  // tier 1 first
  std::vector<Detection> discarded;
};

/// Buckets detections by confidence. Each tier is ordered by confidence
/// descending, then source_index ascending.
TierPartition partition_by_confidence(std::span<const Detection> detections, const TierConfig& tiers);

/// Indices into the tracker's track list and into one detection group.
struct Association {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (track, detection)
  std::vector<std::size_t> unmatched_tracks;
  std::vector<std::size_t> unmatched_detections;
};

/// Applies a matched detection to a track: Kalman correction (replayed through
/// the gap when OOS is on and frames were missed), appearance and logit
/// bookkeeping, and the lifecycle counters.
void apply_match(Track& track, const Detection& det, int frame, const TrackerConfig& cfg);

/// One iteration of the tier loop: gated assignment of `candidates` (already
/// predicted this frame) to `detections`, then apply_match on every pair.
Association associate_tier(std::vector<Track>& tracks, std::span<const std::size_t> candidates,
                           std::span<const Detection> detections, const TrackerConfig& cfg,
                           bool use_reid, int frame);

/// Observation-centric recovery: pure-IoU assignment of each candidate's last
/// observed box (not its prediction) against the residual detections.
Association ocr_recover(std::vector<Track>& tracks, std::span<const std::size_t> candidates,
                        std::span<const Detection> residual, const TrackerConfig& cfg, int frame);

struct FrameAssignments {
  std::vector<std::pair<int, Detection>> matched;  // (track id, detection)
  std::vector<int> unmatched_tracks;
  std::vector<Detection> unmatched_detections;
};

/// Spawns tracks from unmatched detections at or above the init threshold (in
/// source order), ages unmatched tracks and drops those past max_age. Returns
/// the rows to emit this frame, sorted by track id.
std::vector<TrackRecord> lifecycle_update(std::vector<Track>& tracks, const FrameAssignments& assign,
                                          const TrackerConfig& cfg, int& next_id, int frame);

struct FrameStats {
  std::vector<std::size_t> association_passes;  // tier index of each pass, in order
  std::size_t ocr_matches = 0;
  std::size_t oos_reruns = 0;
};

/// Stateful single-sequence tracker; frames must arrive in increasing order.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg);

  /// Runs one frame. Throws FrameOrderViolation if `frame` does not increase.
  std::vector<TrackRecord> step(int frame, std::span<const Detection> detections);

  const std::vector<Track>& tracks() const { return tracks_; }
  const FrameAssignments& last_assignments() const { return last_assignments_; }
  const FrameStats& last_stats() const { return last_stats_; }
  const TrackerConfig& config() const { return cfg_; }

 private:
  TrackerConfig cfg_;
  std::vector<Track> tracks_;
  int next_id_ = 1;
  std::optional<int> last_frame_;
  FrameAssignments last_assignments_;
  FrameStats last_stats_;
};

/// Runs frames 1..max frame, including frames without detections. Output is
/// ordered by frame, then track id.
std::vector<TrackRecord> track_sequence(std::span<const Detection> detections, const TrackerConfig& cfg);

}  // namespace tiertrack
