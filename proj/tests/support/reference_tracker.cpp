#include "support/reference_tracker.hpp"

#include <algorithm>
#include <map>

#include "tiertrack/assignment.hpp"
#include "tiertrack/kalman.hpp"

namespace tiertrack::testing {
namespace {

struct RefTrack {
  int id;
  KalmanState<double> state;
  int misses = 0;
  int hits = 1;
};

}  // namespace

std::vector<TrackRecord> reference_single_tier(std::span<const Detection> detections,
                                               const TrackerConfig& cfg) {
  const double threshold = cfg.tiers.thresholds.at(1);
  std::map<int, std::vector<Detection>> by_frame;
  int last = 0;
  for (const auto& d : detections) {
    by_frame[d.frame].push_back(d);
    last = std::max(last, d.frame);
  }

  std::vector<RefTrack> tracks;
  std::vector<TrackRecord> out;
  int next_id = 1;
  for (int frame = 1; frame <= last; ++frame) {
    std::vector<Detection> kept;
    for (const auto& d : by_frame[frame]) {
      if (d.conf >= threshold) kept.push_back(d);
    }
    std::stable_sort(kept.begin(), kept.end(), [](const Detection& a, const Detection& b) {
      return a.conf != b.conf ? a.conf > b.conf : a.source_index < b.source_index;
    });

    for (auto& t : tracks) t.state = kf_predict(t.state, cfg.noise);

    Eigen::MatrixXd cost(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(tracks.size()));
    for (Eigen::Index i = 0; i < cost.rows(); ++i) {
      for (Eigen::Index j = 0; j < cost.cols(); ++j) {
        const double o = iou(kept[static_cast<std::size_t>(i)].bbox,
                             measurement_to_bbox(tracks[static_cast<std::size_t>(j)].state.mean.head<4>()));
        cost(i, j) = o < cfg.cost.iou_gate ? kForbidden : 1.0 - o;
      }
    }
    const AssignmentResult lap = solve_lap(cost);

    std::vector<TrackRecord> rows;
    std::vector<bool> track_matched(tracks.size(), false);
    for (const auto& [i, j] : lap.matches) {
      RefTrack& t = tracks[static_cast<std::size_t>(j)];
      const Detection& d = kept[static_cast<std::size_t>(i)];
      t.state = kf_update(t.state, bbox_to_measurement(d.bbox), cfg.noise);
      t.misses = 0;
      ++t.hits;
      track_matched[static_cast<std::size_t>(j)] = true;
      if (t.hits >= cfg.lifecycle.min_hits) rows.push_back({frame, t.id, d.bbox, d.conf, std::nullopt});
    }
    for (std::size_t j = 0; j < tracks.size(); ++j) {
      if (!track_matched[j]) ++tracks[j].misses;
    }
    std::erase_if(tracks, [&](const RefTrack& t) { return t.misses > cfg.lifecycle.max_age; });

    std::vector<const Detection*> fresh;
    for (auto i : lap.unmatched_rows) {
      const Detection& d = kept[static_cast<std::size_t>(i)];
      if (d.conf >= cfg.lifecycle.init_threshold) fresh.push_back(&d);
    }
    std::stable_sort(fresh.begin(), fresh.end(),
                     [](const Detection* a, const Detection* b) { return a->source_index < b->source_index; });
    for (const Detection* d : fresh) {
      tracks.push_back({next_id, kf_init(bbox_to_measurement(d->bbox), cfg.noise), 0, 1});
      if (1 >= cfg.lifecycle.min_hits) rows.push_back({frame, next_id, d->bbox, d->conf, std::nullopt});
      ++next_id;
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.track_id < b.track_id; });
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

std::vector<TrackRecord> greedy_single_target(std::span<const Detection> detections) {
  std::vector<TrackRecord> out;
  for (const auto& d : detections) out.push_back({d.frame, 1, d.bbox, d.conf, std::nullopt});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.frame < b.frame; });
  return out;
}

}  // namespace tiertrack::testing
