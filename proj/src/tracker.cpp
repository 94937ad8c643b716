#include "tiertrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>

#include "tiertrack/error.hpp"

namespace tiertrack {

void TierConfig::validate() const {
  if (thresholds.size() < 2) throw ConfigInvalid("tiers.thresholds needs at least two boundaries");
  if (thresholds.front() != 1.0) throw ConfigInvalid("tiers.thresholds must start at 1.0");
  for (std::size_t m = 1; m < thresholds.size(); ++m) {
    if (!std::isfinite(thresholds[m]) || thresholds[m] > thresholds[m - 1]) {
      throw ConfigInvalid("tiers.thresholds must be non-increasing");
    }
  }
  if (thresholds.back() < 0.0) throw ConfigInvalid("tiers.thresholds must stay within [0,1]");
}

void LifecycleConfig::validate(const TierConfig& tiers) const {
  if (!(init_threshold >= 0.0 && init_threshold <= 1.0)) {
    throw ConfigInvalid("lifecycle.init_threshold must lie in [0,1]");
  }
  if (init_threshold < tiers.thresholds.back()) {
    throw ConfigInvalid("lifecycle.init_threshold must not be below the lowest tier boundary");
  }
  if (max_age <= 0) throw ConfigInvalid("lifecycle.max_age must be positive");
  if (min_hits < 0) throw ConfigInvalid("lifecycle.min_hits must be non-negative");
}

void TrackerConfig::validate() const {
  tiers.validate();
  cost.validate();
  lifecycle.validate(tiers);
  if (!(noise.position_weight > 0.0) || !(noise.velocity_weight > 0.0)) {
    throw ConfigInvalid("motion noise weights must be positive");
  }
}

TierPartition partition_by_confidence(std::span<const Detection> detections, const TierConfig& tiers) {
  const auto& t = tiers.thresholds;
  TierPartition out;
  out.tiers.resize(tiers.tier_count());
  for (const auto& d : detections) {
    if (d.conf < t.back()) {
      out.discarded.push_back(d);
      continue;
    }
    std::size_t m = 1;
    while (d.conf < t[m]) ++m;
    out.tiers[m - 1].push_back(d);
  }
  for (auto& group : out.tiers) {
    std::stable_sort(group.begin(), group.end(), [](const Detection& a, const Detection& b) {
      return a.conf != b.conf ? a.conf > b.conf : a.source_index < b.source_index;
    });
  }
  return out;
}

namespace {

bool apply_match_impl(Track& track, const Detection& det, int frame, const TrackerConfig& cfg) {
  const Measurement<double> z = bbox_to_measurement(det.bbox);
  const Observation& last = track.last_observation;
  bool replayed = false;
  if (cfg.use_oos && frame - last.frame > 1) {
    track.state = oos_rerun(track.state_at_last_observation, last.measurement, last.frame, z, frame,
                            cfg.noise);
    replayed = true;
  } else {
    track.state = kf_update(track.state, z, cfg.noise);
  }
  track.state_at_last_observation = track.state;
  track.last_observation = Observation{frame, z, det.bbox};

  if (det.embedding) {
    if (track.embedding && track.embedding->size() == det.embedding->size()) {
      const double m = cfg.cost.embedding_momentum;
      Eigen::VectorXd blended = m * *track.embedding + (1.0 - m) * *det.embedding;
      const double norm = blended.norm();
      track.embedding = norm > 0.0 ? Eigen::VectorXd(blended / norm) : *det.embedding;
    } else {
      track.embedding = *det.embedding;
    }
  }
  if (det.logits) track.logits_history.emplace_back(frame, *det.logits);
  track.frames_since_update = 0;
  track.status = TrackStatus::Active;
  ++track.hit_count;
  return replayed;
}

Association assign_and_apply(std::vector<Track>& tracks, std::span<const std::size_t> candidates,
                             std::span<const Detection> detections, const Eigen::MatrixXd& cost,
                             const TrackerConfig& cfg, int frame, std::size_t* oos_reruns) {
  const AssignmentResult lap = solve_lap(cost);
  Association out;
  for (const auto& [row, col] : lap.matches) {
    const auto d = static_cast<std::size_t>(row);
    const std::size_t t = candidates[static_cast<std::size_t>(col)];
    out.matches.emplace_back(t, d);
  }
  // Apply in track order so results do not depend on detection order.
  std::sort(out.matches.begin(), out.matches.end());
  for (const auto& [t, d] : out.matches) {
    if (apply_match_impl(tracks[t], detections[d], frame, cfg) && oos_reruns) ++*oos_reruns;
  }
  for (auto col : lap.unmatched_columns) out.unmatched_tracks.push_back(candidates[static_cast<std::size_t>(col)]);
  for (auto row : lap.unmatched_rows) out.unmatched_detections.push_back(static_cast<std::size_t>(row));
  return out;
}

Association associate_tier_impl(std::vector<Track>& tracks, std::span<const std::size_t> candidates,
                                std::span<const Detection> detections, const TrackerConfig& cfg,
                                bool use_reid, int frame, std::size_t* oos_reruns) {
  std::vector<TrackCue> cues;
  cues.reserve(candidates.size());
  for (auto t : candidates) {
    const Track& tr = tracks[t];
    cues.push_back({tr.predicted_box(), tr.embedding ? &*tr.embedding : nullptr});
  }
  const Eigen::MatrixXd cost = fused_cost_matrix(detections, cues, cfg.cost, use_reid);
  return assign_and_apply(tracks, candidates, detections, cost, cfg, frame, oos_reruns);
}

Association ocr_recover_impl(std::vector<Track>& tracks, std::span<const std::size_t> candidates,
                             std::span<const Detection> residual, const TrackerConfig& cfg, int frame,
                             std::size_t* oos_reruns) {
  std::vector<TrackCue> cues;
  cues.reserve(candidates.size());
  for (auto t : candidates) cues.push_back({tracks[t].last_observation.box, nullptr});
  const Eigen::MatrixXd cost = fused_cost_matrix(residual, cues, cfg.cost, false);
  return assign_and_apply(tracks, candidates, residual, cost, cfg, frame, oos_reruns);
}

Track spawn_track(const Detection& det, int id, int frame, const TrackerConfig& cfg) {
  Track t;
  t.id = id;
  const Measurement<double> z = bbox_to_measurement(det.bbox);
  t.state = kf_init(z, cfg.noise);
  t.state_at_last_observation = t.state;
  t.last_observation = Observation{frame, z, det.bbox};
  t.embedding = det.embedding;
  if (det.logits) t.logits_history.emplace_back(frame, *det.logits);
  t.status = TrackStatus::Active;
  t.frames_since_update = 0;
  t.hit_count = 1;
  return t;
}

}  // namespace

void apply_match(Track& track, const Detection& det, int frame, const TrackerConfig& cfg) {
  apply_match_impl(track, det, frame, cfg);
}

Association associate_tier(std::vector<Track>& tracks, std::span<const std::size_t> candidates,
                           std::span<const Detection> detections, const TrackerConfig& cfg,
                           bool use_reid, int frame) {
  return associate_tier_impl(tracks, candidates, detections, cfg, use_reid, frame, nullptr);
}

Association ocr_recover(std::vector<Track>& tracks, std::span<const std::size_t> candidates,
                        std::span<const Detection> residual, const TrackerConfig& cfg, int frame) {
  return ocr_recover_impl(tracks, candidates, residual, cfg, frame, nullptr);
}

std::vector<TrackRecord> lifecycle_update(std::vector<Track>& tracks, const FrameAssignments& assign,
                                          const TrackerConfig& cfg, int& next_id, int frame) {
  std::unordered_map<int, std::size_t> index_of;
  for (std::size_t i = 0; i < tracks.size(); ++i) index_of.emplace(tracks[i].id, i);

  std::vector<TrackRecord> rows;
  for (const auto& [id, det] : assign.matched) {
    const Track& t = tracks.at(index_of.at(id));
    if (t.hit_count >= cfg.lifecycle.min_hits) rows.push_back({frame, id, det.bbox, det.conf, std::nullopt});
  }
  for (int id : assign.unmatched_tracks) {
    Track& t = tracks.at(index_of.at(id));
    ++t.frames_since_update;
    t.status = TrackStatus::Lost;
  }
  std::erase_if(tracks, [&](const Track& t) { return t.frames_since_update > cfg.lifecycle.max_age; });

  std::vector<const Detection*> spawn;
  for (const auto& d : assign.unmatched_detections) {
    if (d.conf >= cfg.lifecycle.init_threshold) spawn.push_back(&d);
  }
  std::stable_sort(spawn.begin(), spawn.end(),
                   [](const Detection* a, const Detection* b) { return a->source_index < b->source_index; });
  for (const Detection* d : spawn) {
    tracks.push_back(spawn_track(*d, next_id++, frame, cfg));
    if (tracks.back().hit_count >= cfg.lifecycle.min_hits) {
      rows.push_back({frame, tracks.back().id, d->bbox, d->conf, std::nullopt});
    }
  }
  std::sort(rows.begin(), rows.end(),
            [](const TrackRecord& a, const TrackRecord& b) { return a.track_id < b.track_id; });
  return rows;
}

Tracker::Tracker(TrackerConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::vector<TrackRecord> Tracker::step(int frame, std::span<const Detection> detections) {
  if (last_frame_ && frame <= *last_frame_) {
    throw FrameOrderViolation("frame " + std::to_string(frame) + " does not follow frame " +
                              std::to_string(*last_frame_));
  }
  for (const auto& d : detections) {
    if (d.frame != frame) {
      throw Error("detection for frame " + std::to_string(d.frame) + " passed to frame " +
                  std::to_string(frame));
    }
  }
  last_frame_ = frame;
  last_stats_ = FrameStats{};

  // Step 1: predict every track, lost ones included.
  for (auto& t : tracks_) t.state = kf_predict(t.state, cfg_.noise);

  TierPartition partition = partition_by_confidence(detections, cfg_.tiers);

  // Step 2: tier loop, high confidence first. Re-ID only on the first tier.
  std::vector<std::size_t> candidates(tracks_.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = i;
  std::vector<std::pair<std::size_t, Detection>> matched;
  std::vector<Detection> residual;
  for (std::size_t m = 0; m < partition.tiers.size(); ++m) {
    const auto& group = partition.tiers[m];
    const Association a = associate_tier_impl(tracks_, candidates, group, cfg_, cfg_.use_reid && m == 0,
                                              frame, &last_stats_.oos_reruns);
    last_stats_.association_passes.push_back(m + 1);
    for (const auto& [t, d] : a.matches) matched.emplace_back(t, group[d]);
    for (auto d : a.unmatched_detections) residual.push_back(group[d]);
    candidates = a.unmatched_tracks;
  }

  // Step 3 (with step 4 inside apply_match): recovery from last observations.
  if (cfg_.use_ocr && !candidates.empty() && !residual.empty()) {
    const Association a = ocr_recover_impl(tracks_, candidates, residual, cfg_, frame,
                                           &last_stats_.oos_reruns);
    last_stats_.ocr_matches = a.matches.size();
    for (const auto& [t, d] : a.matches) matched.emplace_back(t, residual[d]);
    std::vector<Detection> left;
    for (auto d : a.unmatched_detections) left.push_back(residual[d]);
    residual = std::move(left);
    candidates = a.unmatched_tracks;
  }

  FrameAssignments assign;
  for (auto& [t, d] : matched) assign.matched.emplace_back(tracks_[t].id, std::move(d));
  for (auto t : candidates) assign.unmatched_tracks.push_back(tracks_[t].id);
  assign.unmatched_detections = std::move(residual);
  for (auto& d : partition.discarded) assign.unmatched_detections.push_back(std::move(d));

  // Step 5: births and deaths.
  auto rows = lifecycle_update(tracks_, assign, cfg_, next_id_, frame);
  last_assignments_ = std::move(assign);
  return rows;
}

std::vector<TrackRecord> track_sequence(std::span<const Detection> detections, const TrackerConfig& cfg) {
  std::map<int, std::vector<Detection>> by_frame;
  int last = 0;
  for (const auto& d : detections) {
    by_frame[d.frame].push_back(d);
    last = std::max(last, d.frame);
  }
  Tracker tracker(cfg);
  std::vector<TrackRecord> out;
  const std::vector<Detection> none;
  for (int frame = 1; frame <= last; ++frame) {
    const auto it = by_frame.find(frame);
    auto rows = tracker.step(frame, it == by_frame.end() ? none : it->second);
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

}  // namespace tiertrack
