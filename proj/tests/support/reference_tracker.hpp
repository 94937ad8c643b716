#pragma once

#include <span>
#include <vector>

#include "tiertrack/records.hpp"
#include "tiertrack/tracker.hpp"

namespace tiertrack::testing {

/// Plain single-threshold SORT loop written without the tier, recovery or
/// smoothing machinery: predict, gate on 1 - IoU, assign, update, spawn, expire.
/// Uses tiers.thresholds[1] as the only threshold and ignores every feature flag.
std::vector<TrackRecord> reference_single_tier(std::span<const Detection> detections,
                                               const TrackerConfig& cfg);

/// Greedy nearest-box linker for a single target: every detection joins the
/// one track, so it emits id 1 on every frame with a detection.
std::vector<TrackRecord> greedy_single_target(std::span<const Detection> detections);

}  // namespace tiertrack::testing
