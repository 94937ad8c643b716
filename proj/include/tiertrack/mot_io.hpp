#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tiertrack/records.hpp"

namespace tiertrack {

enum class MotKind { Detection, GroundTruth, Result };

using MotRecord = std::variant<Detection, GtBox, TrackRecord>;

/// Parses one comma-separated MOT-Challenge row.
///   detection:   frame,-1,left,top,w,h,conf,-1,-1,-1
///   groundtruth: frame,id,left,top,w,h,flag,class,visibility
///   result:      frame,id,left,top,w,h,conf,-1,-1,-1
/// Throws MalformedLine carrying `line_number`.
MotRecord parse_mot_line(std::string_view line, MotKind kind, std::size_t line_number = 1);

std::vector<Detection> read_mot_detections(std::istream& in);
std::vector<GtBox> read_mot_groundtruth(std::istream& in);
std::vector<TrackRecord> read_mot_results(std::istream& in);

/// One object per line: {"frame", "bbox":[l,t,w,h], "conf", "embedding"?, "logits"?}.
/// Output is sorted by (frame, source_index). Embedding and logit lengths must
/// agree across the stream (DimensionMismatch otherwise).
std::vector<Detection> parse_jsonl_detections(std::istream& in);

/// Result-kind MOT row, geometry at 2 decimals and confidence at 4, no newline.
std::string write_track_line(const TrackRecord& r);

std::string write_groundtruth_line(const GtBox& g);

/// JSON object with the same fields as parse_jsonl_detections reads.
std::string write_detection_json(const Detection& d);

/// Writes to `path` through a temporary sibling and a rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace tiertrack
