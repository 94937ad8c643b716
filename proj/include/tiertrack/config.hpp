#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tiertrack/tracker.hpp"

namespace tiertrack {

/// Flat `dotted.key = value` file. Blank lines and `#` comments are skipped.
struct KeyValueFile {
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };
  std::map<std::string, Entry> entries;
};

/// Throws ConfigInvalid on syntax errors or repeated keys.
KeyValueFile parse_key_values(std::istream& in);

/// Keys: tiers.thresholds, cost.{lambda_iou,lambda_reid,iou_gate,embedding_momentum},
/// lifecycle.{init_threshold,max_age,min_hits}, motion.{position_weight,velocity_weight},
/// features.{reid,ocr,oos}. Missing keys keep their defaults; unknown keys and
/// values violating any module invariant throw ConfigInvalid.
TrackerConfig load_tracker_config(std::istream& in);
TrackerConfig load_tracker_config(const std::filesystem::path& path);

std::string format_tracker_config(const TrackerConfig& cfg);

namespace config_detail {

double as_double(const std::string& key, const KeyValueFile::Entry& e);
long long as_int(const std::string& key, const KeyValueFile::Entry& e);
bool as_bool(const std::string& key, const KeyValueFile::Entry& e);
std::vector<double> as_double_list(const std::string& key, const KeyValueFile::Entry& e);

}  // namespace config_detail

}  // namespace tiertrack
