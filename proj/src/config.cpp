#include "tiertrack/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "tiertrack/error.hpp"

namespace tiertrack {
namespace {

std::string trimmed(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const KeyValueFile::Entry& e, const char* expected) {
  throw ConfigInvalid("line " + std::to_string(e.line) + ": '" + key + "' expects " + expected +
                      ", got '" + e.value + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

namespace config_detail {

double as_double(const std::string& key, const KeyValueFile::Entry& e) {
  double v = 0.0;
  const auto* end = e.value.data() + e.value.size();
  const auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
  if (e.value.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) bad_value(key, e, "a number");
  return v;
}

long long as_int(const std::string& key, const KeyValueFile::Entry& e) {
  long long v = 0;
  const auto* end = e.value.data() + e.value.size();
  const auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
  if (e.value.empty() || ec != std::errc() || ptr != end) bad_value(key, e, "an integer");
  return v;
}

bool as_bool(const std::string& key, const KeyValueFile::Entry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "on") return true;
  if (e.value == "false" || e.value == "0" || e.value == "off") return false;
  bad_value(key, e, "true or false");
}

std::vector<double> as_double_list(const std::string& key, const KeyValueFile::Entry& e) {
  std::vector<double> out;
  std::stringstream ss(e.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(as_double(key, KeyValueFile::Entry{trimmed(item), e.line}));
  }
  if (out.empty()) bad_value(key, e, "a comma-separated list of numbers");
  return out;
}

}  // namespace config_detail

KeyValueFile parse_key_values(std::istream& in) {
  KeyValueFile kv;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trimmed(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigInvalid("line " + std::to_string(line) + ": expected key = value");
    std::string key = trimmed(text.substr(0, eq));
    std::string value = trimmed(text.substr(eq + 1));
    if (key.empty()) throw ConfigInvalid("line " + std::to_string(line) + ": empty key");
    if (!kv.entries.emplace(key, KeyValueFile::Entry{value, line}).second) {
      throw ConfigInvalid("line " + std::to_string(line) + ": repeated key '" + key + "'");
    }
  }
  return kv;
}

TrackerConfig load_tracker_config(std::istream& in) {
  using namespace config_detail;
  using Entry = KeyValueFile::Entry;
  const KeyValueFile kv = parse_key_values(in);
  TrackerConfig cfg;

  const auto to_int = [](const std::string& k, const Entry& e) {
    const long long v = as_int(k, e);
    if (v < -1000000000LL || v > 1000000000LL) bad_value(k, e, "an integer in range");
    return static_cast<int>(v);
  };
  const std::map<std::string, std::function<void(const std::string&, const Entry&)>> setters = {
      {"tiers.thresholds", [&](auto& k, auto& e) { cfg.tiers.thresholds = as_double_list(k, e); }},
      {"cost.lambda_iou", [&](auto& k, auto& e) { cfg.cost.lambda_iou = as_double(k, e); }},
      {"cost.lambda_reid", [&](auto& k, auto& e) { cfg.cost.lambda_reid = as_double(k, e); }},
      {"cost.iou_gate", [&](auto& k, auto& e) { cfg.cost.iou_gate = as_double(k, e); }},
      {"cost.embedding_momentum", [&](auto& k, auto& e) { cfg.cost.embedding_momentum = as_double(k, e); }},
      {"lifecycle.init_threshold", [&](auto& k, auto& e) { cfg.lifecycle.init_threshold = as_double(k, e); }},
      {"lifecycle.max_age", [&](auto& k, auto& e) { cfg.lifecycle.max_age = to_int(k, e); }},
      {"lifecycle.min_hits", [&](auto& k, auto& e) { cfg.lifecycle.min_hits = to_int(k, e); }},
      {"motion.position_weight", [&](auto& k, auto& e) { cfg.noise.position_weight = as_double(k, e); }},
      {"motion.velocity_weight", [&](auto& k, auto& e) { cfg.noise.velocity_weight = as_double(k, e); }},
      {"features.reid", [&](auto& k, auto& e) { cfg.use_reid = as_bool(k, e); }},
      {"features.ocr", [&](auto& k, auto& e) { cfg.use_ocr = as_bool(k, e); }},
      {"features.oos", [&](auto& k, auto& e) { cfg.use_oos = as_bool(k, e); }},
  };
  for (const auto& [key, entry] : kv.entries) {
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigInvalid("line " + std::to_string(entry.line) + ": unknown key '" + key + "'");
    }
    it->second(key, entry);
  }
  cfg.validate();
  return cfg;
}

TrackerConfig load_tracker_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open config " + path.string());
  return load_tracker_config(in);
}

std::string format_tracker_config(const TrackerConfig& cfg) {
  std::ostringstream os;
  os << "tiers.thresholds = ";
  for (std::size_t i = 0; i < cfg.tiers.thresholds.size(); ++i) {
    os << (i ? "," : "") << format_double(cfg.tiers.thresholds[i]);
  }
  os << "\ncost.lambda_iou = " << format_double(cfg.cost.lambda_iou)
     << "\ncost.lambda_reid = " << format_double(cfg.cost.lambda_reid)
     << "\ncost.iou_gate = " << format_double(cfg.cost.iou_gate)
     << "\ncost.embedding_momentum = " << format_double(cfg.cost.embedding_momentum)
     << "\nlifecycle.init_threshold = " << format_double(cfg.lifecycle.init_threshold)
     << "\nlifecycle.max_age = " << cfg.lifecycle.max_age
     << "\nlifecycle.min_hits = " << cfg.lifecycle.min_hits
     << "\nmotion.position_weight = " << format_double(cfg.noise.position_weight)
     << "\nmotion.velocity_weight = " << format_double(cfg.noise.velocity_weight)
     << "\nfeatures.reid = " << (cfg.use_reid ? "true" : "false")
     << "\nfeatures.ocr = " << (cfg.use_ocr ? "true" : "false")
     << "\nfeatures.oos = " << (cfg.use_oos ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace tiertrack
