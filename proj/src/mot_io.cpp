#include "tiertrack/mot_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tiertrack/error.hpp"

namespace tiertrack {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

double to_double(std::string_view field, std::size_t line_number, const char* name) {
  double value = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw MalformedLine(line_number, std::string("non-numeric field '") + name + "'");
  }
  return value;
}

int to_int(std::string_view field, std::size_t line_number, const char* name) {
  const double value = to_double(field, line_number, name);
  if (value != std::floor(value) || std::abs(value) > 2e9) {
    throw MalformedLine(line_number, std::string("field '") + name + "' is not an integer");
  }
  return static_cast<int>(value);
}

BBoxd to_box(double l, double t, double w, double h, std::size_t line_number) {
  if (!(w > 0.0) || !(h > 0.0)) {
    throw MalformedLine(line_number, "box width and height must be positive");
  }
  return BBoxd(l, t, w, h);
}

void check_field_count(const std::vector<std::string_view>& f, std::size_t expected,
                       std::size_t line_number) {
  if (f.size() != expected) {
    throw MalformedLine(line_number, "expected " + std::to_string(expected) + " fields, got " +
                                         std::to_string(f.size()));
  }
}

void check_positive(int v, std::size_t line_number, const char* name) {
  if (v <= 0) throw MalformedLine(line_number, std::string("field '") + name + "' must be positive");
}

// Rounds to `decimals` places and folds negative zero.
double rounded(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale + 0.0;
}

template <typename Record>
std::vector<Record> read_lines(std::istream& in, MotKind kind) {
  std::vector<Record> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    auto rec = std::get<Record>(parse_mot_line(line, kind, line_number));
    if constexpr (std::is_same_v<Record, Detection>) rec.source_index = out.size();
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

MotRecord parse_mot_line(std::string_view line, MotKind kind, std::size_t line_number) {
  const auto f = split_fields(trim(line));
  switch (kind) {
    case MotKind::Detection: {
      check_field_count(f, 10, line_number);
      Detection d;
      d.frame = to_int(f[0], line_number, "frame");
      check_positive(d.frame, line_number, "frame");
      to_double(f[1], line_number, "id");
      d.bbox = to_box(to_double(f[2], line_number, "left"), to_double(f[3], line_number, "top"),
                      to_double(f[4], line_number, "width"), to_double(f[5], line_number, "height"),
                      line_number);
      d.conf = to_double(f[6], line_number, "conf");
      if (d.conf < 0.0 || d.conf > 1.0) throw MalformedLine(line_number, "conf outside [0,1]");
      for (std::size_t i = 7; i < 10; ++i) to_double(f[i], line_number, "world");
      d.source_index = line_number - 1;
      return d;
    }
    case MotKind::GroundTruth: {
      check_field_count(f, 9, line_number);
      GtBox g;
      g.frame = to_int(f[0], line_number, "frame");
      check_positive(g.frame, line_number, "frame");
      g.track_id = to_int(f[1], line_number, "id");
      check_positive(g.track_id, line_number, "id");
      g.bbox = to_box(to_double(f[2], line_number, "left"), to_double(f[3], line_number, "top"),
                      to_double(f[4], line_number, "width"), to_double(f[5], line_number, "height"),
                      line_number);
      g.ignore = to_double(f[6], line_number, "flag") == 0.0;
      g.class_id = to_int(f[7], line_number, "class");
      g.visibility = to_double(f[8], line_number, "visibility");
      if (g.visibility < 0.0 || g.visibility > 1.0) {
        throw MalformedLine(line_number, "visibility outside [0,1]");
      }
      return g;
    }
    case MotKind::Result: {
      check_field_count(f, 10, line_number);
      TrackRecord r;
      r.frame = to_int(f[0], line_number, "frame");
      check_positive(r.frame, line_number, "frame");
      r.track_id = to_int(f[1], line_number, "id");
      check_positive(r.track_id, line_number, "id");
      r.bbox = to_box(to_double(f[2], line_number, "left"), to_double(f[3], line_number, "top"),
                      to_double(f[4], line_number, "width"), to_double(f[5], line_number, "height"),
                      line_number);
      r.conf = to_double(f[6], line_number, "conf");
      for (std::size_t i = 7; i < 10; ++i) to_double(f[i], line_number, "world");
      return r;
    }
  }
  throw std::logic_error("unknown MOT kind");
}

std::vector<Detection> read_mot_detections(std::istream& in) {
  auto dets = read_lines<Detection>(in, MotKind::Detection);
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.frame < b.frame; });
  return dets;
}

std::vector<GtBox> read_mot_groundtruth(std::istream& in) {
  return read_lines<GtBox>(in, MotKind::GroundTruth);
}

std::vector<TrackRecord> read_mot_results(std::istream& in) {
  return read_lines<TrackRecord>(in, MotKind::Result);
}

std::vector<Detection> parse_jsonl_detections(std::istream& in) {
  using nlohmann::json;
  std::vector<Detection> out;
  std::optional<Eigen::Index> embedding_dim, logit_dim;
  std::string line;
  std::size_t line_number = 0;

  const auto to_vector = [&](const json& arr, const char* name) {
    if (!arr.is_array()) throw MalformedLine(line_number, std::string("'") + name + "' must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_number()) {
        throw MalformedLine(line_number, std::string("non-numeric entry in '") + name + "'");
      }
      v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    }
    if (!v.allFinite()) throw MalformedLine(line_number, std::string("non-finite entry in '") + name + "'");
    return v;
  };
  const auto check_dim = [&](std::optional<Eigen::Index>& expected, Eigen::Index got, const char* name) {
    if (expected && *expected != got) {
      throw DimensionMismatch("line " + std::to_string(line_number) + ": " + name + " length " +
                              std::to_string(got) + " differs from " + std::to_string(*expected));
    }
    expected = got;
  };

  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw MalformedLine(line_number, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw MalformedLine(line_number, "expected a JSON object");
    if (!obj.contains("frame") || !obj["frame"].is_number_integer()) {
      throw MalformedLine(line_number, "'frame' must be an integer");
    }
    if (!obj.contains("bbox") || !obj.contains("conf") || !obj["conf"].is_number()) {
      throw MalformedLine(line_number, "missing 'bbox' or 'conf'");
    }
    Detection d;
    d.frame = obj["frame"].get<int>();
    if (d.frame <= 0) throw MalformedLine(line_number, "'frame' must be positive");
    const Eigen::VectorXd box = to_vector(obj["bbox"], "bbox");
    if (box.size() != 4) throw MalformedLine(line_number, "'bbox' must have 4 entries");
    d.bbox = to_box(box(0), box(1), box(2), box(3), line_number);
    d.conf = obj["conf"].get<double>();
    if (!(d.conf >= 0.0 && d.conf <= 1.0)) throw MalformedLine(line_number, "conf outside [0,1]");
    if (obj.contains("embedding") && !obj["embedding"].is_null()) {
      Eigen::VectorXd e = to_vector(obj["embedding"], "embedding");
      check_dim(embedding_dim, e.size(), "embedding");
      const double norm = e.norm();
      if (e.size() == 0 || std::abs(norm - 1.0) > 1e-3) {
        throw MalformedLine(line_number, "embedding is not unit length");
      }
      d.embedding = e / norm;
    }
    if (obj.contains("logits") && !obj["logits"].is_null()) {
      Eigen::VectorXd l = to_vector(obj["logits"], "logits");
      check_dim(logit_dim, l.size(), "logits");
      d.logits = std::move(l);
    }
    d.source_index = out.size();
    out.push_back(std::move(d));
  }
  std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.source_index < b.source_index;
  });
  return out;
}

std::string write_track_line(const TrackRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%d,%.2f,%.2f,%.2f,%.2f,%.4f,-1,-1,-1", r.frame, r.track_id,
                rounded(r.bbox.left(), 2), rounded(r.bbox.top(), 2), rounded(r.bbox.width(), 2),
                rounded(r.bbox.height(), 2), rounded(r.conf, 4));
  return buf;
}

std::string write_groundtruth_line(const GtBox& g) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%d,%.2f,%.2f,%.2f,%.2f,%d,%d,%.4f", g.frame, g.track_id,
                rounded(g.bbox.left(), 2), rounded(g.bbox.top(), 2), rounded(g.bbox.width(), 2),
                rounded(g.bbox.height(), 2), g.ignore ? 0 : 1, g.class_id, rounded(g.visibility, 4));
  return buf;
}

std::string write_detection_json(const Detection& d) {
  // Written by hand so numbers come out in shortest round-trip form.
  std::string out;
  const auto number = [&out](double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
  };
  const auto array = [&](const auto& values, int decimals) {
    out += '[';
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out += ',';
      number(rounded(values[i], decimals));
    }
    out += ']';
  };
  const std::array<double, 4> box{d.bbox.left(), d.bbox.top(), d.bbox.width(), d.bbox.height()};
  out += "{\"bbox\":";
  array(box, 2);
  out += ",\"conf\":";
  number(rounded(d.conf, 4));
  if (d.embedding) {
    out += ",\"embedding\":";
    array(std::vector<double>(d.embedding->begin(), d.embedding->end()), 6);
  }
  out += ",\"frame\":" + std::to_string(d.frame);
  if (d.logits) {
    out += ",\"logits\":";
    array(std::vector<double>(d.logits->begin(), d.logits->end()), 4);
  }
  out += '}';
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace tiertrack
