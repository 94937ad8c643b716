#include "tiertrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include "tiertrack/config.hpp"
#include "tiertrack/error.hpp"
#include "tiertrack/mot_io.hpp"

namespace tiertrack {

double PortableRandom::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::size_t PortableRandom::index(std::size_t n) {
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

void SynthConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigInvalid(std::string("synth: ") + what);
  };
  require(n_targets > 0 && n_frames > 0, "n_targets and n_frames must be positive");
  require(arena_width > 0 && arena_height > 0, "arena must have positive size");
  require(speed_min >= 0 && speed_max >= speed_min, "speed range must satisfy 0 <= min <= max");
  require(height_min > 0 && height_max >= height_min, "height range must be positive and ordered");
  require(aspect_min > 0 && aspect_max >= aspect_min, "aspect range must be positive and ordered");
  require(height_max < arena_height && height_max * aspect_max < arena_width, "targets must fit the arena");
  require(accel_sigma >= 0 && sigma_id >= 0 && sigma_frame >= 0 && jitter_sigma >= 0 && logit_noise >= 0 &&
              occluded_logit_noise >= 0 && conf_noise >= 0,
          "standard deviations must be non-negative");
  for (double rate : {occlusion_threshold, occluded_conf_scale, miss_rate, fp_rate, fp_conf_max, base_conf}) {
    require(rate >= 0 && rate <= 1, "rates, confidences and thresholds must lie in [0,1]");
  }
  require(embedding_dim > 0 && num_classes > 0, "embedding_dim and num_classes must be positive");
}

SynthConfig load_synth_config(std::istream& in) {
  using namespace config_detail;
  using Entry = KeyValueFile::Entry;
  const KeyValueFile kv = parse_key_values(in);
  SynthConfig c;
  const auto to_int = [](const std::string& k, const Entry& e) {
    const long long v = as_int(k, e);
    if (v < 0 || v > 100000000LL) throw ConfigInvalid("line " + std::to_string(e.line) + ": '" + k + "' out of range");
    return static_cast<int>(v);
  };
  const auto real = [](double& field) {
    return [&field](const std::string& k, const Entry& e) { field = as_double(k, e); };
  };
  const std::map<std::string, std::function<void(const std::string&, const Entry&)>> setters = {
      {"synth.seed", [&](auto& k, auto& e) {
         const long long v = as_int(k, e);
         if (v < 0) throw ConfigInvalid("line " + std::to_string(e.line) + ": seed must be non-negative");
         c.seed = static_cast<std::uint64_t>(v);
       }},
      {"synth.n_targets", [&](auto& k, auto& e) { c.n_targets = to_int(k, e); }},
      {"synth.n_frames", [&](auto& k, auto& e) { c.n_frames = to_int(k, e); }},
      {"synth.arena_width", real(c.arena_width)},
      {"synth.arena_height", real(c.arena_height)},
      {"synth.speed_min", real(c.speed_min)},
      {"synth.speed_max", real(c.speed_max)},
      {"synth.accel_sigma", real(c.accel_sigma)},
      {"synth.height_min", real(c.height_min)},
      {"synth.height_max", real(c.height_max)},
      {"synth.aspect_min", real(c.aspect_min)},
      {"synth.aspect_max", real(c.aspect_max)},
      {"synth.layout", [&](auto&, auto& e) {
         if (e.value == "random") c.layout = SynthLayout::Random;
         else if (e.value == "crossing") c.layout = SynthLayout::Crossing;
         else throw ConfigInvalid("line " + std::to_string(e.line) + ": synth.layout must be random or crossing");
       }},
      {"synth.occlusion_threshold", real(c.occlusion_threshold)},
      {"synth.occluded_conf_scale", real(c.occluded_conf_scale)},
      {"synth.embedding_dim", [&](auto& k, auto& e) { c.embedding_dim = to_int(k, e); }},
      {"synth.sigma_id", real(c.sigma_id)},
      {"synth.sigma_frame", real(c.sigma_frame)},
      {"synth.miss_rate", real(c.miss_rate)},
      {"synth.fp_rate", real(c.fp_rate)},
      {"synth.fp_conf_max", real(c.fp_conf_max)},
      {"synth.jitter_sigma", real(c.jitter_sigma)},
      {"synth.base_conf", real(c.base_conf)},
      {"synth.conf_noise", real(c.conf_noise)},
      {"synth.num_classes", [&](auto& k, auto& e) { c.num_classes = to_int(k, e); }},
      {"synth.logit_signal", real(c.logit_signal)},
      {"synth.logit_noise", real(c.logit_noise)},
      {"synth.occluded_logit_noise", real(c.occluded_logit_noise)},
  };
  for (const auto& [key, entry] : kv.entries) {
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigInvalid("line " + std::to_string(entry.line) + ": unknown key '" + key + "'");
    }
    it->second(key, entry);
  }
  c.validate();
  return c;
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open config " + path.string());
  return load_synth_config(in);
}

double occluded_confidence(const SynthConfig& cfg, double base, double covered) {
  return covered > cfg.occlusion_threshold ? base * cfg.occluded_conf_scale : base;
}

namespace {

struct Target {
  int cls = 0;
  int depth = 0;  // larger is nearer to the camera
  double left = 0, top = 0, width = 1, height = 1;
  double vx = 0, vy = 0;
  Eigen::VectorXd appearance;
};

Eigen::VectorXd random_unit(PortableRandom& rng, int dim) {
  Eigen::VectorXd v(dim);
  for (int k = 0; k < dim; ++k) v(k) = rng.normal();
  const double n = v.norm();
  return n > 0 ? Eigen::VectorXd(v / n) : Eigen::VectorXd::Unit(dim, 0);
}

Eigen::VectorXd normalized(const Eigen::VectorXd& v) {
  const double n = v.norm();
  return n > 0 ? Eigen::VectorXd(v / n) : Eigen::VectorXd::Unit(v.size(), 0);
}

template <typename T>
void shuffle(std::vector<T>& v, PortableRandom& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

void move_target(Target& t, const SynthConfig& cfg, PortableRandom& rng) {
  t.vx += cfg.accel_sigma * rng.normal();
  t.vy += cfg.accel_sigma * rng.normal();
  const double speed = std::hypot(t.vx, t.vy);
  if (speed > 0.0) {
    const double clamped = std::clamp(speed, cfg.speed_min, cfg.speed_max);
    t.vx *= clamped / speed;
    t.vy *= clamped / speed;
  }
  t.left += t.vx;
  t.top += t.vy;
  const double max_left = cfg.arena_width - t.width;
  const double max_top = cfg.arena_height - t.height;
  if (t.left < 0) {
    t.left = -t.left;
    t.vx = -t.vx;
  } else if (t.left > max_left) {
    t.left = 2 * max_left - t.left;
    t.vx = -t.vx;
  }
  if (t.top < 0) {
    t.top = -t.top;
    t.vy = -t.vy;
  } else if (t.top > max_top) {
    t.top = 2 * max_top - t.top;
    t.vy = -t.vy;
  }
  t.left = std::clamp(t.left, 0.0, max_left);
  t.top = std::clamp(t.top, 0.0, max_top);
}

}  // namespace

SyntheticSequence generate_synthetic_sequence(const SynthConfig& cfg) {
  cfg.validate();
  PortableRandom rng(cfg.seed);
  const int dim = cfg.embedding_dim;

  std::vector<Eigen::VectorXd> prototypes;
  for (int k = 0; k < cfg.num_classes; ++k) prototypes.push_back(random_unit(rng, dim));

  std::vector<int> depths(static_cast<std::size_t>(cfg.n_targets));
  for (int i = 0; i < cfg.n_targets; ++i) depths[static_cast<std::size_t>(i)] = i;
  shuffle(depths, rng);

  const int pairs = (cfg.n_targets + 1) / 2;
  std::vector<Target> targets(static_cast<std::size_t>(cfg.n_targets));
  for (int i = 0; i < cfg.n_targets; ++i) {
    Target& t = targets[static_cast<std::size_t>(i)];
    t.cls = static_cast<int>(rng.index(static_cast<std::size_t>(cfg.num_classes)));
    t.depth = depths[static_cast<std::size_t>(i)];
    t.height = rng.uniform(cfg.height_min, cfg.height_max);
    t.width = t.height * rng.uniform(cfg.aspect_min, cfg.aspect_max);
    Eigen::VectorXd offset(dim);
    for (int k = 0; k < dim; ++k) offset(k) = cfg.sigma_id * rng.normal();
    t.appearance = normalized(prototypes[static_cast<std::size_t>(t.cls)] + offset);
    const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
    if (cfg.layout == SynthLayout::Crossing) {
      const int pair = i / 2;
      const double center_y = cfg.arena_height * (pair + 1) / (pairs + 1);
      t.top = std::clamp(center_y - t.height / 2, 0.0, cfg.arena_height - t.height);
      const bool from_left = i % 2 == 0;
      t.left = from_left ? 0.0 : cfg.arena_width - t.width;
      t.vx = from_left ? speed : -speed;
      t.vy = 0.0;
    } else {
      t.left = rng.uniform(0.0, cfg.arena_width - t.width);
      t.top = rng.uniform(0.0, cfg.arena_height - t.height);
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      t.vx = speed * std::cos(angle);
      t.vy = speed * std::sin(angle);
    }
  }

  SyntheticSequence seq;
  std::size_t source_index = 0;
  for (int frame = 1; frame <= cfg.n_frames; ++frame) {
    if (frame > 1) {
      for (auto& t : targets) move_target(t, cfg, rng);
    }
    std::vector<BBoxd> boxes;
    for (const auto& t : targets) boxes.emplace_back(t.left, t.top, t.width, t.height);

    std::vector<Detection> frame_dets;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const Target& t = targets[i];
      double covered = 0.0;
      for (std::size_t j = 0; j < targets.size(); ++j) {
        if (j != i && targets[j].depth > t.depth) covered = std::max(covered, coverage(boxes[i], boxes[j]));
      }
      seq.groundtruth.push_back(GtBox{frame, static_cast<int>(i) + 1, boxes[i], t.cls, 1.0 - covered, false});

      const bool missed = rng.uniform() < cfg.miss_rate;
      double jitter[4];
      for (double& j : jitter) j = cfg.jitter_sigma * rng.normal();
      const double conf_offset = cfg.conf_noise > 0 ? rng.uniform(-cfg.conf_noise, cfg.conf_noise) : 0.0;
      Eigen::VectorXd emb(dim);
      for (int k = 0; k < dim; ++k) emb(k) = t.appearance(k) + cfg.sigma_frame * rng.normal();
      const double logit_sigma = cfg.logit_noise + cfg.occluded_logit_noise * covered;
      Eigen::VectorXd logits(cfg.num_classes);
      for (int k = 0; k < cfg.num_classes; ++k) {
        logits(k) = (k == t.cls ? cfg.logit_signal : 0.0) + logit_sigma * rng.normal();
      }
      if (missed) continue;

      Detection d;
      d.frame = frame;
      d.bbox = BBoxd(boxes[i].left() + jitter[0], boxes[i].top() + jitter[1],
                     std::max(1.0, boxes[i].width() + jitter[2]), std::max(1.0, boxes[i].height() + jitter[3]));
      d.conf = std::clamp(occluded_confidence(cfg, std::clamp(cfg.base_conf + conf_offset, 0.0, 1.0), covered), 0.0, 1.0);
      d.embedding = normalized(emb);
      d.logits = std::move(logits);
      frame_dets.push_back(std::move(d));
    }
    for (int slot = 0; slot < cfg.n_targets; ++slot) {
      if (!(rng.uniform() < cfg.fp_rate)) continue;
      const double h = rng.uniform(cfg.height_min, cfg.height_max);
      const double w = h * rng.uniform(cfg.aspect_min, cfg.aspect_max);
      Detection d;
      d.frame = frame;
      d.bbox = BBoxd(rng.uniform(0.0, cfg.arena_width - w), rng.uniform(0.0, cfg.arena_height - h), w, h);
      d.conf = rng.uniform(0.0, cfg.fp_conf_max);
      d.embedding = random_unit(rng, dim);
      Eigen::VectorXd logits(cfg.num_classes);
      for (int k = 0; k < cfg.num_classes; ++k) logits(k) = cfg.logit_noise * rng.normal();
      d.logits = std::move(logits);
      frame_dets.push_back(std::move(d));
    }
    shuffle(frame_dets, rng);
    for (auto& d : frame_dets) {
      d.source_index = source_index++;
      seq.detections.push_back(std::move(d));
    }
  }
  return seq;
}

std::string format_groundtruth(const std::vector<GtBox>& gt) {
  std::string out;
  for (const auto& g : gt) out += write_groundtruth_line(g) + "\n";
  return out;
}

std::string format_detections_jsonl(const std::vector<Detection>& dets) {
  std::string out;
  for (const auto& d : dets) out += write_detection_json(d) + "\n";
  return out;
}

void write_synthetic_sequence(const SyntheticSequence& seq, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "gt.txt", format_groundtruth(seq.groundtruth));
  write_file_atomic(dir / "dets.jsonl", format_detections_jsonl(seq.detections));
}

}  // namespace tiertrack
