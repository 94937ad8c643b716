#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "tiertrack/records.hpp"

namespace tiertrack {

/// Portable random source: std::mt19937_64 (fully specified by the standard)
/// with hand-written transforms, since the standard distributions are not
/// reproducible across library implementations.
class PortableRandom {
 public:
  explicit PortableRandom(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Box-Muller; the second variate is cached.
  double normal();
  std::size_t index(std::size_t n);  // uniform in [0, n)

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

enum class SynthLayout { Random, Crossing };

struct SynthConfig {
  std::uint64_t seed = 42;
  int n_targets = 8;
  int n_frames = 300;
  double arena_width = 640.0;
  double arena_height = 480.0;
  double speed_min = 2.0;
  double speed_max = 6.0;
  double accel_sigma = 0.2;  // per-frame velocity perturbation
  double height_min = 50.0;
  double height_max = 80.0;
  double aspect_min = 0.4;
  double aspect_max = 0.7;
  SynthLayout layout = SynthLayout::Random;

  // Occlusion: a target covered by nearer targets beyond this fraction has its
  // confidence multiplied by occluded_conf_scale.
  double occlusion_threshold = 0.3;
  double occluded_conf_scale = 0.45;

  // Appearance: class prototype + per-identity offset + per-frame noise.
  int embedding_dim = 16;
  double sigma_id = 0.05;
  double sigma_frame = 0.2;

  // Detector.
  double miss_rate = 0.02;
  double fp_rate = 0.01;  // per target slot per frame
  double fp_conf_max = 0.5;
  double jitter_sigma = 1.0;
  double base_conf = 0.85;
  double conf_noise = 0.1;

  // Classifier.
  int num_classes = 5;
  double logit_signal = 2.0;
  double logit_noise = 0.8;
  double occluded_logit_noise = 3.0;  // added noise std at full occlusion

  void validate() const;
};

SynthConfig load_synth_config(std::istream& in);
SynthConfig load_synth_config(const std::filesystem::path& path);

struct SyntheticSequence {
  std::vector<GtBox> groundtruth;     // by frame, then id
  std::vector<Detection> detections;  // by frame, then source_index
};

/// Fully determined by the config, seed included.
SyntheticSequence generate_synthetic_sequence(const SynthConfig& cfg);

/// Confidence of a detection before noise, given the fraction of its box
/// covered by nearer targets.
double occluded_confidence(const SynthConfig& cfg, double base, double covered);

std::string format_groundtruth(const std::vector<GtBox>& gt);
std::string format_detections_jsonl(const std::vector<Detection>& dets);

/// Writes gt.txt and dets.jsonl into `dir`.
void write_synthetic_sequence(const SyntheticSequence& seq, const std::filesystem::path& dir);

}  // namespace tiertrack
