#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tiertrack/error.hpp"
#include "tiertrack/mot_io.hpp"
#include "tiertrack/synth.hpp"

using namespace tiertrack;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SynthConfig quiet() {
  SynthConfig c;
  c.miss_rate = 0.0;
  c.fp_rate = 0.0;
  c.jitter_sigma = 0.0;
  c.conf_noise = 0.0;
  return c;
}

}  // namespace

TEST(PortableRandom, MatchesStandardEngineSequence) {
  // The standard fixes the 10000th output of a default-seeded mt19937_64.
  PortableRandom rng(5489u);
  double u = 0.0;
  for (int i = 0; i < 10000; ++i) u = rng.uniform();
  EXPECT_EQ(u, static_cast<double>(9981545732273789042ULL >> 11) * 0x1.0p-53);
}

TEST(PortableRandom, NormalMoments) {
  PortableRandom rng(1);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.index(7), 7u);
}

TEST(Synth, NoiseFreeSingleTargetReproducesGroundTruth) {
  SynthConfig c = quiet();
  c.n_targets = 1;
  c.n_frames = 50;
  const auto seq = generate_synthetic_sequence(c);
  ASSERT_EQ(seq.groundtruth.size(), 50u);
  ASSERT_EQ(seq.detections.size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(seq.detections[i].bbox, seq.groundtruth[i].bbox);
    EXPECT_EQ(seq.detections[i].frame, seq.groundtruth[i].frame);
    EXPECT_EQ(seq.detections[i].conf, c.base_conf);
    EXPECT_EQ(seq.groundtruth[i].visibility, 1.0);
    EXPECT_EQ(seq.detections[i].source_index, i);
  }
}

TEST(Synth, SameSeedSameBytes) {
  SynthConfig c;
  c.n_frames = 40;
  const auto a = generate_synthetic_sequence(c);
  const auto b = generate_synthetic_sequence(c);
  EXPECT_EQ(format_groundtruth(a.groundtruth), format_groundtruth(b.groundtruth));
  EXPECT_EQ(format_detections_jsonl(a.detections), format_detections_jsonl(b.detections));

  c.seed = 43;
  EXPECT_NE(format_detections_jsonl(generate_synthetic_sequence(c).detections),
            format_detections_jsonl(a.detections));

  const auto dir = std::filesystem::temp_directory_path() / "tiertrack_synth_test";
  std::filesystem::remove_all(dir);
  write_synthetic_sequence(a, dir / "one");
  write_synthetic_sequence(b, dir / "two");
  EXPECT_EQ(slurp(dir / "one" / "gt.txt"), slurp(dir / "two" / "gt.txt"));
  EXPECT_EQ(slurp(dir / "one" / "dets.jsonl"), slurp(dir / "two" / "dets.jsonl"));
  std::ifstream dets(dir / "one" / "dets.jsonl");
  EXPECT_EQ(parse_jsonl_detections(dets).size(), a.detections.size());
  std::filesystem::remove_all(dir);
}

TEST(Synth, CrossingDropsOccludedConfidenceIntoLowTier) {
  SynthConfig c = quiet();
  c.n_targets = 2;
  c.n_frames = 200;
  c.layout = SynthLayout::Crossing;
  c.accel_sigma = 0.0;
  c.height_min = c.height_max = 60.0;
  c.aspect_min = c.aspect_max = 0.5;
  const auto seq = generate_synthetic_sequence(c);

  // Frame where one target is most covered by the other.
  double worst = 0.0;
  int worst_frame = 0, occluded_id = 0;
  for (const auto& g : seq.groundtruth) {
    if (1.0 - g.visibility > worst) {
      worst = 1.0 - g.visibility;
      worst_frame = g.frame;
      occluded_id = g.track_id;
    }
  }
  ASSERT_GT(worst, c.occlusion_threshold);
  const double expected = occluded_confidence(c, c.base_conf, worst);
  EXPECT_DOUBLE_EQ(expected, c.base_conf * c.occluded_conf_scale);
  EXPECT_LT(expected, 0.6);
  EXPECT_GE(expected, 0.1);

  std::vector<double> confs;
  for (const auto& d : seq.detections) {
    if (d.frame == worst_frame) confs.push_back(d.conf);
  }
  ASSERT_EQ(confs.size(), 2u);
  std::sort(confs.begin(), confs.end());
  EXPECT_DOUBLE_EQ(confs[0], expected);
  EXPECT_DOUBLE_EQ(confs[1], c.base_conf);
  EXPECT_GT(occluded_id, 0);
}

TEST(Synth, OccludedConfidenceRule) {
  SynthConfig c;
  EXPECT_EQ(occluded_confidence(c, 0.8, 0.3), 0.8);
  EXPECT_DOUBLE_EQ(occluded_confidence(c, 0.8, 0.31), 0.8 * c.occluded_conf_scale);
}

TEST(SynthConfig, LoadAndValidate) {
  std::istringstream in("# benchmark\nsynth.seed = 7\nsynth.n_targets = 3\nsynth.layout = crossing\nsynth.miss_rate = 0\n");
  const SynthConfig c = load_synth_config(in);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.n_targets, 3);
  EXPECT_EQ(c.layout, SynthLayout::Crossing);
  EXPECT_EQ(c.miss_rate, 0.0);

  std::istringstream unknown("synth.colour = red\n");
  EXPECT_THROW(load_synth_config(unknown), ConfigInvalid);
  std::istringstream bad_rate("synth.miss_rate = 1.5\n");
  EXPECT_THROW(load_synth_config(bad_rate), ConfigInvalid);
  std::istringstream bad_layout("synth.layout = spiral\n");
  EXPECT_THROW(load_synth_config(bad_layout), ConfigInvalid);
  SynthConfig neg;
  neg.sigma_frame = -1;
  EXPECT_THROW(generate_synthetic_sequence(neg), ConfigInvalid);
}
