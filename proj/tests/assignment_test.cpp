#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include "tiertrack/assignment.hpp"
#include "tiertrack/error.hpp"

using namespace tiertrack;

namespace {

Detection det_at(double left, double top, double w, double h, std::optional<Eigen::VectorXd> emb = std::nullopt) {
  Detection d{1, BBoxd(left, top, w, h), 0.9, std::move(emb), std::nullopt, 0};
  return d;
}

Eigen::VectorXd unit2(double x, double y) {
  Eigen::VectorXd v(2);
  v << x, y;
  return v.normalized();
}

// Exhaustive search: the best (max matched count, then min cost) over every
// injective map of the smaller side into the larger.
struct Brute {
  std::size_t count = 0;
  double cost = 0.0;
};

Brute brute_force(const Eigen::MatrixXd& c) {
  const bool flip = c.rows() > c.cols();
  const Eigen::MatrixXd m = flip ? Eigen::MatrixXd(c.transpose()) : c;
  std::vector<int> cols(static_cast<std::size_t>(m.cols()));
  std::iota(cols.begin(), cols.end(), 0);
  Brute best{0, std::numeric_limits<double>::infinity()};
  do {
    std::size_t count = 0;
    double cost = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double v = m(i, cols[static_cast<std::size_t>(i)]);
      if (!is_forbidden(v)) {
        ++count;
        cost += v;
      }
    }
    if (count > best.count || (count == best.count && cost < best.cost)) best = {count, cost};
  } while (std::next_permutation(cols.begin(), cols.end()));
  if (best.count == 0) best.cost = 0.0;
  return best;
}

Eigen::MatrixXd random_masked(std::mt19937_64& rng, int rows, int cols, double forbid_rate) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = u(rng) < forbid_rate ? kForbidden : u(rng);
  return m;
}

void expect_valid_partition(const AssignmentResult& r, Eigen::Index rows, Eigen::Index cols) {
  std::vector<int> row_seen(static_cast<std::size_t>(rows), 0), col_seen(static_cast<std::size_t>(cols), 0);
  for (auto [i, j] : r.matches) {
    ++row_seen[static_cast<std::size_t>(i)];
    ++col_seen[static_cast<std::size_t>(j)];
  }
  for (auto i : r.unmatched_rows) ++row_seen[static_cast<std::size_t>(i)];
  for (auto j : r.unmatched_columns) ++col_seen[static_cast<std::size_t>(j)];
  for (int v : row_seen) EXPECT_EQ(v, 1);
  for (int v : col_seen) EXPECT_EQ(v, 1);
}

}  // namespace

TEST(CosineDistance, Examples) {
  EXPECT_DOUBLE_EQ(cosine_distance(unit2(1, 0), unit2(1, 0)), 0.0);
  EXPECT_DOUBLE_EQ(cosine_distance(unit2(1, 0), unit2(0, 1)), 1.0);
  EXPECT_NEAR(cosine_distance(unit2(1, 0), unit2(1, 1)), 1.0 - std::sqrt(2.0) / 2.0, 1e-12);
  EXPECT_NEAR(cosine_distance(unit2(1, 0), unit2(1, 1)), 0.29289, 1e-5);
}

TEST(CosineDistance, DimensionMismatch) {
  EXPECT_THROW(cosine_distance(unit2(1, 0), Eigen::VectorXd::Ones(3).normalized()), DimensionMismatch);
}

TEST(FusedCost, LinearCombination) {
  // Detection box offset so that IoU = 0.6, appearance angle so that cosine distance = 0.2.
  // Two 10x10 boxes offset by dx overlap (10-dx)*10; IoU = (10-dx)/(10+dx) = 0.6 -> dx = 2.5.
  const double c = 0.8;  // cos(theta), 1 - c = 0.2
  Eigen::VectorXd e1 = unit2(1, 0);
  Eigen::VectorXd e2 = unit2(c, std::sqrt(1 - c * c));
  const std::vector<Detection> dets{det_at(2.5, 0, 10, 10, e1)};
  const std::vector<TrackCue> tracks{{BBoxd(0, 0, 10, 10), &e2}};
  const CostConfig cfg;
  const Eigen::MatrixXd m = fused_cost_matrix(dets, tracks, cfg, true);
  ASSERT_EQ(m.rows(), 1);
  ASSERT_EQ(m.cols(), 1);
  EXPECT_NEAR(m(0, 0), 0.3, 1e-12);
}

TEST(FusedCost, WithoutReidIsPureIou) {
  const std::vector<Detection> dets{det_at(2.5, 0, 10, 10), det_at(0, 0, 10, 10)};
  const std::vector<TrackCue> tracks{{BBoxd(0, 0, 10, 10), nullptr}, {BBoxd(1, 1, 10, 12), nullptr}};
  const Eigen::MatrixXd m = fused_cost_matrix(dets, tracks, CostConfig{}, false);
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j)
      EXPECT_EQ(m(i, j), 1.0 - iou(dets[static_cast<std::size_t>(i)].bbox, tracks[static_cast<std::size_t>(j)].box));
}

TEST(FusedCost, GateForbidsEvenWithIdenticalAppearance) {
  // IoU = (10-dx)/(10+dx) = 0.05 -> dx = 9.5/1.05
  Eigen::VectorXd e = unit2(1, 0);
  const double dx = 9.5 / 1.05;
  const std::vector<Detection> dets{det_at(dx, 0, 10, 10, e)};
  const std::vector<TrackCue> tracks{{BBoxd(0, 0, 10, 10), &e}};
  ASSERT_NEAR(iou(dets[0].bbox, tracks[0].box), 0.05, 1e-12);
  EXPECT_TRUE(is_forbidden(fused_cost_matrix(dets, tracks, CostConfig{}, true)(0, 0)));
}

TEST(FusedCost, MissingEmbedding) {
  Eigen::VectorXd e = unit2(1, 0);
  const std::vector<Detection> dets{det_at(0, 0, 10, 10)};
  const std::vector<TrackCue> tracks{{BBoxd(0, 0, 10, 10), &e}};
  EXPECT_THROW(fused_cost_matrix(dets, tracks, CostConfig{}, true), MissingEmbedding);
  CostConfig no_reid;
  no_reid.lambda_reid = 0.0;
  EXPECT_NO_THROW(fused_cost_matrix(dets, tracks, no_reid, true));
}

TEST(FusedCost, ZeroReidWeightIsBitIdenticalToPureIou) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  std::vector<Eigen::VectorXd> embs;
  for (int i = 0; i < 12; ++i) embs.push_back(unit2(u(rng) + 0.1, u(rng)));
  std::vector<Detection> dets;
  std::vector<TrackCue> tracks;
  for (int i = 0; i < 6; ++i) dets.push_back(det_at(u(rng), u(rng), 10 + u(rng), 10 + u(rng), embs[static_cast<std::size_t>(i)]));
  for (int j = 0; j < 6; ++j) tracks.push_back({BBoxd(u(rng), u(rng), 10 + u(rng), 10 + u(rng)), &embs[static_cast<std::size_t>(6 + j)]});
  CostConfig cfg;
  cfg.lambda_reid = 0.0;
  const Eigen::MatrixXd a = fused_cost_matrix(dets, tracks, cfg, true);
  const Eigen::MatrixXd b = fused_cost_matrix(dets, tracks, CostConfig{}, false);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) EXPECT_EQ(std::memcmp(&a(i, j), &b(i, j), sizeof(double)), 0);
}

TEST(CostConfig, Validation) {
  CostConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lambda_iou = 0;
  c.lambda_reid = 0;
  EXPECT_THROW(c.validate(), ConfigInvalid);
  c = CostConfig{};
  c.iou_gate = 1.5;
  EXPECT_THROW(c.validate(), ConfigInvalid);
  c = CostConfig{};
  c.lambda_reid = -0.1;
  EXPECT_THROW(c.validate(), ConfigInvalid);
}

TEST(SolveLap, TwoByTwo) {
  Eigen::MatrixXd c(2, 2);
  c << 1, 2, 2, 1;
  const auto r = solve_lap(c);
  using P = std::pair<Eigen::Index, Eigen::Index>;
  EXPECT_EQ(r.matches, (std::vector<P>{{0, 0}, {1, 1}}));
  EXPECT_DOUBLE_EQ(r.total_cost, 2.0);
}

TEST(SolveLap, AllForbidden) {
  Eigen::MatrixXd c(1, 1);
  c << kForbidden;
  const auto r = solve_lap(c);
  EXPECT_TRUE(r.matches.empty());
  EXPECT_EQ(r.unmatched_rows, std::vector<Eigen::Index>{0});
  EXPECT_EQ(r.unmatched_columns, std::vector<Eigen::Index>{0});
}

TEST(SolveLap, ThreeByThree) {
  Eigen::MatrixXd c(3, 3);
  c << 4, 1, 3, 2, 0, 5, 3, 2, 2;
  const auto r = solve_lap(c);
  using P = std::pair<Eigen::Index, Eigen::Index>;
  EXPECT_EQ(r.matches, (std::vector<P>{{0, 1}, {1, 0}, {2, 2}}));
  EXPECT_DOUBLE_EQ(r.total_cost, 5.0);
  EXPECT_DOUBLE_EQ(brute_force(c).cost, 5.0);
}

TEST(SolveLap, EmptyAndRectangular) {
  const auto empty = solve_lap(Eigen::MatrixXd(0, 3));
  EXPECT_TRUE(empty.matches.empty());
  EXPECT_EQ(empty.unmatched_columns.size(), 3u);

  Eigen::MatrixXd tall(3, 1);
  tall << 0.5, 0.1, 0.7;
  const auto r = solve_lap(tall);
  ASSERT_EQ(r.matches.size(), 1u);
  EXPECT_EQ(r.matches[0].first, 1);
  EXPECT_EQ(r.unmatched_rows, (std::vector<Eigen::Index>{0, 2}));
}

TEST(SolveLapProperty, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 7);
  std::uniform_real_distribution<double> rate(0.0, 0.9);
  for (int trial = 0; trial < 2000; ++trial) {
    const Eigen::MatrixXd c = random_masked(rng, dim(rng), dim(rng), rate(rng));
    const auto r = solve_lap(c);
    const Brute b = brute_force(c);
    ASSERT_EQ(r.matches.size(), b.count) << c;
    ASSERT_NEAR(r.total_cost, b.cost, 1e-9) << c;
    for (auto [i, j] : r.matches) ASSERT_FALSE(is_forbidden(c(i, j)));
    expect_valid_partition(r, c.rows(), c.cols());
  }
}

TEST(SolveLapProperty, ConstantShiftKeepsMatching) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> dim(1, 6);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = dim(rng);
    const Eigen::MatrixXd c = random_masked(rng, n, n, 0.3);
    const Eigen::MatrixXd shifted = c.unaryExpr([](double v) { return is_forbidden(v) ? v : v + 3.25; });
    EXPECT_EQ(solve_lap(c).matches, solve_lap(shifted).matches);
  }
}

TEST(SolveLapProperty, RowPermutationReindexesMatching) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> dim(1, 6);
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::MatrixXd c = random_masked(rng, dim(rng), dim(rng), 0.3);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(c.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd p(c.rows(), c.cols());
    for (Eigen::Index i = 0; i < c.rows(); ++i) p.row(i) = c.row(perm[static_cast<std::size_t>(i)]);
    const auto a = solve_lap(c), b = solve_lap(p);
    // Random continuous costs have a unique optimum almost surely.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> back;
    for (auto [i, j] : b.matches) back.emplace_back(perm[static_cast<std::size_t>(i)], j);
    std::sort(back.begin(), back.end());
    EXPECT_EQ(a.matches, back);
    EXPECT_NEAR(a.total_cost, b.total_cost, 1e-12);
  }
}

namespace {

// Among optimal matchings, earlier rows pick first: a partner beats none, a
// lower column beats a higher one.
std::vector<Eigen::Index> first_optimum(const Eigen::MatrixXd& c) {
  const Eigen::Index rows = c.rows(), cols = c.cols(), n = std::max(rows, cols);
  const Eigen::Index none = cols;  // sorts after every real column
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<Eigen::Index> best;
  std::size_t best_count = 0;
  double best_cost = 0.0;
  do {
    std::vector<Eigen::Index> a(static_cast<std::size_t>(rows), none);
    std::size_t count = 0;
    double cost = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Eigen::Index j = perm[static_cast<std::size_t>(i)];
      if (j < cols && !is_forbidden(c(i, j))) {
        a[static_cast<std::size_t>(i)] = j;
        ++count;
        cost += c(i, j);
      }
    }
    const bool better = best.empty() || count > best_count ||
                        (count == best_count && (cost < best_cost || (cost == best_cost && a < best)));
    if (better) {
      best = a;
      best_count = count;
      best_cost = cost;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST(SolveLap, TiesGoToEarlierRowsAndLowerColumns) {
  Eigen::MatrixXd c(2, 2);
  c << 1, 1, 1, 1;
  using P = std::pair<Eigen::Index, Eigen::Index>;
  EXPECT_EQ(solve_lap(c).matches, (std::vector<P>{{0, 0}, {1, 1}}));

  Eigen::MatrixXd tall(3, 1);
  tall << 2, 2, 2;
  EXPECT_EQ(solve_lap(tall).matches, (std::vector<P>{{0, 0}}));
}

TEST(SolveLapProperty, TiedOptimaResolveCanonically) {
  // Small integer costs make ties the common case.
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> dim(1, 5), value(0, 2), mask(0, 3);
  for (int trial = 0; trial < 3000; ++trial) {
    Eigen::MatrixXd c(dim(rng), dim(rng));
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      for (Eigen::Index j = 0; j < c.cols(); ++j) c(i, j) = mask(rng) == 0 ? kForbidden : value(rng);
    }
    const auto r = solve_lap(c);
    std::vector<Eigen::Index> got(static_cast<std::size_t>(c.rows()), c.cols());
    for (auto [i, j] : r.matches) got[static_cast<std::size_t>(i)] = j;
    ASSERT_EQ(got, first_optimum(c)) << c;
  }
}
