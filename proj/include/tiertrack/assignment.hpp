#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "tiertrack/records.hpp"

namespace tiertrack {

/// Marks an inadmissible cell in a cost matrix.
inline constexpr double kForbidden = std::numeric_limits<double>::infinity();

inline bool is_forbidden(double c) { return c == kForbidden; }

struct CostConfig {
  double lambda_iou = 0.5;
  double lambda_reid = 0.5;
  double iou_gate = 0.1;
  double embedding_momentum = 0.9;

  void validate() const;
};

struct AssignmentResult {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> matches;  // (row, column), ascending row
  std::vector<Eigen::Index> unmatched_rows;
  std::vector<Eigen::Index> unmatched_columns;
  double total_cost = 0.0;
};

/// Track-side inputs of the cost: the predicted (or last observed) box and the
/// maintained appearance, when there is one.
struct TrackCue {
  BBoxd box;
  const Eigen::VectorXd* embedding = nullptr;
};

/// 1 - u.v for unit vectors; throws DimensionMismatch on length mismatch.
double cosine_distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// Rows are detections, columns are tracks:
///   w_iou * (1 - IoU) + w_reid * cosine_distance
/// with the weights renormalized to sum to one. Without Re-ID (or with a zero
/// Re-ID weight) the entry is exactly 1 - IoU. Cells whose IoU is below the gate
/// are kForbidden regardless of appearance.
Eigen::MatrixXd fused_cost_matrix(std::span<const Detection> detections,
                                  std::span<const TrackCue> tracks, const CostConfig& cfg,
                                  bool use_reid);

namespace detail {

// Shortest-augmenting-path Hungarian method on a dense rows <= cols matrix.
// Returns the assigned column of each row together with dual potentials
// satisfying cost(i,j) >= row_potential[i] + col_potential[j].
struct DualSolution {
  std::vector<Eigen::Index> row_to_col;
  std::vector<double> row_potential;
  std::vector<double> col_potential;
};

DualSolution hungarian(const Eigen::MatrixXd& cost);

AssignmentResult solve_lap_dense(const Eigen::MatrixXd& costs);

}  // namespace detail

/// Optimal linear assignment over admissible cells. Among all matchings the one
/// with the most admissible pairs is chosen, and among those the cheapest.
/// Forbidden cells never appear in `matches`. Equal-cost optima resolve toward
/// lower rows first, each taking its lowest feasible column.
template <typename Derived>
AssignmentResult solve_lap(const Eigen::MatrixBase<Derived>& costs) {
  return detail::solve_lap_dense(costs.template cast<double>());
}

}  // namespace tiertrack
