#include "tiertrack/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tiertrack/error.hpp"
#include "tiertrack/geometry.hpp"

namespace tiertrack {

void CostConfig::validate() const {
  if (!(lambda_iou >= 0.0) || !(lambda_reid >= 0.0) || !(lambda_iou + lambda_reid > 0.0)) {
    throw ConfigInvalid("cost weights must be non-negative with a positive sum");
  }
  if (!(iou_gate >= 0.0 && iou_gate <= 1.0)) throw ConfigInvalid("cost.iou_gate must lie in [0,1]");
  if (!(embedding_momentum >= 0.0 && embedding_momentum < 1.0)) {
    throw ConfigInvalid("cost.embedding_momentum must lie in [0,1)");
  }
}

double cosine_distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) {
    throw DimensionMismatch("embedding lengths " + std::to_string(u.size()) + " and " +
                            std::to_string(v.size()) + " differ");
  }
  return 1.0 - u.dot(v);
}

Eigen::MatrixXd fused_cost_matrix(std::span<const Detection> detections,
                                  std::span<const TrackCue> tracks, const CostConfig& cfg,
                                  bool use_reid) {
  const bool reid = use_reid && cfg.lambda_reid > 0.0;
  const double w_iou = reid ? cfg.lambda_iou / (cfg.lambda_iou + cfg.lambda_reid) : 1.0;
  const double w_reid = reid ? cfg.lambda_reid / (cfg.lambda_iou + cfg.lambda_reid) : 0.0;

  if (reid) {
    for (const auto& d : detections) {
      if (!d.embedding) throw MissingEmbedding("detection without embedding under Re-ID cost");
    }
    for (const auto& t : tracks) {
      if (t.embedding == nullptr) throw MissingEmbedding("track without embedding under Re-ID cost");
    }
  }

  const auto rows = static_cast<Eigen::Index>(detections.size());
  const auto cols = static_cast<Eigen::Index>(tracks.size());
  Eigen::MatrixXd cost(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Detection& d = detections[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < cols; ++j) {
      const TrackCue& t = tracks[static_cast<std::size_t>(j)];
      const double overlap = iou(d.bbox, t.box);
      if (overlap < cfg.iou_gate) {
        cost(i, j) = kForbidden;
      } else if (reid) {
        cost(i, j) = w_iou * (1.0 - overlap) + w_reid * cosine_distance(*d.embedding, *t.embedding);
      } else {
        cost(i, j) = 1.0 - overlap;
      }
    }
  }
  return cost;
}

namespace detail {

DualSolution hungarian(const Eigen::MatrixXd& cost) {
  const Eigen::Index n = cost.rows(), m = cost.cols();
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is the virtual source of each augmentation.
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(m + 1), 0.0);
  std::vector<Eigen::Index> owner(static_cast<std::size_t>(m + 1), 0), way(static_cast<std::size_t>(m + 1), 0);
  std::vector<double> min_slack(static_cast<std::size_t>(m + 1));
  std::vector<char> used(static_cast<std::size_t>(m + 1));

  for (Eigen::Index i = 1; i <= n; ++i) {
    owner[0] = i;
    Eigen::Index j0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Eigen::Index i0 = owner[static_cast<std::size_t>(j0)];
      double delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= m; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) continue;
        const double slack = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[sj];
        if (slack < min_slack[sj]) {
          min_slack[sj] = slack;
          way[sj] = j0;
        }
        if (min_slack[sj] < delta) {
          delta = min_slack[sj];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= m; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) {
          u[static_cast<std::size_t>(owner[sj])] += delta;
          v[sj] -= delta;
        } else {
          min_slack[sj] -= delta;
        }
      }
      j0 = j1;
    } while (owner[static_cast<std::size_t>(j0)] != 0);
    do {
      const Eigen::Index j1 = way[static_cast<std::size_t>(j0)];
      owner[static_cast<std::size_t>(j0)] = owner[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  DualSolution out;
  out.row_to_col.assign(static_cast<std::size_t>(n), -1);
  for (Eigen::Index j = 1; j <= m; ++j) {
    const Eigen::Index i = owner[static_cast<std::size_t>(j)];
    if (i != 0) out.row_to_col[static_cast<std::size_t>(i - 1)] = j - 1;
  }
  out.row_potential.assign(u.begin() + 1, u.end());
  out.col_potential.assign(v.begin() + 1, v.end());
  return out;
}

namespace {

// Picks the lexicographically smallest optimum among all optimal matchings of
// the dense problem. Every optimum uses only tight cells (zero reduced cost)
// and covers every column with a negative potential, so the search runs on
// that tight graph, padded with dummy rows to make it square. Preferences are
// fixed one original row at a time by rotating the current perfect matching
// along an alternating cycle.
class TieBreaker {
 public:
  TieBreaker(const Eigen::MatrixXd& dense, const std::vector<char>& big, const DualSolution& dual,
             bool transposed)
      : dense_(dense), big_(big), dual_(dual), transposed_(transposed), n_(dense.rows()), m_(dense.cols()) {
    const double scale = std::max(1.0, dense.cwiseAbs().maxCoeff());
    tol_ = 64.0 * std::numeric_limits<double>::epsilon() * scale * static_cast<double>(n_ + 1);
    const auto N = static_cast<std::size_t>(m_);
    match_.assign(N, -1);
    owner_.assign(N, -1);
    row_fixed_.assign(N, 0);
    col_fixed_.assign(N, 0);
    row_big_only_.assign(N, 0);
    col_big_only_.assign(N, 0);
    for (Eigen::Index i = 0; i < n_; ++i) assign(i, dual.row_to_col[static_cast<std::size_t>(i)]);
    Eigen::Index dummy = n_;
    for (Eigen::Index j = 0; j < m_; ++j) {
      if (owner_[static_cast<std::size_t>(j)] < 0) assign(dummy++, j);
    }
  }

  // Dense row -> column, or empty when the refinement could not complete.
  std::optional<std::vector<Eigen::Index>> run() {
    const Eigen::Index original_rows = transposed_ ? m_ : n_;
    const Eigen::Index original_cols = transposed_ ? n_ : m_;
    for (Eigen::Index i = 0; i < original_rows; ++i) {
      bool placed = false;
      for (Eigen::Index j = 0; j < original_cols && !placed; ++j) {
        const Eigen::Index r = transposed_ ? j : i, c = transposed_ ? i : j;
        if (is_big(r, c) || row_fixed_[static_cast<std::size_t>(r)] || col_fixed_[static_cast<std::size_t>(c)]) continue;
        if (match_[static_cast<std::size_t>(r)] == c || (allowed(r, c) && rotate_in(r, c))) {
          row_fixed_[static_cast<std::size_t>(r)] = col_fixed_[static_cast<std::size_t>(c)] = 1;
          placed = true;
        }
      }
      if (!placed && !leave_unmatched(i)) return std::nullopt;
    }
    std::vector<Eigen::Index> out(match_.begin(), match_.begin() + n_);
    return out;
  }

 private:
  bool is_dummy(Eigen::Index r) const { return r >= n_; }
  bool is_big(Eigen::Index r, Eigen::Index c) const {
    return !is_dummy(r) && big_[static_cast<std::size_t>(r * m_ + c)];
  }
  bool required(Eigen::Index c) const { return dual_.col_potential[static_cast<std::size_t>(c)] < -tol_; }

  bool allowed(Eigen::Index r, Eigen::Index c) const {
    if (is_dummy(r)) return !required(c);
    if (row_big_only_[static_cast<std::size_t>(r)] && !is_big(r, c)) return false;
    if (col_big_only_[static_cast<std::size_t>(c)] && !is_big(r, c)) return false;
    const double reduced = dense_(r, c) - dual_.row_potential[static_cast<std::size_t>(r)] -
                           dual_.col_potential[static_cast<std::size_t>(c)];
    return reduced <= tol_;
  }

  void assign(Eigen::Index r, Eigen::Index c) {
    match_[static_cast<std::size_t>(r)] = c;
    owner_[static_cast<std::size_t>(c)] = r;
  }

  // Moves edge (r, c) into the matching through an alternating cycle
  // c -> owner(c) -> ... -> r, keeping fixed rows and columns untouched.
  bool rotate_in(Eigen::Index r, Eigen::Index c) {
    const auto N = static_cast<std::size_t>(m_);
    std::vector<Eigen::Index> from(N, -1);
    std::vector<char> seen(N, 0);
    std::vector<Eigen::Index> queue{c};
    seen[static_cast<std::size_t>(c)] = 1;
    Eigen::Index end = -1;
    for (std::size_t head = 0; head < queue.size() && end < 0; ++head) {
      const Eigen::Index col = queue[head];
      const Eigen::Index row = owner_[static_cast<std::size_t>(col)];
      if (row == r) {
        end = col;
        break;
      }
      for (Eigen::Index next = 0; next < m_; ++next) {
        const auto sn = static_cast<std::size_t>(next);
        if (seen[sn] || col_fixed_[sn] || next == col || !allowed(row, next)) continue;
        seen[sn] = 1;
        from[sn] = col;
        queue.push_back(next);
      }
    }
    if (end < 0) return false;
    std::vector<Eigen::Index> chain;
    for (Eigen::Index col = end; col != c; col = from[static_cast<std::size_t>(col)]) chain.push_back(col);
    chain.push_back(c);
    std::reverse(chain.begin(), chain.end());  // c = x0, x1, ..., xk = end
    std::vector<Eigen::Index> rows;
    for (auto col : chain) rows.push_back(owner_[static_cast<std::size_t>(col)]);
    for (std::size_t t = 0; t + 1 < chain.size(); ++t) assign(rows[t], chain[t + 1]);
    assign(r, c);
    return true;
  }

  // Restricts original row i to forbidden cells (or no partner) for good.
  bool leave_unmatched(Eigen::Index i) {
    if (!transposed_) {
      row_big_only_[static_cast<std::size_t>(i)] = 1;
      if (is_big(i, match_[static_cast<std::size_t>(i)])) return true;
      for (Eigen::Index c = 0; c < m_; ++c) {
        if (!col_fixed_[static_cast<std::size_t>(c)] && allowed(i, c) && rotate_in(i, c)) return true;
      }
      return false;
    }
    col_big_only_[static_cast<std::size_t>(i)] = 1;
    const Eigen::Index r0 = owner_[static_cast<std::size_t>(i)];
    if (is_dummy(r0) || is_big(r0, i)) return true;
    for (Eigen::Index r = 0; r < m_; ++r) {
      if (!row_fixed_[static_cast<std::size_t>(r)] && allowed(r, i) && rotate_in(r, i)) return true;
    }
    return false;
  }

  const Eigen::MatrixXd& dense_;
  const std::vector<char>& big_;
  const DualSolution& dual_;
  bool transposed_;
  Eigen::Index n_, m_;
  double tol_ = 0.0;
  std::vector<Eigen::Index> match_, owner_;
  std::vector<char> row_fixed_, col_fixed_, row_big_only_, col_big_only_;
};

AssignmentResult collect(const Eigen::MatrixXd& c, const std::vector<Eigen::Index>& row_to_col) {
  AssignmentResult result;
  std::vector<bool> col_used(static_cast<std::size_t>(c.cols()), false);
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    const Eigen::Index j = row_to_col[static_cast<std::size_t>(i)];
    if (j >= 0 && !is_forbidden(c(i, j))) {
      result.matches.emplace_back(i, j);
      result.total_cost += c(i, j);
      col_used[static_cast<std::size_t>(j)] = true;
    } else {
      result.unmatched_rows.push_back(i);
    }
  }
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    if (!col_used[static_cast<std::size_t>(j)]) result.unmatched_columns.push_back(j);
  }
  return result;
}

// Dense row assignment back in original orientation.
std::vector<Eigen::Index> to_original(const std::vector<Eigen::Index>& dense_rows, Eigen::Index rows,
                                      bool transposed) {
  if (!transposed) return dense_rows;
  std::vector<Eigen::Index> out(static_cast<std::size_t>(rows), -1);
  for (std::size_t j = 0; j < dense_rows.size(); ++j) {
    out[static_cast<std::size_t>(dense_rows[j])] = static_cast<Eigen::Index>(j);
  }
  return out;
}

}  // namespace

AssignmentResult solve_lap_dense(const Eigen::MatrixXd& c) {
  const Eigen::Index rows = c.rows(), cols = c.cols();
  double max_abs = 0.0;
  bool any_admissible = false;
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (!is_forbidden(c(i, j))) {
        max_abs = std::max(max_abs, std::abs(c(i, j)));
        any_admissible = true;
      }
    }
  }
  if (!any_admissible) return collect(c, std::vector<Eigen::Index>(static_cast<std::size_t>(rows), -1));

  // A forbidden cell costs more than any admissible matching can differ by,
  // so the solver first minimizes the number of forbidden pairs.
  const double big = 2.0 * static_cast<double>(std::min(rows, cols)) * max_abs + 1.0;
  const bool transposed = rows > cols;
  const Eigen::MatrixXd oriented = transposed ? Eigen::MatrixXd(c.transpose()) : c;
  const Eigen::MatrixXd dense = oriented.unaryExpr([big](double v) { return is_forbidden(v) ? big : v; });
  std::vector<char> big_cells(static_cast<std::size_t>(dense.size()));
  for (Eigen::Index i = 0; i < dense.rows(); ++i) {
    for (Eigen::Index j = 0; j < dense.cols(); ++j) {
      big_cells[static_cast<std::size_t>(i * dense.cols() + j)] = is_forbidden(oriented(i, j));
    }
  }

  const DualSolution dual = hungarian(dense);
  AssignmentResult plain = collect(c, to_original(dual.row_to_col, rows, transposed));
  const auto refined_rows = TieBreaker(dense, big_cells, dual, transposed).run();
  if (!refined_rows) return plain;
  AssignmentResult refined = collect(c, to_original(*refined_rows, rows, transposed));
  // Guard against tolerance effects: the refinement may only reorder ties.
  const double slack = 1e-9 * std::max(1.0, std::abs(plain.total_cost));
  if (refined.matches.size() != plain.matches.size() || refined.total_cost > plain.total_cost + slack) return plain;
  return refined;
}

}  // namespace detail
}  // namespace tiertrack
