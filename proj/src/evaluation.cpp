#include "tiertrack/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "tiertrack/assignment.hpp"
#include "tiertrack/error.hpp"
#include "tiertrack/geometry.hpp"

namespace tiertrack {
namespace {

struct FrameBoxes {
  std::vector<int> ids;
  std::vector<BBoxd> boxes;
};

using FrameMap = std::map<int, FrameBoxes>;

FrameMap group_gt(std::span<const GtBox> gt) {
  FrameMap out;
  for (const auto& g : gt) {
    auto& f = out[g.frame];
    f.ids.push_back(g.track_id);
    f.boxes.push_back(g.bbox);
  }
  return out;
}

FrameMap group_pred(std::span<const TrackRecord> pred) {
  FrameMap out;
  for (const auto& p : pred) {
    auto& f = out[p.frame];
    f.ids.push_back(p.track_id);
    f.boxes.push_back(p.bbox);
  }
  return out;
}

std::set<int> frame_union(const FrameMap& a, const FrameMap& b) {
  std::set<int> frames;
  for (const auto& [f, _] : a) frames.insert(f);
  for (const auto& [f, _] : b) frames.insert(f);
  return frames;
}

const FrameBoxes& at_or_empty(const FrameMap& m, int frame) {
  static const FrameBoxes kEmpty;
  const auto it = m.find(frame);
  return it == m.end() ? kEmpty : it->second;
}

Eigen::MatrixXd iou_matrix(const std::vector<BBoxd>& rows, const std::vector<BBoxd>& cols) {
  Eigen::MatrixXd s(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      s(i, j) = iou(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
    }
  }
  return s;
}

// Threshold-gated IoU assignment between two box sets.
AssignmentResult match_boxes(const Eigen::MatrixXd& sim, double threshold) {
  const Eigen::MatrixXd cost = sim.unaryExpr([threshold](double s) { return s >= threshold ? 1.0 - s : kForbidden; });
  return solve_lap(cost);
}

std::unordered_map<int, Eigen::Index> index_ids(const FrameMap& frames) {
  std::set<int> ids;
  for (const auto& [_, f] : frames) ids.insert(f.ids.begin(), f.ids.end());
  std::unordered_map<int, Eigen::Index> out;
  for (int id : ids) out.emplace(id, static_cast<Eigen::Index>(out.size()));
  return out;
}

void tally_clear(const FrameMap& gtf, const FrameMap& prf, double threshold, SequenceMetrics& m) {
  std::unordered_map<int, int> last_match;
  for (int frame : frame_union(gtf, prf)) {
    const FrameBoxes& g = at_or_empty(gtf, frame);
    const FrameBoxes& p = at_or_empty(prf, frame);
    const Eigen::MatrixXd sim = iou_matrix(g.boxes, p.boxes);
    std::vector<bool> g_used(g.ids.size(), false), p_used(p.ids.size(), false);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;

    for (std::size_t i = 0; i < g.ids.size(); ++i) {
      const auto it = last_match.find(g.ids[i]);
      if (it == last_match.end()) continue;
      for (std::size_t j = 0; j < p.ids.size(); ++j) {
        if (p.ids[j] == it->second && !p_used[j] &&
            sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >= threshold) {
          g_used[i] = p_used[j] = true;
          pairs.emplace_back(i, j);
          break;
        }
      }
    }

    std::vector<std::size_t> free_g, free_p;
    for (std::size_t i = 0; i < g_used.size(); ++i) if (!g_used[i]) free_g.push_back(i);
    for (std::size_t j = 0; j < p_used.size(); ++j) if (!p_used[j]) free_p.push_back(j);
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(free_g.size()), static_cast<Eigen::Index>(free_p.size()));
    for (Eigen::Index r = 0; r < sub.rows(); ++r) {
      for (Eigen::Index c = 0; c < sub.cols(); ++c) {
        sub(r, c) = sim(static_cast<Eigen::Index>(free_g[static_cast<std::size_t>(r)]),
                        static_cast<Eigen::Index>(free_p[static_cast<std::size_t>(c)]));
      }
    }
    for (const auto& [r, c] : match_boxes(sub, threshold).matches) {
      pairs.emplace_back(free_g[static_cast<std::size_t>(r)], free_p[static_cast<std::size_t>(c)]);
    }

    for (const auto& [i, j] : pairs) {
      const int gid = g.ids[i], pid = p.ids[j];
      const auto it = last_match.find(gid);
      if (it != last_match.end() && it->second != pid) ++m.id_switches;
      last_match[gid] = pid;
    }
    m.matches += pairs.size();
    m.fp += p.ids.size() - pairs.size();
    m.fn += g.ids.size() - pairs.size();
  }
}

void tally_hota(const FrameMap& gtf, const FrameMap& prf, SequenceMetrics& m) {
  const auto gidx = index_ids(gtf);
  const auto pidx = index_ids(prf);
  const auto n_g = static_cast<Eigen::Index>(gidx.size());
  const auto n_p = static_cast<Eigen::Index>(pidx.size());
  const std::set<int> frames = frame_union(gtf, prf);
  constexpr double eps = std::numeric_limits<double>::epsilon();

  Eigen::VectorXd gt_id_count = Eigen::VectorXd::Zero(n_g);
  Eigen::VectorXd pr_id_count = Eigen::VectorXd::Zero(n_p);
  Eigen::MatrixXd potential = Eigen::MatrixXd::Zero(n_g, n_p);
  for (int frame : frames) {
    const FrameBoxes& g = at_or_empty(gtf, frame);
    const FrameBoxes& p = at_or_empty(prf, frame);
    const Eigen::MatrixXd sim = iou_matrix(g.boxes, p.boxes);
    const Eigen::VectorXd row_sum = sim.rowwise().sum();
    const Eigen::RowVectorXd col_sum = sim.colwise().sum();
    for (Eigen::Index i = 0; i < sim.rows(); ++i) {
      for (Eigen::Index j = 0; j < sim.cols(); ++j) {
        const double denom = row_sum(i) + col_sum(j) - sim(i, j);
        if (denom > eps) {
          potential(gidx.at(g.ids[static_cast<std::size_t>(i)]), pidx.at(p.ids[static_cast<std::size_t>(j)])) +=
              sim(i, j) / denom;
        }
      }
    }
    for (int id : g.ids) gt_id_count(gidx.at(id)) += 1.0;
    for (int id : p.ids) pr_id_count(pidx.at(id)) += 1.0;
  }
  Eigen::MatrixXd alignment = Eigen::MatrixXd::Zero(n_g, n_p);
  for (Eigen::Index i = 0; i < n_g; ++i) {
    for (Eigen::Index j = 0; j < n_p; ++j) {
      const double denom = gt_id_count(i) + pr_id_count(j) - potential(i, j);
      if (denom > 0.0) alignment(i, j) = potential(i, j) / denom;
    }
  }

  const auto alphas = hota_alphas();
  std::vector<Eigen::MatrixXd> match_counts(kHotaAlphaCount, Eigen::MatrixXd::Zero(n_g, n_p));
  for (int frame : frames) {
    const FrameBoxes& g = at_or_empty(gtf, frame);
    const FrameBoxes& p = at_or_empty(prf, frame);
    const Eigen::MatrixXd sim = iou_matrix(g.boxes, p.boxes);
    Eigen::MatrixXd neg_score(sim.rows(), sim.cols());
    for (Eigen::Index i = 0; i < sim.rows(); ++i) {
      for (Eigen::Index j = 0; j < sim.cols(); ++j) {
        neg_score(i, j) = -alignment(gidx.at(g.ids[static_cast<std::size_t>(i)]),
                                     pidx.at(p.ids[static_cast<std::size_t>(j)])) * sim(i, j);
      }
    }
    const AssignmentResult lap = solve_lap(neg_score);
    for (std::size_t a = 0; a < kHotaAlphaCount; ++a) {
      double n = 0.0;
      for (const auto& [i, j] : lap.matches) {
        if (sim(i, j) >= alphas[a] - eps) {
          n += 1.0;
          match_counts[a](gidx.at(g.ids[static_cast<std::size_t>(i)]),
                          pidx.at(p.ids[static_cast<std::size_t>(j)])) += 1.0;
        }
      }
      m.hota_tp[a] += n;
      m.hota_fn[a] += static_cast<double>(g.ids.size()) - n;
      m.hota_fp[a] += static_cast<double>(p.ids.size()) - n;
    }
  }
  for (std::size_t a = 0; a < kHotaAlphaCount; ++a) {
    const Eigen::MatrixXd& mc = match_counts[a];
    for (Eigen::Index i = 0; i < n_g; ++i) {
      for (Eigen::Index j = 0; j < n_p; ++j) {
        if (mc(i, j) == 0.0) continue;
        const double ass = mc(i, j) / std::max(1.0, gt_id_count(i) + pr_id_count(j) - mc(i, j));
        m.hota_assoc[a] += mc(i, j) * ass;
      }
    }
  }
}

void finalize(SequenceMetrics& m) {
  if (m.gt_count == 0) throw EmptyGroundTruth();
  m.mota = 1.0 - static_cast<double>(m.fp + m.fn + m.id_switches) / static_cast<double>(m.gt_count);
  m.idf1 = 2.0 * static_cast<double>(m.idtp) / static_cast<double>(m.gt_count + m.pred_count);
  double sum = 0.0;
  for (std::size_t a = 0; a < kHotaAlphaCount; ++a) {
    const double det_a = m.hota_tp[a] / std::max(1.0, m.hota_tp[a] + m.hota_fn[a] + m.hota_fp[a]);
    const double ass_a = m.hota_assoc[a] / std::max(1.0, m.hota_tp[a]);
    sum += std::sqrt(det_a * ass_a);
  }
  m.hota = sum / static_cast<double>(kHotaAlphaCount);
}

}  // namespace

std::array<double, kHotaAlphaCount> hota_alphas() {
  std::array<double, kHotaAlphaCount> a{};
  for (std::size_t i = 0; i < kHotaAlphaCount; ++i) a[i] = 0.05 * static_cast<double>(i + 1);
  return a;
}

std::vector<GtBox> evaluable_groundtruth(std::span<const GtBox> gt) {
  std::vector<GtBox> out;
  for (const auto& g : gt) {
    if (!g.ignore && g.visibility >= 0.1) out.push_back(g);
  }
  return out;
}

SequenceMetrics clear_metrics(std::span<const GtBox> gt, std::span<const TrackRecord> pred,
                              double iou_threshold) {
  const auto eval_gt = evaluable_groundtruth(gt);
  if (eval_gt.empty()) throw EmptyGroundTruth();
  SequenceMetrics m;
  m.gt_count = eval_gt.size();
  m.pred_count = pred.size();
  tally_clear(group_gt(eval_gt), group_pred(pred), iou_threshold, m);
  m.mota = 1.0 - static_cast<double>(m.fp + m.fn + m.id_switches) / static_cast<double>(m.gt_count);
  return m;
}

IdentityMatching identity_matching(std::span<const GtBox> gt, std::span<const TrackRecord> pred,
                                   double iou_threshold) {
  const auto eval_gt = evaluable_groundtruth(gt);
  const FrameMap gtf = group_gt(eval_gt);
  const FrameMap prf = group_pred(pred);
  const auto gidx = index_ids(gtf);
  const auto pidx = index_ids(prf);

  IdentityMatching out;
  out.gt_count = eval_gt.size();
  out.pred_count = pred.size();
  Eigen::MatrixXd shared = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(gidx.size()),
                                                 static_cast<Eigen::Index>(pidx.size()));
  for (int frame : frame_union(gtf, prf)) {
    const FrameBoxes& g = at_or_empty(gtf, frame);
    const FrameBoxes& p = at_or_empty(prf, frame);
    const Eigen::MatrixXd sim = iou_matrix(g.boxes, p.boxes);
    for (Eigen::Index i = 0; i < sim.rows(); ++i) {
      for (Eigen::Index j = 0; j < sim.cols(); ++j) {
        if (sim(i, j) >= iou_threshold) {
          shared(gidx.at(g.ids[static_cast<std::size_t>(i)]), pidx.at(p.ids[static_cast<std::size_t>(j)])) += 1.0;
        }
      }
    }
  }
  if (shared.size() == 0) return out;

  std::vector<int> gid_of(gidx.size()), pid_of(pidx.size());
  for (const auto& [id, k] : gidx) gid_of[static_cast<std::size_t>(k)] = id;
  for (const auto& [id, k] : pidx) pid_of[static_cast<std::size_t>(k)] = id;
  const Eigen::MatrixXd neg = -shared;
  for (const auto& [i, j] : solve_lap(neg).matches) {
    if (shared(i, j) <= 0.0) continue;
    out.idtp += static_cast<std::size_t>(shared(i, j));
    out.pred_to_gt.emplace(pid_of[static_cast<std::size_t>(j)], gid_of[static_cast<std::size_t>(i)]);
  }
  return out;
}

double idf1(std::span<const GtBox> gt, std::span<const TrackRecord> pred, double iou_threshold) {
  const IdentityMatching im = identity_matching(gt, pred, iou_threshold);
  if (im.gt_count == 0) throw EmptyGroundTruth();
  return 2.0 * static_cast<double>(im.idtp) / static_cast<double>(im.gt_count + im.pred_count);
}

double hota(std::span<const GtBox> gt, std::span<const TrackRecord> pred) {
  const auto eval_gt = evaluable_groundtruth(gt);
  if (eval_gt.empty()) throw EmptyGroundTruth();
  SequenceMetrics m;
  m.gt_count = eval_gt.size();
  m.pred_count = pred.size();
  tally_hota(group_gt(eval_gt), group_pred(pred), m);
  finalize(m);
  return m.hota;
}

SequenceMetrics evaluate_sequence(std::span<const GtBox> gt, std::span<const TrackRecord> pred,
                                  double iou_threshold) {
  const auto eval_gt = evaluable_groundtruth(gt);
  if (eval_gt.empty()) throw EmptyGroundTruth();
  const FrameMap gtf = group_gt(eval_gt);
  const FrameMap prf = group_pred(pred);
  SequenceMetrics m;
  m.gt_count = eval_gt.size();
  m.pred_count = pred.size();
  tally_clear(gtf, prf, iou_threshold, m);
  m.idtp = identity_matching(eval_gt, pred, iou_threshold).idtp;
  tally_hota(gtf, prf, m);
  finalize(m);
  return m;
}

SequenceMetrics aggregate(std::span<const SequenceMetrics> sequences) {
  SequenceMetrics total;
  for (const auto& s : sequences) {
    total.fp += s.fp;
    total.fn += s.fn;
    total.id_switches += s.id_switches;
    total.gt_count += s.gt_count;
    total.pred_count += s.pred_count;
    total.matches += s.matches;
    total.idtp += s.idtp;
    for (std::size_t a = 0; a < kHotaAlphaCount; ++a) {
      total.hota_tp[a] += s.hota_tp[a];
      total.hota_fn[a] += s.hota_fn[a];
      total.hota_fp[a] += s.hota_fp[a];
      total.hota_assoc[a] += s.hota_assoc[a];
    }
  }
  finalize(total);
  return total;
}

std::vector<int> rank_track_classes(std::span<const Eigen::VectorXd> logits, VoteScheme scheme) {
  if (logits.empty()) throw EmptyTrack();
  const Eigen::Index k = logits.front().size();
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd votes = Eigen::VectorXd::Zero(k);
  for (const auto& l : logits) {
    if (l.size() != k) throw DimensionMismatch("logit lengths differ within a track");
    sums += l;
    Eigen::Index best = 0;
    l.maxCoeff(&best);
    votes(best) += 1.0;
  }
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (scheme == VoteScheme::MajorityVote && votes(a) != votes(b)) return votes(a) > votes(b);
    return sums(a) > sums(b);
  });
  return order;
}

int track_based_prediction(std::span<const Eigen::VectorXd> logits, VoteScheme scheme) {
  return rank_track_classes(logits, scheme).front();
}

std::vector<int> rank_logits(const Eigen::VectorXd& logits) {
  std::vector<int> order(static_cast<std::size_t>(logits.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return logits(a) > logits(b); });
  return order;
}

double topk_accuracy(std::span<const std::vector<int>> ranked, std::span<const int> truth, std::size_t k) {
  if (ranked.size() != truth.size()) throw std::invalid_argument("ranked and truth sizes differ");
  if (ranked.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& r = ranked[i];
    const auto end = r.begin() + static_cast<std::ptrdiff_t>(std::min(k, r.size()));
    if (std::find(r.begin(), end, truth[i]) != end) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ranked.size());
}

ClassificationReport classification_report(std::span<const std::vector<int>> ranked,
                                           std::span<const int> truth) {
  ClassificationReport r;
  r.items = ranked.size();
  r.top1 = topk_accuracy(ranked, truth, 1);
  r.top3 = topk_accuracy(ranked, truth, 3);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (!ranked[i].empty()) ++r.confusion[{truth[i], ranked[i].front()}];
  }
  return r;
}

namespace {

std::map<int, int> class_by_gt_id(std::span<const GtBox> gt) {
  std::map<int, int> out;
  for (const auto& g : gt) out.emplace(g.track_id, g.class_id);
  return out;
}

std::map<int, std::vector<const Detection*>> detections_with_logits_by_frame(std::span<const Detection> dets) {
  std::map<int, std::vector<const Detection*>> out;
  for (const auto& d : dets) {
    if (d.logits) out[d.frame].push_back(&d);
  }
  return out;
}

}  // namespace

ClassificationReport classify_tracks(std::span<const GtBox> gt, std::span<const TrackRecord> tracks,
                                     std::span<const Detection> detections, VoteScheme scheme,
                                     double iou_threshold) {
  const auto eval_gt = evaluable_groundtruth(gt);
  const IdentityMatching im = identity_matching(eval_gt, tracks, iou_threshold);
  const auto species = class_by_gt_id(eval_gt);
  const auto dets_by_frame = detections_with_logits_by_frame(detections);

  std::map<int, std::vector<Eigen::VectorXd>> logits_by_track;
  const FrameMap rows = group_pred(tracks);
  for (const auto& [frame, f] : rows) {
    const auto it = dets_by_frame.find(frame);
    if (it == dets_by_frame.end()) continue;
    std::vector<BBoxd> det_boxes;
    for (const Detection* d : it->second) det_boxes.push_back(d->bbox);
    for (const auto& [i, j] : match_boxes(iou_matrix(f.boxes, det_boxes), 0.5).matches) {
      logits_by_track[f.ids[static_cast<std::size_t>(i)]].push_back(
          *it->second[static_cast<std::size_t>(j)]->logits);
    }
  }

  std::vector<std::vector<int>> ranked;
  std::vector<int> truth;
  for (const auto& [track_id, logits] : logits_by_track) {
    const auto m = im.pred_to_gt.find(track_id);
    if (m == im.pred_to_gt.end()) continue;
    ranked.push_back(rank_track_classes(logits, scheme));
    truth.push_back(species.at(m->second));
  }
  return classification_report(ranked, truth);
}

ClassificationReport classify_images(std::span<const GtBox> gt, std::span<const Detection> detections,
                                     double iou_threshold) {
  const FrameMap gtf = group_gt(evaluable_groundtruth(gt));
  const auto species = class_by_gt_id(evaluable_groundtruth(gt));
  std::vector<std::vector<int>> ranked;
  std::vector<int> truth;
  for (const auto& [frame, dets] : detections_with_logits_by_frame(detections)) {
    const auto it = gtf.find(frame);
    if (it == gtf.end()) continue;
    std::vector<BBoxd> det_boxes;
    for (const Detection* d : dets) det_boxes.push_back(d->bbox);
    for (const auto& [i, j] : match_boxes(iou_matrix(det_boxes, it->second.boxes), iou_threshold).matches) {
      ranked.push_back(rank_logits(*dets[static_cast<std::size_t>(i)]->logits));
      truth.push_back(species.at(it->second.ids[static_cast<std::size_t>(j)]));
    }
  }
  return classification_report(ranked, truth);
}

}  // namespace tiertrack
