#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <vector>

#include "tiertrack/error.hpp"
#include "tiertrack/geometry.hpp"

namespace tiertrack {

/// Mean (cx, cy, aspect, h, vcx, vcy, vaspect, vh) with its covariance. Rates are per frame.
template <typename Scalar>
struct KalmanState {
  Eigen::Matrix<Scalar, 8, 1> mean;
  Eigen::Matrix<Scalar, 8, 8> covariance;
};

/// Standard deviations are these weights times the track height.
template <typename Scalar>
struct NoiseProfile {
  Scalar position_weight = Scalar(1) / Scalar(20);
  Scalar velocity_weight = Scalar(1) / Scalar(160);
};

inline constexpr double kMaxInnovationCondition = 1e12;

namespace detail {

template <typename Scalar>
Eigen::Matrix<Scalar, 8, 8> transition() {
  Eigen::Matrix<Scalar, 8, 8> f = Eigen::Matrix<Scalar, 8, 8>::Identity();
  f.template topRightCorner<4, 4>().setIdentity();
  return f;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 4, 8> observation() {
  Eigen::Matrix<Scalar, 4, 8> h = Eigen::Matrix<Scalar, 4, 8>::Zero();
  h.template leftCols<4>().setIdentity();
  return h;
}

}  // namespace detail

/// Kalman correction for any linear-Gaussian model. The posterior covariance
/// uses the Joseph form and is re-symmetrized. Throws SingularInnovation when
/// the innovation covariance is not positive-definite or its condition number
/// exceeds kMaxInnovationCondition.
template <typename Scalar, int N, int M>
void kalman_correct(Eigen::Matrix<Scalar, N, 1>& mean, Eigen::Matrix<Scalar, N, N>& cov,
                    const Eigen::Matrix<Scalar, M, N>& obs, const Eigen::Matrix<Scalar, M, M>& noise,
                    const Eigen::Matrix<Scalar, M, 1>& measurement) {
  const Eigen::Matrix<Scalar, M, M> innovation_cov = obs * cov * obs.transpose() + noise;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, M, M>> eig(innovation_cov,
                                                                       Eigen::EigenvaluesOnly);
  const Scalar lo = eig.eigenvalues().minCoeff();
  const Scalar hi = eig.eigenvalues().maxCoeff();
  if (!(lo > Scalar(0)) || hi / lo > Scalar(kMaxInnovationCondition)) {
    throw SingularInnovation("innovation covariance is singular or ill-conditioned");
  }
  const Eigen::LDLT<Eigen::Matrix<Scalar, M, M>> ldlt(innovation_cov);
  // gain = P H^T S^-1, solved as S gain^T = H P
  const Eigen::Matrix<Scalar, N, M> gain = ldlt.solve(obs * cov).transpose();
  mean += gain * (measurement - obs * mean);
  const Eigen::Matrix<Scalar, N, N> joseph = Eigen::Matrix<Scalar, N, N>::Identity() - gain * obs;
  cov = joseph * cov * joseph.transpose() + gain * noise * gain.transpose();
  cov = (cov + cov.transpose()) / Scalar(2);
}

template <typename Scalar>
KalmanState<Scalar> kf_init(const Measurement<Scalar>& z, const NoiseProfile<Scalar>& profile) {
  const Scalar h = z(3);
  const Scalar pos = Scalar(2) * profile.position_weight * h;
  const Scalar vel = Scalar(10) * profile.velocity_weight * h;
  Eigen::Matrix<Scalar, 8, 1> std;
  std << pos, pos, Scalar(1e-2), pos, vel, vel, Scalar(1e-5), vel;

  KalmanState<Scalar> s;
  s.mean << z, Eigen::Matrix<Scalar, 4, 1>::Zero();
  s.covariance = std.array().square().matrix().asDiagonal();
  return s;
}

template <typename Scalar>
KalmanState<Scalar> kf_predict(const KalmanState<Scalar>& s, const NoiseProfile<Scalar>& profile) {
  const Scalar h = s.mean(3);
  const Scalar pos = profile.position_weight * h;
  const Scalar vel = profile.velocity_weight * h;
  Eigen::Matrix<Scalar, 8, 1> std;
  std << pos, pos, Scalar(1e-2), pos, vel, vel, Scalar(1e-5), vel;

  const auto f = detail::transition<Scalar>();
  KalmanState<Scalar> out;
  out.mean = f * s.mean;
  out.covariance = f * s.covariance * f.transpose();
  out.covariance.diagonal() += std.array().square().matrix();

  constexpr Scalar kFloor = Scalar(1e-3);
  for (int i : {2, 3}) {
    if (out.mean(i) <= Scalar(0)) {
      out.mean(i) = kFloor;
      out.mean(i + 4) = Scalar(0);
    }
  }
  return out;
}

template <typename Scalar>
KalmanState<Scalar> kf_update(const KalmanState<Scalar>& s, const Measurement<Scalar>& z,
                              const NoiseProfile<Scalar>& profile) {
  const Scalar pos = profile.position_weight * z(3);
  Eigen::Matrix<Scalar, 4, 1> std(pos, pos, Scalar(1e-1), pos);
  const Eigen::Matrix<Scalar, 4, 4> noise = std.array().square().matrix().asDiagonal();

  KalmanState<Scalar> out = s;
  kalman_correct<Scalar, 8, 4>(out.mean, out.covariance, detail::observation<Scalar>(), noise, z);
  return out;
}

/// Virtual observations for every frame strictly inside (last_frame, new_frame),
/// interpolated linearly in measurement space.
template <typename Scalar>
std::vector<Measurement<Scalar>> oos_virtual_observations(const Measurement<Scalar>& last_obs,
                                                          int last_frame,
                                                          const Measurement<Scalar>& new_obs,
                                                          int new_frame) {
  std::vector<Measurement<Scalar>> out;
  const int gap = new_frame - last_frame;
  for (int k = 1; k < gap; ++k) {
    out.push_back(last_obs + (Scalar(k) / Scalar(gap)) * (new_obs - last_obs));
  }
  return out;
}

/// Observation-centric re-update after a gap (new_frame > last_frame + 1).
/// Replays the filter from the posterior at the last observation through the
/// virtual observations and finally through `new_obs`.
template <typename Scalar>
KalmanState<Scalar> oos_rerun(const KalmanState<Scalar>& state_at_last_obs,
                              const Measurement<Scalar>& last_obs, int last_frame,
                              const Measurement<Scalar>& new_obs, int new_frame,
                              const NoiseProfile<Scalar>& profile) {
  KalmanState<Scalar> s = state_at_last_obs;
  for (const auto& z : oos_virtual_observations(last_obs, last_frame, new_obs, new_frame)) {
    s = kf_update(kf_predict(s, profile), z, profile);
  }
  return kf_update(kf_predict(s, profile), new_obs, profile);
}

}  // namespace tiertrack
