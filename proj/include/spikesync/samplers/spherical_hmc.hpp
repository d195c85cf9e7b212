#pragma once

// Spherical HMC: a parameter in the D-dimensional unit ball is lifted to the
// unit sphere S^D in R^{D+1}; dynamics alternate tangent-space gradient kicks
// with exact geodesic rotations, so the constraint is never violated.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <utility>

#include <Eigen/Core>

#include "spikesync/errors.hpp"
#include "spikesync/random.hpp"

namespace spikesync {

struct SphericalPoint {
  Eigen::VectorXd theta_tilde; // unit norm, length D + 1

  Eigen::Index dim() const { return theta_tilde.size() - 1; }
  double last() const { return theta_tilde[theta_tilde.size() - 1]; }
  Eigen::VectorXd ball() const { return theta_tilde.head(dim()); }
};

/// theta -> (theta, +sqrt(1 - |theta|^2)).
inline SphericalPoint ball_to_sphere(const Eigen::VectorXd& theta) {
  const double r2 = theta.squaredNorm();
  require(std::sqrt(r2) <= 1.0 + 1e-12, "ball_to_sphere: |theta| exceeds 1");
  SphericalPoint p;
  p.theta_tilde.resize(theta.size() + 1);
  p.theta_tilde.head(theta.size()) = theta;
  p.theta_tilde[theta.size()] = std::sqrt(std::max(0.0, 1.0 - r2));
  return p;
}

inline Eigen::VectorXd sphere_to_ball(const SphericalPoint& p) { return p.ball(); }

/// Log-density and gradient with respect to the ball coordinates theta.
struct DensityGrad {
  double logdensity;
  Eigen::VectorXd grad;
};

/// Turns a density on the ball (Lebesgue measure) into the density on the
/// sphere (spherical measure) by adding log|theta_{D+1}| = 0.5 log(1 - |theta|^2).
template <class BallTarget>
auto sphere_target(BallTarget target) {
  return [target = std::move(target)](const Eigen::VectorXd& theta) -> DensityGrad {
    DensityGrad dg = target(theta);
    const double rem = 1.0 - theta.squaredNorm();
    if (rem <= 0.0) return {-std::numeric_limits<double>::infinity(), Eigen::VectorXd::Zero(theta.size())};
    dg.logdensity += 0.5 * std::log(rem);
    dg.grad -= theta / rem;
    return dg;
  };
}

struct HmcConfig {
  double step_size = 0.05;
  std::size_t leapfrog_steps = 10;
};

struct TrajectoryResult {
  SphericalPoint point;
  Eigen::VectorXd velocity;
  double logdensity = 0.0;
  double max_norm_error = 0.0; // max | |theta_tilde| - 1 | over inner steps, before renormalization
  bool finite = true;
};

/// Exact geodesic flow for time t from (x, v) with v tangent at x.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> geodesic_flow(const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                                                                 double t) {
  const double speed = v.norm();
  if (speed == 0.0) return {x, v};
  const double c = std::cos(speed * t);
  const double s = std::sin(speed * t);
  Eigen::VectorXd x1 = x * c + (v / speed) * s;
  Eigen::VectorXd v1 = -x * speed * s + v * c;
  return {std::move(x1), std::move(v1)};
}

namespace detail {
// Tangent projection of the ball-space gradient: ([I_D; 0] - x theta^T) g.
inline Eigen::VectorXd tangent_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
  const Eigen::Index d = g.size();
  Eigen::VectorXd out = -x * x.head(d).dot(g);
  out.head(d) += g;
  return out;
}
} // namespace detail

/// Runs `cfg.leapfrog_steps` split steps from (start, velocity). `target`
/// returns the log-density on the sphere (see sphere_target) and its
/// gradient in the first D coordinates.
template <class Target>
TrajectoryResult spherical_leapfrog(const SphericalPoint& start, Eigen::VectorXd velocity, Target&& target,
                                    const HmcConfig& cfg) {
  TrajectoryResult out;
  Eigen::VectorXd x = start.theta_tilde;
  const Eigen::Index d = start.dim();
  const double eps = cfg.step_size;
  DensityGrad dg = target(Eigen::VectorXd(x.head(d)));
  if (!std::isfinite(dg.logdensity) || !dg.grad.allFinite()) {
    out.finite = false;
    out.point = start;
    out.velocity = velocity;
    out.logdensity = dg.logdensity;
    return out;
  }
  for (std::size_t step = 0; step < cfg.leapfrog_steps; ++step) {
    // potential = -logdensity, so the kick adds +eps/2 * projected grad
    velocity += 0.5 * eps * detail::tangent_gradient(x, dg.grad);
    auto [x1, v1] = geodesic_flow(x, velocity, eps);
    out.max_norm_error = std::max(out.max_norm_error, std::abs(x1.norm() - 1.0));
    x = x1 / x1.norm();
    velocity = v1 - x * x.dot(v1);
    dg = target(Eigen::VectorXd(x.head(d)));
    if (!std::isfinite(dg.logdensity) || !dg.grad.allFinite()) {
      out.finite = false;
      break;
    }
    velocity += 0.5 * eps * detail::tangent_gradient(x, dg.grad);
  }
  out.point.theta_tilde = x;
  out.velocity = velocity;
  out.logdensity = dg.logdensity;
  return out;
}

struct HmcStepResult {
  SphericalPoint point;
  bool accepted = false;
  double delta_h = 0.0; // H(proposal) - H(current)
  double max_norm_error = 0.0;
};

/// One Metropolis-corrected Spherical HMC transition. The returned point is
/// always on the upper hemisphere (theta_{D+1} >= 0); the target is assumed
/// symmetric under reflection of the last coordinate.
template <class Target, class R>
HmcStepResult spherical_hmc_step(const SphericalPoint& current, Target&& target, const HmcConfig& cfg, R& rng) {
  require(cfg.step_size > 0.0 && cfg.leapfrog_steps >= 1, "spherical HMC: step size and step count must be positive");
  const Eigen::VectorXd& x0 = current.theta_tilde;
  require(std::abs(x0.norm() - 1.0) < 1e-8, "spherical HMC: current point is not on the unit sphere");

  Eigen::VectorXd v = standard_normal_vector(rng, x0.size());
  v -= x0 * x0.dot(v);

  const double logd0 = target(Eigen::VectorXd(x0.head(current.dim()))).logdensity;
  if (!std::isfinite(logd0)) throw NumericalError("spherical HMC: log-density at the current point is not finite");
  const double h0 = -logd0 + 0.5 * v.squaredNorm();

  TrajectoryResult traj = spherical_leapfrog(current, v, target, cfg);
  HmcStepResult res;
  res.max_norm_error = traj.max_norm_error;
  if (!traj.finite) {
    res.point = current;
    res.delta_h = std::numeric_limits<double>::infinity();
    return res;
  }
  const double h1 = -traj.logdensity + 0.5 * traj.velocity.squaredNorm();
  res.delta_h = h1 - h0;
  const bool accept = std::isfinite(res.delta_h) && std::log(uniform01(rng)) < -res.delta_h;
  res.accepted = accept;
  res.point = accept ? traj.point : current;
  auto& last = res.point.theta_tilde[res.point.theta_tilde.size() - 1];
  last = std::abs(last);
  res.point.theta_tilde /= res.point.theta_tilde.norm();
  return res;
}

} // namespace spikesync
