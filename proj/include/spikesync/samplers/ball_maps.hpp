#pragma once

// Radial bijection between the L1 unit ball {sum |beta_i| <= 1} and the L2
// unit ball. Each ray from the origin is rescaled so the L1 sphere lands on
// the L2 sphere:
//   theta = beta * |beta|_1 / |beta|_2,   beta = theta * |theta|_2 / |theta|_1.
// The origin maps to itself.

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "spikesync/errors.hpp"
#include "spikesync/samplers/spherical_hmc.hpp"

namespace spikesync {

inline Eigen::VectorXd l1_ball_to_l2_ball(const Eigen::VectorXd& beta) {
  const double n1 = beta.lpNorm<1>();
  const double n2 = beta.norm();
  if (n2 == 0.0) return beta;
  return beta * (n1 / n2);
}

inline Eigen::VectorXd l2_ball_to_l1_ball(const Eigen::VectorXd& theta) {
  const double n1 = theta.lpNorm<1>();
  const double n2 = theta.norm();
  if (n1 == 0.0) return theta;
  return theta * (n2 / n1);
}

/// log |det d beta / d theta|. The scale factor g = |theta|_2/|theta|_1 is
/// constant along rays, so the Jacobian is g I + theta grad(g)^T with
/// theta . grad(g) = 0, giving det = g^D.
inline double l2_to_l1_log_jacobian(const Eigen::VectorXd& theta) {
  const double n1 = theta.lpNorm<1>();
  if (n1 == 0.0) return 0.0;
  return static_cast<double>(theta.size()) * std::log(theta.norm() / n1);
}

/// Given a log-density f over the L1 ball and its gradient at beta(theta),
/// returns the log-density over the L2 ball (f plus the log-Jacobian) and
/// its gradient with respect to theta.
inline DensityGrad pull_back_to_l2_ball(const Eigen::VectorXd& theta, double f, const Eigen::VectorXd& grad_beta) {
  const double n1 = theta.lpNorm<1>();
  const double n2 = theta.norm();
  if (n1 == 0.0) return {f, grad_beta};
  const double g = n2 / n1;
  const Eigen::VectorXd sign = theta.unaryExpr([](double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); });
  const Eigen::VectorXd grad_g = theta / (n2 * n1) - sign * (n2 / (n1 * n1));
  const double d = static_cast<double>(theta.size());
  DensityGrad out;
  out.logdensity = f + d * std::log(g);
  out.grad = g * grad_beta + grad_g * theta.dot(grad_beta) + (d / g) * grad_g;
  return out;
}

// ---------------------------------------------------------------------------
// Smoothed radial map. beta = c(x) x with
//   c(x) = 1 / Q(x),  Q(x) = m + sum_i w_i,  w_i = sqrt(s^2 m^2 + x_i^2),  m = 1 - |x|_2^2.
// Smooth on the open ball and equal to the map above on the boundary (m = 0).
// |beta|_1 is strictly increasing along each ray, so rays map onto rays
// bijectively. With A = sum 1/w_i the Jacobian determinant is
//   det = Q^-(D+1) (1 + |x|^2) (1 + s^2 m A).

namespace detail {
struct SmoothMapParts {
  double m = 1.0, q = 1.0, a = 0.0;
  Eigen::VectorXd w;
};

inline SmoothMapParts smooth_parts(const Eigen::VectorXd& x, double s) {
  SmoothMapParts p;
  p.m = std::max(0.0, 1.0 - x.squaredNorm());
  p.w = (x.array().square() + s * s * p.m * p.m).sqrt().max(1e-300).matrix();
  p.q = p.m + p.w.sum();
  p.a = p.w.cwiseInverse().sum();
  return p;
}
} // namespace detail

inline Eigen::VectorXd smooth_l2_ball_to_l1_ball(const Eigen::VectorXd& x, double s = 1.0) {
  return x / detail::smooth_parts(x, s).q;
}

/// Inverse: bisection on the radius along the ray of beta.
inline Eigen::VectorXd smooth_l1_ball_to_l2_ball(const Eigen::VectorXd& beta, double s = 1.0) {
  const double n1 = beta.lpNorm<1>();
  require(n1 <= 1.0 + 1e-12, "smooth ball map: beta is outside the L1 ball");
  if (n1 == 0.0) return beta;
  const Eigen::VectorXd dir = beta / beta.norm();
  if (n1 >= 1.0) return dir;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (smooth_l2_ball_to_l1_ball(mid * dir, s).lpNorm<1>() < n1) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi) * dir;
}

inline double smooth_l2_to_l1_log_jacobian(const Eigen::VectorXd& x, double s = 1.0) {
  const auto p = detail::smooth_parts(x, s);
  const double d = static_cast<double>(x.size());
  return -(d + 1.0) * std::log(p.q) + std::log1p(x.squaredNorm()) + std::log1p(s * s * p.m * p.a);
}

/// Same contract as pull_back_to_l2_ball, for the smoothed map.
inline DensityGrad smooth_pull_back_to_l2_ball(const Eigen::VectorXd& x, double f, const Eigen::VectorXd& grad_beta,
                                              double s = 1.0) {
  const auto p = detail::smooth_parts(x, s);
  const double d = static_cast<double>(x.size());
  const double s2 = s * s;
  const double r2 = x.squaredNorm();
  const Eigen::ArrayXd xa = x.array();
  const Eigen::ArrayXd inv_w = p.w.array().inverse();

  // grad Q_j = -2 x_j - 2 s^2 m A x_j + x_j / w_j
  const Eigen::VectorXd grad_q = (-2.0 * xa - 2.0 * s2 * p.m * p.a * xa + xa * inv_w).matrix();
  const double c = 1.0 / p.q;
  const Eigen::VectorXd grad_c = -grad_q * (c * c);

  // grad A_j = 2 s^2 m x_j sum(1/w^3) - x_j / w_j^3
  const double c3 = inv_w.cube().sum();
  const Eigen::VectorXd grad_a = (2.0 * s2 * p.m * c3 * xa - xa * inv_w.cube()).matrix();
  const double k = 1.0 + s2 * p.m * p.a;
  const Eigen::VectorXd grad_logdet =
      -(d + 1.0) * c * grad_q + (2.0 / (1.0 + r2)) * x + (s2 / k) * (p.a * (-2.0 * x) + p.m * grad_a);

  DensityGrad out;
  out.logdensity = f - (d + 1.0) * std::log(p.q) + std::log1p(r2) + std::log(k);
  out.grad = c * grad_beta + grad_c * x.dot(grad_beta) + grad_logdet;
  return out;
}

/// Selects between the two L1 <-> L2 ball maps.
struct BallMap {
  enum class Kind { Radial, Smooth };
  Kind kind = Kind::Smooth;
  double scale = 1.0; // s for the smoothed map

  Eigen::VectorXd to_l1(const Eigen::VectorXd& x) const {
    return kind == Kind::Radial ? l2_ball_to_l1_ball(x) : smooth_l2_ball_to_l1_ball(x, scale);
  }
  Eigen::VectorXd to_l2(const Eigen::VectorXd& beta) const {
    return kind == Kind::Radial ? l1_ball_to_l2_ball(beta) : smooth_l1_ball_to_l2_ball(beta, scale);
  }
  double log_jacobian(const Eigen::VectorXd& x) const {
    return kind == Kind::Radial ? l2_to_l1_log_jacobian(x) : smooth_l2_to_l1_log_jacobian(x, scale);
  }
  DensityGrad pull_back(const Eigen::VectorXd& x, double f, const Eigen::VectorXd& grad_beta) const {
    return kind == Kind::Radial ? pull_back_to_l2_ball(x, f, grad_beta) : smooth_pull_back_to_l2_ball(x, f, grad_beta, scale);
  }
};

} // namespace spikesync
