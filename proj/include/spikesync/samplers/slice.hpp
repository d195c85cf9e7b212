#pragma once

// Univariate slice sampling with stepping out and shrinkage, applied
// coordinate-wise for vector targets.

#include <cmath>
#include <cstddef>
#include <limits>

#include <Eigen/Core>

#include "spikesync/errors.hpp"
#include "spikesync/random.hpp"

namespace spikesync {

struct SliceOptions {
  double width = 1.0;
  std::size_t max_steps = 50; // stepping-out budget in units of width
};

struct SliceResult {
  double x;
  double logdensity;
};

template <class LogDensity, class R>
SliceResult slice_sample_1d(double x0, double f0, LogDensity&& f, const SliceOptions& opt, R& rng) {
  if (!std::isfinite(f0)) throw NumericalError("slice sampler: log-density at the current point is not finite");
  require(opt.width > 0.0, "slice sampler: width must be positive");
  const double level = f0 + std::log(uniform01(rng));

  double left = x0 - opt.width * uniform01(rng);
  double right = left + opt.width;
  const auto m = static_cast<double>(opt.max_steps);
  auto j = static_cast<std::size_t>(std::floor(m * uniform01(rng)));
  std::size_t k = opt.max_steps > 0 ? opt.max_steps - 1 - std::min(j, opt.max_steps - 1) : 0;
  while (j > 0 && f(left) > level) {
    left -= opt.width;
    --j;
  }
  while (k > 0 && f(right) > level) {
    right += opt.width;
    --k;
  }

  for (;;) {
    const double x1 = uniform(rng, left, right);
    const double f1 = f(x1);
    if (f1 > level && !std::isnan(f1)) return {x1, f1};
    if (x1 < x0)
      left = x1;
    else
      right = x1;
    if (right - left < 1e-14 * (1.0 + std::abs(x0))) return {x0, f0};
  }
}

/// Updates each coordinate of x in turn; `f` sees the full vector.
template <class LogDensity, class R>
Eigen::VectorXd slice_step(Eigen::VectorXd x, LogDensity&& f, const SliceOptions& opt, R& rng,
                           double* logdensity_out = nullptr) {
  double fx = f(x);
  if (!std::isfinite(fx)) throw NumericalError("slice sampler: log-density at the current point is not finite");
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    auto coord = [&](double xi) {
      const double saved = x[i];
      x[i] = xi;
      const double v = f(x);
      x[i] = saved;
      return v;
    };
    const SliceResult r = slice_sample_1d(x[i], fx, coord, opt, rng);
    x[i] = r.x;
    fx = r.logdensity;
  }
  if (logdensity_out) *logdensity_out = fx;
  return x;
}

} // namespace spikesync
