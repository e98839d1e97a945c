#pragma once

#include "nhawkes/dgm.hpp"
#include "nhawkes/rng.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace nhawkes::testing {

inline double weighted_output(const DgmParams& p, const Eigen::MatrixXd& x, const Eigen::MatrixXd& c) {
  return (dgm_forward(p, x).array() * c.array()).sum();
}

inline double central_difference(DgmParams& p, std::size_t k, double step, const Eigen::MatrixXd& x,
                                 const Eigen::MatrixXd& c) {
  const double keep = p.theta[k];
  p.theta[k] = keep + step;
  const double up = weighted_output(p, x, c);
  p.theta[k] = keep - step;
  const double down = weighted_output(p, x, c);
  p.theta[k] = keep;
  return (up - down) / (2.0 * step);
}

/// Max over parameters of |analytic - fd| / max(|analytic|, |fd|, floor).
/// Returns nullopt when a step of 1e-5 and one of 5e-6 disagree, i.e. a
/// ReLU kink lies inside the difference stencil.
inline std::optional<double> max_relative_gradient_error(DgmParams p, const Eigen::MatrixXd& x,
                                                         const Eigen::MatrixXd& c) {
  std::vector<double> g;
  dgm_gradient(p, x, c, g);
  double worst = 0.0;
  for (std::size_t k = 0; k < p.theta.size(); ++k) {
    const double fd = central_difference(p, k, 1e-5, x, c);
    const double fd_half = central_difference(p, k, 5e-6, x, c);
    const double scale = std::max({std::abs(g[k]), std::abs(fd), 1e-6});
    if (std::abs(fd - fd_half) > 1e-6 * scale + 1e-9) return std::nullopt;
    worst = std::max(worst, std::abs(g[k] - fd) / scale);
  }
  return worst;
}

/// Random params with nonzero biases, random scaled inputs and coefficients.
inline void random_problem(Rng& rng, const DgmShape& shape, int points, DgmParams& p, Eigen::MatrixXd& x,
                           Eigen::MatrixXd& c) {
  p = dgm_init(shape, rng.next());
  for (double& v : p.theta) v += rng.uniform(-0.3, 0.3);
  x.resize(2, points);
  c.resize(shape.outputs, points);
  for (int n = 0; n < points; ++n) {
    x(0, n) = rng.uniform(-3.0, 1.0);
    x(1, n) = rng.uniform(-1.6, 1.6);
    for (int d = 0; d < shape.outputs; ++d) c(d, n) = rng.uniform(-1.0, 1.0);
  }
}

}  // namespace nhawkes::testing
