#include "nhawkes/quadrature.hpp"

#include "nhawkes/error.hpp"

#include <cmath>

namespace nhawkes {

QuadratureGrid build_quadrature(std::size_t Q, double t_lo, double T) {
  if (Q < 2) throw ArgumentError("quadrature needs Q >= 2");
  if (!(t_lo > 0.0) || !(T > t_lo)) throw ArgumentError("quadrature needs 0 < t_lo < T");
  QuadratureGrid grid;
  grid.nodes.resize(Q);
  const double log_ratio = std::log(T / t_lo);
  for (std::size_t q = 0; q < Q; ++q)
    grid.nodes[q] = t_lo * std::exp(log_ratio * static_cast<double>(q) / static_cast<double>(Q - 1));
  grid.nodes.front() = t_lo;
  grid.nodes.back() = T;
  grid.weights.assign(Q, 0.0);
  const double ratio = std::exp(log_ratio / static_cast<double>(Q - 1));
  std::size_t k = 0;
  if (ratio < 2.0) {
    // Composite Simpson on pairs of uneven panels; its weights stay positive
    // while consecutive panels differ by less than a factor 2.
    for (; k + 2 < Q; k += 2) {
      const double h0 = grid.nodes[k + 1] - grid.nodes[k];
      const double h1 = grid.nodes[k + 2] - grid.nodes[k + 1];
      const double H = h0 + h1;
      grid.weights[k] += H / 6.0 * (2.0 - h1 / h0);
      grid.weights[k + 1] += H * H * H / (6.0 * h0 * h1);
      grid.weights[k + 2] += H / 6.0 * (2.0 - h0 / h1);
    }
  }
  for (; k + 1 < Q; ++k) {
    const double half = 0.5 * (grid.nodes[k + 1] - grid.nodes[k]);
    grid.weights[k] += half;
    grid.weights[k + 1] += half;
  }
  return grid;
}

QuadratureGrid build_uniform_rectangle(std::size_t Q, double T) {
  if (Q < 2) throw ArgumentError("quadrature needs Q >= 2");
  if (!(T > 0.0)) throw ArgumentError("quadrature needs T > 0");
  const double delta = T / static_cast<double>(Q - 1);
  QuadratureGrid grid;
  grid.nodes.resize(Q);
  for (std::size_t q = 0; q < Q; ++q) grid.nodes[q] = delta * static_cast<double>(q);
  grid.nodes.back() = T;
  grid.weights.assign(Q, delta);
  return grid;
}

}  // namespace nhawkes
