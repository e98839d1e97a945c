#pragma once

#include <cstddef>
#include <vector>

namespace nhawkes {

/// Nodes and weights of a quadrature rule on a bounded interval.
struct QuadratureGrid {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
  double lower() const { return nodes.front(); }
  double upper() const { return nodes.back(); }

  template <class F>
  double integrate(F&& f) const {
    double total = 0.0;
    for (std::size_t q = 0; q < nodes.size(); ++q) total += weights[q] * f(nodes[q]);
    return total;
  }
};

/// Q geometrically spaced nodes on [t_lo, T]. Weights are composite Simpson
/// on consecutive panel pairs (a trapezoid closes an odd panel count, and a
/// coarse grid with node ratio >= 2 uses trapezoids throughout). Constants
/// integrate exactly and Q = 2 is the plain trapezoid.
QuadratureGrid build_quadrature(std::size_t Q, double t_lo, double T);

/// Q uniform nodes 0, delta, ..., T (delta = T/(Q-1)), every weight delta.
QuadratureGrid build_uniform_rectangle(std::size_t Q, double T);

}  // namespace nhawkes
