#pragma once

#include "nhawkes/stats.hpp"

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace nhawkes {

/// Nodal kernel values from the direct discretization of the
/// characterization equation on a uniform grid t_q = q * delta.
struct WhSolution {
  std::vector<double> times;
  double delta = 0.0;
  std::size_t dim = 0;
  int marks = 1;
  /// phi_q^{ik}(m) at ((i * D + k) * M + m - 1) * Q + q.
  std::vector<double> values;
  double rcond = 0.0;
  SecondOrderStats stats;

  std::size_t nodes() const { return times.size(); }
  double value(std::size_t i, std::size_t k, int m, std::size_t q) const {
    return values[((i * dim + k) * static_cast<std::size_t>(marks) + static_cast<std::size_t>(m - 1)) * nodes() + q];
  }
};

/// K^{kj}(t, x, z) with the t > 0 branch at t = 0.
double wh_k(const SecondOrderStats& stats, std::size_t k, std::size_t j, double t, int x, int z);

/// The (Q M D) x (Q M D) system matrix shared by all rows. Unknowns and
/// equations are ordered (k, m, q), lexicographically.
Eigen::MatrixXd wh_system(const SecondOrderStats& stats, std::size_t Q);

/// Right-hand side of row i in the same ordering.
Eigen::VectorXd wh_rhs(const SecondOrderStats& stats, std::size_t i, std::size_t Q);

/// Solves all D rows with one pivoted LU factorization. `rhs`, when given,
/// replaces the statistics-derived right-hand sides (one column per row).
/// Throws LinearAlgebraError when the system is numerically singular.
WhSolution wh_solve(const SecondOrderStats& stats, std::size_t Q,
                    const std::optional<Eigen::MatrixXd>& rhs = std::nullopt);

/// phi^{ij}(t, m) = G^{ij}(t, m) - delta sum_{k, z, q} p^k(z) phi_q^{ik}(z) K^{kj}(t - t_q, m, z).
double wh_reconstruct(const WhSolution& sol, std::size_t i, std::size_t j, double t, int m);

}  // namespace nhawkes
