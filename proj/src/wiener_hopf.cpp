#include "nhawkes/wiener_hopf.hpp"

#include "nhawkes/error.hpp"
#include "nhawkes/io_util.hpp"

#include <cmath>

namespace nhawkes {

namespace {

double g_right(const SecondOrderStats& s, std::size_t i, std::size_t j, double t, int m) {
  return t == 0.0 ? s.g(i, j, m, 0) : interpolate_g(s, i, j, t, m);
}

void check(const SecondOrderStats& stats, std::size_t Q) {
  if (Q < 2) throw ArgumentError("Wiener-Hopf needs Q >= 2");
  stats.validate();
  stats.require_complete();
}

}  // namespace

double wh_k(const SecondOrderStats& stats, std::size_t k, std::size_t j, double t, int x, int z) {
  if (t >= 0.0) return g_right(stats, k, j, t, x);
  return stats.rates[k] / stats.rates[j] * interpolate_g(stats, j, k, -t, z);
}

Eigen::MatrixXd wh_system(const SecondOrderStats& stats, std::size_t Q) {
  check(stats, Q);
  const std::size_t D = stats.dim;
  const auto M = static_cast<std::size_t>(stats.marks);
  const double T = stats.grid.T;
  const double delta = T / static_cast<double>(Q - 1);
  const auto n = static_cast<Eigen::Index>(D * M * Q);
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  const auto at = [&](std::size_t k, std::size_t m, std::size_t q) {
    return static_cast<Eigen::Index>((k * M + m) * Q + q);
  };
  for (std::size_t j = 0; j < D; ++j)
    for (std::size_t x = 0; x < M; ++x)
      for (std::size_t p = 0; p < Q; ++p)
        for (std::size_t k = 0; k < D; ++k)
          for (std::size_t z = 0; z < M; ++z) {
            const double w = delta * stats.pmf[k][z];
            if (w == 0.0) continue;
            for (std::size_t q = 0; q < Q; ++q) {
              const double lag = static_cast<double>(p) * delta - static_cast<double>(q) * delta;
              A(at(j, x, p), at(k, z, q)) +=
                  w * wh_k(stats, k, j, lag, static_cast<int>(x) + 1, static_cast<int>(z) + 1);
            }
          }
  return A;
}

Eigen::VectorXd wh_rhs(const SecondOrderStats& stats, std::size_t i, std::size_t Q) {
  check(stats, Q);
  const std::size_t D = stats.dim;
  const auto M = static_cast<std::size_t>(stats.marks);
  const double delta = stats.grid.T / static_cast<double>(Q - 1);
  Eigen::VectorXd b(static_cast<Eigen::Index>(D * M * Q));
  for (std::size_t j = 0; j < D; ++j)
    for (std::size_t x = 0; x < M; ++x)
      for (std::size_t p = 0; p < Q; ++p)
        b(static_cast<Eigen::Index>((j * M + x) * Q + p)) =
            g_right(stats, i, j, static_cast<double>(p) * delta, static_cast<int>(x) + 1);
  return b;
}

WhSolution wh_solve(const SecondOrderStats& stats, std::size_t Q, const std::optional<Eigen::MatrixXd>& rhs) {
  const Eigen::MatrixXd A = wh_system(stats, Q);
  const std::size_t D = stats.dim;
  if (rhs && (rhs->rows() != A.rows() || rhs->cols() != static_cast<Eigen::Index>(D)))
    throw ArgumentError("right-hand side must be (Q M D) x D");
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14))
    throw LinearAlgebraError("Wiener-Hopf system is singular (reciprocal condition " + format_double(rcond) + ")",
                             rcond);
  Eigen::MatrixXd b(A.rows(), static_cast<Eigen::Index>(D));
  if (rhs)
    b = *rhs;
  else
    for (std::size_t i = 0; i < D; ++i) b.col(static_cast<Eigen::Index>(i)) = wh_rhs(stats, i, Q);
  const Eigen::MatrixXd x = lu.solve(b);
  if (!x.allFinite()) throw LinearAlgebraError("Wiener-Hopf solve produced non-finite values", rcond);

  WhSolution sol;
  sol.dim = D;
  sol.marks = stats.marks;
  sol.delta = stats.grid.T / static_cast<double>(Q - 1);
  for (std::size_t q = 0; q < Q; ++q) sol.times.push_back(static_cast<double>(q) * sol.delta);
  sol.times.back() = stats.grid.T;
  sol.rcond = rcond;
  sol.values.resize(D * D * static_cast<std::size_t>(stats.marks) * Q);
  const auto per_row = static_cast<std::size_t>(x.rows());
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t r = 0; r < per_row; ++r)
      sol.values[i * per_row + r] = x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i));
  sol.stats = stats;
  return sol;
}

double wh_reconstruct(const WhSolution& sol, std::size_t i, std::size_t j, double t, int m) {
  const auto& s = sol.stats;
  if (i >= sol.dim || j >= sol.dim || m < 1 || m > sol.marks) throw ArgumentError("index out of range");
  if (!(t >= 0.0 && t <= s.grid.T)) throw ArgumentError("reconstruction time must lie in [0, T]");
  double acc = 0.0;
  for (std::size_t k = 0; k < sol.dim; ++k)
    for (int z = 1; z <= sol.marks; ++z) {
      const double p = s.pmf[k][static_cast<std::size_t>(z - 1)];
      if (p == 0.0) continue;
      for (std::size_t q = 0; q < sol.nodes(); ++q)
        acc += p * sol.value(i, k, z, q) * wh_k(s, k, j, t - sol.times[q], m, z);
    }
  return g_right(s, i, j, t, m) - sol.delta * acc;
}

}  // namespace nhawkes
