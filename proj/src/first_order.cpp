#include "nhawkes/first_order.hpp"

#include "nhawkes/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <cmath>
#include <string>

namespace nhawkes {

namespace {

Eigen::MatrixXd to_eigen(const NormMatrix& n) {
  Eigen::MatrixXd m(n.dim, n.dim);
  for (std::size_t i = 0; i < n.dim; ++i)
    for (std::size_t j = 0; j < n.dim; ++j) m(i, j) = n(i, j);
  return m;
}

double entry_integral(const KernelEntry& e, int m, int marks, double T, const QuadratureGrid& quad) {
  const double t_lo = quad.lower();
  const double head = 0.5 * t_lo * (kernel_value(e, 0.0, m, marks) + kernel_value(e, t_lo, m, marks));
  return head + quad.integrate([&](double s) { return s <= T ? kernel_value(e, s, m, marks) : 0.0; });
}

}  // namespace

NormMatrix::NormMatrix(std::size_t d, std::vector<double> v) : dim(d), values(std::move(v)) {
  if (values.size() != d * d) throw ArgumentError("norm matrix needs D*D values");
}

NormMatrix NormMatrix::absolute() const {
  NormMatrix out = *this;
  for (double& v : out.values) v = std::abs(v);
  return out;
}

NormMatrix NormMatrix::transposed() const {
  NormMatrix out(dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) out(j, i) = (*this)(i, j);
  return out;
}

NormMatrix kernel_l1_norm(const KernelSpec& spec, double T, const QuadratureGrid& quad) {
  if (!(T > 0.0)) throw ArgumentError("norm horizon must be > 0");
  const std::size_t D = spec.dimension();
  NormMatrix out(D);
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D; ++j) {
      const auto& pmf = spec.mark_pmf(j);
      double total = 0.0;
      for (int m = 1; m <= spec.marks(); ++m)
        if (pmf[m - 1] > 0.0) total += pmf[m - 1] * entry_integral(spec.entry(i, j), m, spec.marks(), T, quad);
      out(i, j) = total;
    }
  return out;
}

NormMatrix kernel_l1_norm_exact(const KernelSpec& spec, double T) {
  if (!(T > 0.0)) throw ArgumentError("norm horizon must be > 0");
  const std::size_t D = spec.dimension();
  NormMatrix out(D);
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D; ++j) {
      const auto& pmf = spec.mark_pmf(j);
      double total = 0.0;
      for (int m = 1; m <= spec.marks(); ++m)
        if (pmf[m - 1] > 0.0) total += pmf[m - 1] * kernel_integral(spec.entry(i, j), T, m, spec.marks());
      out(i, j) = total;
    }
  return out;
}

double branching_ratio(const NormMatrix& norms) {
  const std::size_t D = norms.dim;
  if (D == 0 || norms.values.size() != D * D) throw ArgumentError("branching ratio needs a square matrix");
  for (double v : norms.values)
    if (!std::isfinite(v)) throw NumericalError("norm matrix has non-finite entries");

  const Eigen::MatrixXd B = to_eigen(norms.absolute()) + Eigen::MatrixXd::Identity(D, D);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(D);
  double previous = -1.0;
  constexpr int kMaxIter = 100000;
  constexpr int kStallLimit = 2000;
  int stalled = 0;
  for (int it = 0; it < kMaxIter; ++it) {
    const Eigen::VectorXd y = B * x;
    const Eigen::ArrayXd ratio = y.array() / x.array();
    const double lo = ratio.minCoeff();
    const double hi = ratio.maxCoeff();
    if (hi - lo < 1e-10) return 0.5 * (lo + hi) - 1.0;
    const double estimate = y.maxCoeff() / x.maxCoeff();
    x = y / y.maxCoeff();
    stalled = std::abs(estimate - previous) < 1e-10 ? stalled + 1 : 0;
    previous = estimate;
    if (stalled > kStallLimit) break;
  }
  // Reducible or defective matrices never close the bracket; ask a dense
  // eigensolver instead.
  Eigen::EigenSolver<Eigen::MatrixXd> solver(to_eigen(norms.absolute()), false);
  if (solver.info() != Eigen::Success) throw NumericalError("spectral radius did not converge");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<double> baseline_from_rates(const NormMatrix& norms, const std::vector<double>& rates) {
  if (rates.size() != norms.dim) throw ArgumentError("rate vector length must equal the dimension");
  const double rho = branching_ratio(norms);
  if (rho >= 1.0) throw StationarityError("branching ratio " + std::to_string(rho) + " >= 1", rho);
  std::vector<double> mu(norms.dim);
  for (std::size_t i = 0; i < norms.dim; ++i) {
    double acc = rates[i];
    for (std::size_t j = 0; j < norms.dim; ++j) acc -= norms(i, j) * rates[j];
    mu[i] = acc;
  }
  return mu;
}

std::vector<double> rates_from_baseline(const NormMatrix& norms, const std::vector<double>& baseline) {
  if (baseline.size() != norms.dim) throw ArgumentError("baseline length must equal the dimension");
  const double rho = branching_ratio(norms);
  if (rho >= 1.0) throw StationarityError("branching ratio " + std::to_string(rho) + " >= 1", rho);
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(norms.dim, norms.dim) - to_eigen(norms);
  const Eigen::VectorXd mu = Eigen::Map<const Eigen::VectorXd>(baseline.data(), norms.dim);
  const Eigen::VectorXd lambda = A.partialPivLu().solve(mu);
  return {lambda.data(), lambda.data() + lambda.size()};
}

double aggregated_time_kernel(const KernelSpec& spec, std::size_t i, std::size_t j, double t) {
  const auto& pmf = spec.mark_pmf(j);
  double total = 0.0;
  for (int m = 1; m <= spec.marks(); ++m)
    if (pmf[m - 1] > 0.0) total += pmf[m - 1] * kernel_eval(spec, i, j, t, m);
  return total;
}

double aggregated_mark_kernel(const KernelSpec& spec, std::size_t i, std::size_t j, int m, double T,
                              const QuadratureGrid& quad) {
  if (m < 1 || m > spec.marks()) throw ArgumentError("mark out of range");
  const auto& pmf = spec.mark_pmf(j);
  const auto& e = spec.entry(i, j);
  double norm = 0.0;
  for (int x = 1; x <= spec.marks(); ++x)
    if (pmf[x - 1] > 0.0) norm += pmf[x - 1] * entry_integral(e, x, spec.marks(), T, quad);
  if (std::abs(norm) < 1e-300) throw DegenerateKernelError("kernel has zero L1 norm");
  return entry_integral(e, m, spec.marks(), T, quad) / norm;
}

NormMatrix truncated_mass(const KernelSpec& spec, double T) {
  const NormMatrix finite = kernel_l1_norm_exact(spec, T);
  const NormMatrix full = kernel_l1_norm_exact(spec, std::numeric_limits<double>::infinity());
  NormMatrix out(spec.dimension());
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    const double f = full.values[k];
    if (std::isinf(f)) out.values[k] = 1.0;
    else if (f == 0.0) out.values[k] = 0.0;
    else out.values[k] = 1.0 - finite.values[k] / f;
  }
  return out;
}

}  // namespace nhawkes
