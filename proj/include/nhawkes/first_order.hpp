#pragma once

#include "nhawkes/kernel.hpp"
#include "nhawkes/quadrature.hpp"

#include <cstddef>
#include <vector>

namespace nhawkes {

/// D x D matrix of signed L1 norms, row-major.
struct NormMatrix {
  std::size_t dim = 0;
  std::vector<double> values;

  NormMatrix() = default;
  explicit NormMatrix(std::size_t d) : dim(d), values(d * d, 0.0) {}
  NormMatrix(std::size_t d, std::vector<double> v);

  double operator()(std::size_t i, std::size_t j) const { return values[i * dim + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * dim + j]; }

  NormMatrix absolute() const;
  NormMatrix transposed() const;
};

/// Sum over marks of p^j(m) times the integral of phi^{ij}(., m) on [0, T].
/// The supplied quadrature covers [t_lo, T]; [0, t_lo] adds one trapezoid
/// panel.
NormMatrix kernel_l1_norm(const KernelSpec& spec, double T, const QuadratureGrid& quad);

/// Same quantity from the closed-form integrals. T may be +infinity.
NormMatrix kernel_l1_norm_exact(const KernelSpec& spec, double T);

/// Spectral radius of |norms|. Power iteration on |norms| + I from the
/// all-ones vector, stopped on the Collatz-Wielandt bracket; a dense
/// eigensolver takes over for slowly converging (defective or reducible)
/// matrices.
double branching_ratio(const NormMatrix& norms);

/// mu = (I - norms) Lambda. Throws StationarityError when the branching
/// ratio is >= 1.
std::vector<double> baseline_from_rates(const NormMatrix& norms, const std::vector<double>& rates);

/// Lambda = (I - norms)^{-1} mu.
std::vector<double> rates_from_baseline(const NormMatrix& norms, const std::vector<double>& baseline);

/// Sum over marks of p^j(m) phi^{ij}(t, m).
double aggregated_time_kernel(const KernelSpec& spec, std::size_t i, std::size_t j, double t);

/// Integral of phi^{ij}(., m) on [0, T] divided by the (i, j) norm. Throws
/// DegenerateKernelError when the norm vanishes.
double aggregated_mark_kernel(const KernelSpec& spec, std::size_t i, std::size_t j, int m,
                              double T, const QuadratureGrid& quad);

/// 1 - norm_T / norm_inf per entry (0 for zero kernels, 1 when the full norm
/// diverges): the share of kernel mass cut off by truncating at T.
NormMatrix truncated_mass(const KernelSpec& spec, double T);

}  // namespace nhawkes
