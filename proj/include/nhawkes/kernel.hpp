#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace nhawkes {

// Kernel families. Each is a time profile; the mark dependence is either a
// separate MarkFactor (multiplicative kernels) or built into the family
// (NonMultiplicativeBimodal, Tabulated).

struct ZeroKernel {};

/// alpha * exp(-beta t)
struct Exponential {
  double alpha = 0.0;
  double beta = 1.0;
};

/// alpha * (gamma + t)^(-beta)
struct PowerLaw {
  double alpha = 0.0;
  double beta = 2.0;
  double gamma = 1.0;
};

/// alpha * exp(-beta (t - delay)) for t >= delay, zero before.
struct DelayedExponential {
  double alpha = 0.0;
  double beta = 1.0;
  double delay = 0.0;
};

/// alpha_lo exp(-beta_lo t) before the delay, alpha_hi exp(-beta_hi (t - delay))
/// after it. Opposite signs model inhibition followed by excitation (or the
/// reverse).
struct InhibitionTwoPhase {
  double alpha_lo = 0.0;
  double beta_lo = 1.0;
  double alpha_hi = 0.0;
  double beta_hi = 1.0;
  double delay = 0.0;
};

/// alpha / (2 sqrt(2 pi)) * (N(t; mu_lo, sigma_lo) + N(t; mu_hi, sigma_hi)) where
/// N(t; mu, sigma) = exp(-(t - mu)^2 / (2 sigma^2)) / sigma.
struct BimodalGaussian {
  double alpha = 0.0;
  double mu_lo = 0.0;
  double sigma_lo = 1.0;
  double mu_hi = 0.0;
  double sigma_hi = 1.0;
};

/// Same shape as BimodalGaussian but the second mode sits at
/// m(x) = ((x - 1) / M) mu_lo + ((M - x + 1) / M) mu_hi, so the kernel is not
/// a product of a time and a mark function.
struct NonMultiplicativeBimodal {
  double alpha = 0.0;
  double mu_lo = 0.0;
  double sigma_lo = 1.0;
  double mu_hi = 0.0;
  double sigma_hi = 1.0;
};

/// Piecewise-linear table. values[m - 1][k] is the kernel at grid[k] for mark
/// m. The first value is held on [0, grid.front()); the kernel is zero after
/// grid.back(). `maxima` (per mark) is required for simulation.
struct Tabulated {
  std::vector<double> grid;
  std::vector<std::vector<double>> values;
  std::vector<double> maxima;
  /// Derived (filled by KernelSpec): suffix maxima of the positive part per
  /// mark, used by kernel_envelope.
  std::vector<std::vector<double>> suffix_max;
};

/// Fills Tabulated::suffix_max and validates the table against `marks`.
void prepare_tabulated(Tabulated& table, int marks);

using KernelFamily = std::variant<ZeroKernel, Exponential, PowerLaw, DelayedExponential,
                                  InhibitionTwoPhase, BimodalGaussian, NonMultiplicativeBimodal,
                                  Tabulated>;

/// Mark factors of multiplicative kernels, normalized to unit mean under the
/// uniform pmf on 1..M: f0 = 1, f1 = 2x/(M+1), f2 = 6x^2/((M+1)(2M+1)).
/// `None` is used by mark-coupled families and evaluates to 1.
enum class MarkFactor { Constant, Linear, Quadratic, None };

double mark_factor_value(MarkFactor factor, int mark, int marks);

struct KernelEntry {
  KernelFamily family = ZeroKernel{};
  MarkFactor factor = MarkFactor::Constant;
};

/// phi(t, mark) for one entry. t < 0 gives 0.
double kernel_value(const KernelEntry& entry, double t, int mark, int marks);

/// sup_{u >= t} max(phi(u, mark), 0): the non-increasing envelope used as a
/// thinning bound.
double kernel_envelope(const KernelEntry& entry, double t, int mark, int marks);

/// Closed-form integral of phi(., mark) over [0, T]; T may be +infinity.
double kernel_integral(const KernelEntry& entry, double T, int mark, int marks);

/// Lag beyond which the remaining |phi| mass is below `rel_tol` of the
/// total |phi| mass (may be +infinity for heavy tails).
double kernel_prune_horizon(const KernelEntry& entry, int marks, double rel_tol);

bool is_exponential(const KernelEntry& entry);

/// D x D kernel matrix with baseline and per-component mark pmfs.
/// Component indices are 0-based; marks are values in 1..M.
class KernelSpec {
public:
  KernelSpec(std::size_t dimension, int marks, std::vector<double> baseline,
             std::vector<std::vector<double>> mark_pmf, std::vector<KernelEntry> entries);

  /// Uniform mark pmfs.
  KernelSpec(std::size_t dimension, int marks, std::vector<double> baseline,
             std::vector<KernelEntry> entries);

  std::size_t dimension() const { return dim_; }
  int marks() const { return marks_; }
  const std::vector<double>& baseline() const { return baseline_; }
  const std::vector<double>& mark_pmf(std::size_t j) const { return pmf_.at(j); }
  const std::vector<std::vector<double>>& mark_pmfs() const { return pmf_; }
  const KernelEntry& entry(std::size_t i, std::size_t j) const;
  const std::vector<KernelEntry>& entries() const { return entries_; }

  /// Copy with a different baseline.
  KernelSpec with_baseline(std::vector<double> baseline) const;

private:
  std::size_t dim_;
  int marks_;
  std::vector<double> baseline_;
  std::vector<std::vector<double>> pmf_;
  std::vector<KernelEntry> entries_;  // row-major, (i, j) at i * D + j
};

/// phi^{ij}(t, m). Throws ArgumentError for out-of-range indices or t < 0.
double kernel_eval(const KernelSpec& spec, std::size_t i, std::size_t j, double t, int m);

std::vector<double> uniform_pmf(int marks);

nlohmann::json to_json(const KernelSpec& spec);
KernelSpec kernel_spec_from_json(const nlohmann::json& j);
nlohmann::json entry_to_json(const KernelEntry& entry);
KernelEntry entry_from_json(const nlohmann::json& j);

}  // namespace nhawkes
