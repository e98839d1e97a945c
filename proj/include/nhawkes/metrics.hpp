#pragma once

#include "nhawkes/first_order.hpp"
#include "nhawkes/kernel.hpp"
#include "nhawkes/solver.hpp"
#include "nhawkes/wiener_hopf.hpp"

#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <vector>

namespace nhawkes {

/// phi^{ij}(t, m) of some estimate.
using KernelFunction = std::function<double(std::size_t i, std::size_t j, double t, int m)>;

KernelFunction spec_function(const KernelSpec& spec);
KernelFunction model_function(const std::vector<RowModel>& models);
KernelFunction wh_function(const WhSolution& sol);

struct EntryError {
  std::size_t i = 0, j = 0;
  int m = 1;
  double delta2 = 0.0;     ///< root mean square over the K + 1 nodes
  double delta_inf = 0.0;  ///< max abs deviation
  double sup_true = 0.0;   ///< max |truth| over the nodes
};

struct ErrorReport {
  std::size_t K = 0;
  double delta2 = 0.0, delta_inf = 0.0;
  double delta2_norm = 0.0, delta_inf_norm = 0.0;
  double sup_true = 0.0;
  std::vector<EntryError> entries;

  /// Root mean square over the diagonal (i == j) or off-diagonal entries
  /// only, normalized by the sup of the true kernel over the same entries.
  double delta2_subset(bool diagonal) const;
};

/// Errors on the nodes kT/K, k = 0..K, with node 0 moved to `t_first` (the
/// estimate may be undefined at 0). The normalizer is the sup of |phi| over
/// the same nodes.
ErrorReport error_report(const KernelFunction& estimate, const KernelSpec& truth, std::size_t K, double T,
                         double t_first = 0.0);

nlohmann::json to_json(const ErrorReport& r);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Sum of |v_{q+1} - v_q|.
double total_variation(const std::vector<double>& v);

struct ConvergenceConfig {
  std::vector<std::size_t> events;
  std::vector<std::uint64_t> seeds;
  double h = 0.1;
  int n_lin = 10;
  int n_log = 50;
  double T = 2.0;
  TrainConfig train;
  std::size_t K = 1000;
  int jobs = 1;
};

struct ConvergencePoint {
  std::size_t events = 0;
  std::vector<double> delta2_norm;  ///< one per seed
  std::vector<double> delta_inf_norm;
  double mean_delta2_norm = 0.0;
  double mean_delta_inf_norm = 0.0;
};

struct ConvergenceResult {
  std::vector<ConvergencePoint> points;
  double slope_delta2 = 0.0;  ///< NaN when all sample sizes coincide
  double slope_delta_inf = 0.0;
};

/// Simulate N events, estimate statistics, fit and score, for every
/// (N, seed). Replicas run in parallel up to `jobs`; results do not depend
/// on scheduling.
ConvergenceResult convergence_study(const KernelSpec& spec, const ConvergenceConfig& config);

nlohmann::json to_json(const ConvergenceResult& r);

struct CausalityReport {
  NormMatrix norms;
  double branching_ratio = 0.0;
  NormMatrix spillover;
  std::vector<double> leader, receiver, participation;
  std::optional<std::vector<double>> baseline;  ///< empty when not stationary
};

/// Spillover, leader, receiver and participation ratios from the norm
/// matrix, the rates Lambda and per-component volumes V.
CausalityReport causality_report(const NormMatrix& norms, const std::vector<double>& rates,
                                 const std::vector<double>& volumes);

nlohmann::json to_json(const CausalityReport& r);

}  // namespace nhawkes
