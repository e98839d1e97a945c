#pragma once

#include "nhawkes/dgm.hpp"
#include "nhawkes/first_order.hpp"
#include "nhawkes/kernel.hpp"
#include "nhawkes/quadrature.hpp"
#include "nhawkes/rng.hpp"
#include "nhawkes/stats.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace nhawkes {

enum class Optimizer { Sgd, Adam };

/// Hyperparameters of the training loop. Defaults follow the reference
/// configuration; `short_threshold` <= 0 means the grid's h (T / 10 on a purely linear grid).
struct TrainConfig {
  int width = 64;
  int cells = 1;
  double lr0 = 1e-3;
  int quadrature = 250;
  int batch = 8;
  int train_size = 1024;
  int validation_size = 128;
  int epochs = 1000;
  double short_fraction = 0.3;
  double short_threshold = 0.0;
  double temporal_eps = 5.0;
  double continuity_weight = 0.0;
  bool magnitude_weighting = true;
  Optimizer optimizer = Optimizer::Sgd;
  std::uint64_t seed = 0;

  void validate() const;
  /// gamma_e = lr0 * 100^{-e/E} for epochs e = 1..E.
  double learning_rate(int epoch) const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// One trained row phi^{i.} of the kernel matrix.
struct RowModel {
  std::size_t row = 0;
  int marks = 1;
  double horizon = 0.0;  // truncation T
  DgmParams params;
  InputScaler scaler;
  TrainConfig config;
  std::vector<double> loss_history;

  /// phi^{ij}(t, m) for all j; 0 for t > T. t <= 0 is clamped by the
  /// scaler's floor.
  std::vector<double> eval(double t, int m) const;
};

nlohmann::json to_json(const RowModel& m);
RowModel row_model_from_json(const nlohmann::json& j);

struct SamplePoint {
  double t;
  int m;
};

/// floor(S * n) times uniform on (0, tau), the rest on (tau, T); marks
/// uniform on 1..M; sorted by time.
std::vector<SamplePoint> sample_training_set(int n, double short_fraction, double tau, double T, int marks,
                                             Rng& rng);
std::vector<SamplePoint> sample_training_set(int n, double short_fraction, double tau, double T, int marks,
                                             std::uint64_t seed);

/// Quadrature used by the solver: Q - 1 log-spaced nodes on [grid.t_min,
/// grid.T] plus a midpoint node covering [0, grid.t_min].
QuadratureGrid solver_quadrature(const SecondOrderStats& stats, int Q);

/// Network outputs u^{i.}(t, m) for arbitrary points, as a D x N matrix.
using RowFunction = std::function<Eigen::MatrixXd(const std::vector<SamplePoint>&)>;
RowFunction network_function(const DgmParams& params, const InputScaler& scaler);
/// The analytic row i of a spec, for oracles.
RowFunction spec_row_function(const KernelSpec& spec, std::size_t i);

/// eps_n^{ij} = G^{ij}(t_n, x_n) - u^{ij}(t_n, x_n)
///            - sum_k sum_z p^k(z) sum_q w_q u^{ik}(s_q, z) H^{kj}(t_n - s_q, x_n, z),
/// as an N x D matrix. The Q * M quadrature evaluations are shared by all
/// points.
Eigen::MatrixXd residuals(std::size_t i, const RowFunction& u, const SecondOrderStats& stats,
                          const QuadratureGrid& quad, const std::vector<SamplePoint>& points);

/// Per column: w_1 = 1, w_n = exp(-eps * S_{n-1} / S_N) with S the
/// cumulative sum of squared residuals (all ones for a zero column).
Eigen::MatrixXd temporal_weights(const Eigen::MatrixXd& residuals, double eps);

/// zeta_ij(x) = I_ij(x)^{-1} / sum_{i'j'} I_{i'j'}(x)^{-1} with
/// I_ij(x) = integral of |G^{ij}(., x)| over the quadrature. Indexed
/// [(i * D + j) * M + (x - 1)]. Throws EstimationError for a zero integral.
std::vector<double> magnitude_weights(const SecondOrderStats& stats, const QuadratureGrid& quad);

/// Algorithm 1 for one row. Throws DivergenceError on a non-finite loss.
RowModel train_row(std::size_t i, const SecondOrderStats& stats, const TrainConfig& config);

/// All D rows, seeds derived per row from config.seed; `jobs` threads.
std::vector<RowModel> fit(const SecondOrderStats& stats, const TrainConfig& config, int jobs = 1);

/// Evaluates models on `nodes` and stores them as a tabulated spec with
/// per-mark maxima. Baseline from the first-order identity with the
/// fitted norms (zero baseline if the fit is not stationary); pmfs from
/// stats.
KernelSpec tabulate(const std::vector<RowModel>& models, const SecondOrderStats& stats,
                    const std::vector<double>& nodes);

/// Norms sum_m p^j(m) integral phi^{ij}(s, m) ds on the solver's
/// quadrature; signed unless `absolute` integrates |phi|.
NormMatrix fitted_norms(const std::vector<RowModel>& models, const SecondOrderStats& stats,
                        const QuadratureGrid& quad, bool absolute = false);

/// G~ = phi + integral operator applied to phi (= G - eps), evaluated at
/// the bin centers of the stats grid, as a stats object with the same
/// rates, pmfs and grid.
SecondOrderStats refit_stats(const std::vector<RowFunction>& rows, const SecondOrderStats& stats,
                             const QuadratureGrid& quad);

struct GoodnessOfFit {
  std::vector<double> fitted_baseline;
  std::vector<double> true_rates;       // from stats
  std::vector<double> simulated_rates;  // from the resimulation
  double rate_mare = 0.0;               // mean absolute relative error
  double g_mean_abs_diff = 0.0;         // resimulated G vs stats G
  double g_mean_abs = 0.0;              // scale of stats G
  double refit_mean_abs_diff = 0.0;     // analytic G~ vs stats G
  double branching_ratio = 0.0;
  double clamp_fraction = 0.0;
  std::size_t events = 0;
};

/// Simulates `n_events` from the tabulated fit and re-estimates first and
/// second order statistics on the same grid. Throws StationarityError when
/// the fitted branching ratio is >= 1.
GoodnessOfFit goodness_of_fit(const std::vector<RowModel>& models, const SecondOrderStats& stats,
                              std::size_t n_events, std::uint64_t seed, std::size_t table_nodes = 1000);

}  // namespace nhawkes
