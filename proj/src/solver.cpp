#include "nhawkes/solver.hpp"

#include "nhawkes/error.hpp"
#include "nhawkes/rng.hpp"
#include "nhawkes/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

namespace nhawkes {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// The integral term as a linear map. Row (n * D + j), column (c * D + k)
// where c = z * Q + q enumerates quadrature points; entry
// p^k(z) w_q H^{kj}(t_n - s_q, x_n, z). Multiplying by the column-major
// D x (M Q) matrix of network outputs (flattened) yields the integrals.
RowMajor build_operator(const SecondOrderStats& stats, const QuadratureGrid& quad,
                        const std::vector<SamplePoint>& points) {
  const auto D = stats.dim;
  const auto M = static_cast<std::size_t>(stats.marks);
  const auto Q = quad.size();
  RowMajor A(static_cast<Eigen::Index>(points.size() * D), static_cast<Eigen::Index>(M * Q * D));
  for (std::size_t n = 0; n < points.size(); ++n) {
    const auto [t, x] = points[n];
    for (std::size_t j = 0; j < D; ++j) {
      double* row = A.row(static_cast<Eigen::Index>(n * D + j)).data();
      for (std::size_t z = 0; z < M; ++z)
        for (std::size_t q = 0; q < Q; ++q) {
          const double lag = t - quad.nodes[q];
          for (std::size_t k = 0; k < D; ++k) {
            const double p = stats.pmf[k][z];
            row[(z * Q + q) * D + k] =
                p == 0.0 ? 0.0 : p * quad.weights[q] * h_kernel(stats, k, j, lag, x, static_cast<int>(z) + 1);
          }
        }
    }
  }
  return A;
}

std::vector<SamplePoint> quadrature_points(const QuadratureGrid& quad, int marks) {
  std::vector<SamplePoint> pts;
  for (int z = 1; z <= marks; ++z)
    for (double s : quad.nodes) pts.push_back({s, z});
  return pts;
}

Eigen::MatrixXd scale_points(const InputScaler& scaler, const std::vector<SamplePoint>& pts) {
  Eigen::MatrixXd x(2, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t n = 0; n < pts.size(); ++n) {
    x(0, static_cast<Eigen::Index>(n)) = scaler.time(pts[n].t);
    x(1, static_cast<Eigen::Index>(n)) = scaler.mark(pts[n].m);
  }
  return x;
}

// N x D matrix of G^{ij}(t_n, x_n).
Eigen::MatrixXd g_at(std::size_t i, const SecondOrderStats& stats, const std::vector<SamplePoint>& pts) {
  Eigen::MatrixXd g(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(stats.dim));
  for (std::size_t n = 0; n < pts.size(); ++n)
    for (std::size_t j = 0; j < stats.dim; ++j)
      g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)) = interpolate_g(stats, i, j, pts[n].t, pts[n].m);
  return g;
}

// eps = G - U^T - (A vec(Uq)) reshaped to N x D.
Eigen::MatrixXd residual_from(const Eigen::MatrixXd& g, const Eigen::MatrixXd& u_points, const RowMajor& A,
                              const Eigen::MatrixXd& u_quad) {
  const Eigen::Map<const Eigen::VectorXd> uq(u_quad.data(), u_quad.size());
  const Eigen::VectorXd integral = A * uq;
  const auto N = g.rows(), D = g.cols();
  Eigen::MatrixXd eps(N, D);
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index j = 0; j < D; ++j) eps(n, j) = g(n, j) - u_points(j, n) - integral(n * D + j);
  return eps;
}

}  // namespace

// ---------------------------------------------------------------- config

void TrainConfig::validate() const {
  if (width < 1 || cells < 0) throw ArgumentError("network needs width >= 1 and cells >= 0");
  if (!(lr0 > 0.0)) throw ArgumentError("initial learning rate must be > 0");
  if (quadrature < 3) throw ArgumentError("quadrature count must be >= 3");
  if (batch < 1 || train_size < batch) throw ArgumentError("need 1 <= batch <= training size");
  if (train_size % batch != 0) throw ArgumentError("training size must be a multiple of the batch size");
  if (validation_size < 1) throw ArgumentError("validation size must be >= 1");
  if (epochs < 0) throw ArgumentError("epochs must be >= 0");
  if (!(short_fraction >= 0.0 && short_fraction < 1.0)) throw ArgumentError("short-time fraction must be in [0, 1)");
  if (!(temporal_eps >= 0.0)) throw ArgumentError("temporal weight strength must be >= 0");
  if (!(continuity_weight >= 0.0)) throw ArgumentError("continuity weight must be >= 0");
}

double TrainConfig::learning_rate(int epoch) const {
  if (epochs == 0) return lr0;
  return lr0 * std::pow(100.0, -static_cast<double>(epoch) / epochs);
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"width", c.width},
          {"cells", c.cells},
          {"lr0", c.lr0},
          {"quadrature", c.quadrature},
          {"batch", c.batch},
          {"train_size", c.train_size},
          {"validation_size", c.validation_size},
          {"epochs", c.epochs},
          {"short_fraction", c.short_fraction},
          {"short_threshold", c.short_threshold},
          {"temporal_eps", c.temporal_eps},
          {"continuity_weight", c.continuity_weight},
          {"magnitude_weighting", c.magnitude_weighting},
          {"optimizer", c.optimizer == Optimizer::Adam ? "adam" : "sgd"},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ArgumentError("training config must be a JSON object");
  const nlohmann::json defaults = to_json(TrainConfig{});
  for (const auto& [key, value] : j.items())
    if (!defaults.contains(key)) throw ArgumentError("unknown training config key '" + key + "'");
  nlohmann::json merged = defaults;
  merged.update(j);
  try {
    TrainConfig c;
    c.width = merged.at("width").get<int>();
    c.cells = merged.at("cells").get<int>();
    c.lr0 = merged.at("lr0").get<double>();
    c.quadrature = merged.at("quadrature").get<int>();
    c.batch = merged.at("batch").get<int>();
    c.train_size = merged.at("train_size").get<int>();
    c.validation_size = merged.at("validation_size").get<int>();
    c.epochs = merged.at("epochs").get<int>();
    c.short_fraction = merged.at("short_fraction").get<double>();
    c.short_threshold = merged.at("short_threshold").get<double>();
    c.temporal_eps = merged.at("temporal_eps").get<double>();
    c.continuity_weight = merged.at("continuity_weight").get<double>();
    c.magnitude_weighting = merged.at("magnitude_weighting").get<bool>();
    const auto opt = merged.at("optimizer").get<std::string>();
    if (opt != "sgd" && opt != "adam") throw ArgumentError("optimizer must be 'sgd' or 'adam'");
    c.optimizer = opt == "adam" ? Optimizer::Adam : Optimizer::Sgd;
    c.seed = merged.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed training config: ") + e.what());
  }
}

// ---------------------------------------------------------------- row model

std::vector<double> RowModel::eval(double t, int m) const {
  if (t > horizon) return std::vector<double>(static_cast<std::size_t>(params.shape.outputs), 0.0);
  return forward(params, scaler, std::max(t, scaler.t_floor), m);
}

nlohmann::json to_json(const RowModel& m) {
  return {{"format", "nhawkes-row-model-v1"},
          {"row", m.row},
          {"marks", m.marks},
          {"horizon", m.horizon},
          {"scaler", to_json(m.scaler)},
          {"config", to_json(m.config)},
          {"network", to_json(m.params)},
          {"loss_history", m.loss_history}};
}

RowModel row_model_from_json(const nlohmann::json& j) {
  try {
    RowModel m;
    m.row = j.at("row").get<std::size_t>();
    m.marks = j.at("marks").get<int>();
    m.horizon = j.at("horizon").get<double>();
    m.scaler = input_scaler_from_json(j.at("scaler"));
    m.config = train_config_from_json(j.at("config"));
    m.params = dgm_params_from_json(j.at("network"));
    m.loss_history = j.at("loss_history").get<std::vector<double>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed row model: ") + e.what());
  }
}

// ---------------------------------------------------------------- pieces

std::vector<SamplePoint> sample_training_set(int n, double short_fraction, double tau, double T, int marks,
                                             Rng& rng) {
  if (!(tau > 0.0 && tau < T)) throw ArgumentError("sampling needs 0 < tau < T");
  const int n_short = static_cast<int>(std::floor(short_fraction * n));
  std::vector<SamplePoint> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    double t;
    do {
      t = k < n_short ? rng.uniform(0.0, tau) : rng.uniform(tau, T);
    } while (!(t > 0.0) || t == tau);
    pts.push_back({t, static_cast<int>(rng.uniform_int(1, marks))});
  }
  std::sort(pts.begin(), pts.end(), [](const SamplePoint& a, const SamplePoint& b) { return a.t < b.t; });
  return pts;
}

std::vector<SamplePoint> sample_training_set(int n, double short_fraction, double tau, double T, int marks,
                                             std::uint64_t seed) {
  Rng rng(seed);
  return sample_training_set(n, short_fraction, tau, T, marks, rng);
}

QuadratureGrid solver_quadrature(const SecondOrderStats& stats, int Q) {
  if (Q < 3) throw ArgumentError("solver quadrature needs at least 3 nodes");
  QuadratureGrid q = build_quadrature(static_cast<std::size_t>(Q - 1), stats.grid.t_min, stats.grid.T);
  q.nodes.insert(q.nodes.begin(), 0.5 * stats.grid.t_min);
  q.weights.insert(q.weights.begin(), stats.grid.t_min);
  return q;
}

RowFunction network_function(const DgmParams& params, const InputScaler& scaler) {
  return [params, scaler](const std::vector<SamplePoint>& pts) { return dgm_forward(params, scale_points(scaler, pts)); };
}

RowFunction spec_row_function(const KernelSpec& spec, std::size_t i) {
  return [spec, i](const std::vector<SamplePoint>& pts) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(spec.dimension()), static_cast<Eigen::Index>(pts.size()));
    for (std::size_t n = 0; n < pts.size(); ++n)
      for (std::size_t j = 0; j < spec.dimension(); ++j)
        out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(n)) =
            pts[n].t < 0.0 ? 0.0 : kernel_eval(spec, i, j, pts[n].t, pts[n].m);
    return out;
  };
}

Eigen::MatrixXd residuals(std::size_t i, const RowFunction& u, const SecondOrderStats& stats,
                          const QuadratureGrid& quad, const std::vector<SamplePoint>& points) {
  if (i >= stats.dim) throw ArgumentError("row index out of range");
  stats.require_complete();
  const RowMajor A = build_operator(stats, quad, points);
  return residual_from(g_at(i, stats, points), u(points), A, u(quadrature_points(quad, stats.marks)));
}

Eigen::MatrixXd temporal_weights(const Eigen::MatrixXd& eps, double strength) {
  const auto N = eps.rows();
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(N, eps.cols());
  for (Eigen::Index j = 0; j < eps.cols(); ++j) {
    Eigen::VectorXd cum(N);
    double acc = 0.0;
    for (Eigen::Index n = 0; n < N; ++n) cum(n) = acc += eps(n, j) * eps(n, j);
    const double total = acc;
    if (!(total > 0.0)) continue;
    for (Eigen::Index n = 1; n < N; ++n) w(n, j) = std::exp(-strength * cum(n - 1) / total);
  }
  return w;
}

std::vector<double> magnitude_weights(const SecondOrderStats& stats, const QuadratureGrid& quad) {
  const std::size_t D = stats.dim;
  const auto M = static_cast<std::size_t>(stats.marks);
  std::vector<double> inv(D * D * M);
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D; ++j)
      for (std::size_t x = 0; x < M; ++x) {
        const double I = quad.integrate(
            [&](double s) { return std::abs(interpolate_g(stats, i, j, s, static_cast<int>(x) + 1)); });
        if (!(I > 0.0))
          throw EstimationError("G^{" + std::to_string(i + 1) + std::to_string(j + 1) + "} vanishes for mark " +
                                std::to_string(x + 1) + "; magnitude weights undefined");
        inv[(i * D + j) * M + x] = 1.0 / I;
      }
  std::vector<double> zeta(inv.size());
  for (std::size_t x = 0; x < M; ++x) {
    double total = 0.0;
    for (std::size_t ij = 0; ij < D * D; ++ij) total += inv[ij * M + x];
    for (std::size_t ij = 0; ij < D * D; ++ij) zeta[ij * M + x] = inv[ij * M + x] / total;
  }
  return zeta;
}

// ---------------------------------------------------------------- training

RowModel train_row(std::size_t i, const SecondOrderStats& stats, const TrainConfig& cfg) {
  cfg.validate();
  stats.validate();
  if (i >= stats.dim) throw ArgumentError("row index out of range");
  stats.require_complete();
  const std::size_t D = stats.dim;
  const int M = stats.marks;
  const double T = stats.grid.T;
  const double tau = cfg.short_threshold > 0.0 ? cfg.short_threshold
                     : stats.grid.h < T        ? stats.grid.h
                                               : T / 10.0;
  if (!(tau < T)) throw ArgumentError("short-time threshold must be below T");

  const QuadratureGrid quad = solver_quadrature(stats, cfg.quadrature);
  RowModel model;
  model.row = i;
  model.marks = M;
  model.horizon = T;
  model.config = cfg;
  model.scaler = InputScaler::for_marks(M, stats.grid.t_min / 10.0);
  Rng rng(derive_seed(cfg.seed, i));
  model.params = dgm_init({cfg.width, cfg.cells, static_cast<int>(D)}, rng.next());
  if (cfg.epochs == 0) return model;

  std::vector<double> zeta;
  if (cfg.magnitude_weighting) zeta = magnitude_weights(stats, quad);
  const auto zeta_at = [&](std::size_t j, int x) {
    return zeta.empty() ? 1.0 : zeta[(i * D + j) * static_cast<std::size_t>(M) + static_cast<std::size_t>(x - 1)];
  };

  const auto quad_pts = quadrature_points(quad, M);
  const Eigen::MatrixXd xq = scale_points(model.scaler, quad_pts);
  std::vector<SamplePoint> end_pts;
  for (int x = 1; x <= M; ++x) end_pts.push_back({T, x});
  const Eigen::MatrixXd xc = scale_points(model.scaler, end_pts);
  const bool continuity = cfg.continuity_weight > 0.0;

  const auto B = static_cast<Eigen::Index>(cfg.batch);
  const auto NQ = xq.cols();
  const auto NC = continuity ? xc.cols() : 0;
  const auto Dx = static_cast<Eigen::Index>(D);
  Eigen::MatrixXd xb(2, B + NQ + NC);
  xb.middleCols(B, NQ) = xq;
  if (continuity) xb.rightCols(NC) = xc;
  Eigen::MatrixXd coeff(Dx, xb.cols());
  std::vector<double> grad(model.params.theta.size());
  std::vector<double> m1, m2;
  if (cfg.optimizer == Optimizer::Adam) {
    m1.assign(grad.size(), 0.0);
    m2.assign(grad.size(), 0.0);
  }
  long adam_step = 0;
  auto& theta = model.params.theta;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto train = sample_training_set(cfg.train_size, cfg.short_fraction, tau, T, M, rng);
    const auto valid = sample_training_set(cfg.validation_size, cfg.short_fraction, tau, T, M, rng);
    const RowMajor A = build_operator(stats, quad, train);
    const Eigen::MatrixXd g_train = g_at(i, stats, train);
    const Eigen::MatrixXd x_train = scale_points(model.scaler, train);

    // residuals and temporal weights over the whole set, frozen for the epoch
    Eigen::MatrixXd eps_all = residual_from(g_train, dgm_forward(model.params, x_train), A,
                                            dgm_forward(model.params, xq));
    const Eigen::MatrixXd omega = temporal_weights(eps_all, cfg.temporal_eps);
    const double lr = cfg.learning_rate(epoch);

    for (Eigen::Index start = 0; start < x_train.cols(); start += B) {
      xb.leftCols(B) = x_train.middleCols(start, B);
      const Eigen::MatrixXd out = dgm_forward(model.params, xb);
      const Eigen::MatrixXd uq = out.middleCols(B, NQ);
      const Eigen::Map<const Eigen::VectorXd> uq_vec(uq.data(), uq.size());
      const auto A_batch = A.middleRows(start * Dx, B * Dx);
      const Eigen::VectorXd integral = A_batch * uq_vec;
      Eigen::VectorXd c_points(B * Dx);
      coeff.setZero();
      double batch_loss = 0.0;
      for (Eigen::Index n = 0; n < B; ++n) {
        const auto& p = train[static_cast<std::size_t>(start + n)];
        for (Eigen::Index j = 0; j < Dx; ++j) {
          const double e = g_train(start + n, j) - out(j, n) - integral(n * Dx + j);
          const double w = zeta_at(static_cast<std::size_t>(j), p.m) * omega(start + n, j);
          batch_loss += w * e * e / static_cast<double>(B);
          const double c = -2.0 * w * e / static_cast<double>(B);
          c_points(n * Dx + j) = c;
          coeff(j, n) = c;
        }
      }
      const Eigen::VectorXd c_quad = A_batch.transpose() * c_points;
      coeff.middleCols(B, NQ) = Eigen::Map<const Eigen::MatrixXd>(c_quad.data(), Dx, NQ);
      if (continuity) {
        coeff.rightCols(NC) = 2.0 * cfg.continuity_weight * out.rightCols(NC);
        batch_loss += cfg.continuity_weight * out.rightCols(NC).squaredNorm();
      }
      if (!std::isfinite(batch_loss))
        throw DivergenceError("row " + std::to_string(i + 1) + ": non-finite loss in epoch " + std::to_string(epoch),
                              epoch);
      std::fill(grad.begin(), grad.end(), 0.0);
      dgm_gradient(model.params, xb, coeff, grad);
      if (cfg.optimizer == Optimizer::Sgd) {
        for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= lr * grad[k];
      } else {
        ++adam_step;
        const double b1 = 0.9, b2 = 0.999;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam_step));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam_step));
        for (std::size_t k = 0; k < theta.size(); ++k) {
          m1[k] = b1 * m1[k] + (1.0 - b1) * grad[k];
          m2[k] = b2 * m2[k] + (1.0 - b2) * grad[k] * grad[k];
          theta[k] -= lr * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + 1e-8);
        }
      }
    }

    const Eigen::MatrixXd eps_val = residual_from(g_at(i, stats, valid),
                                                  dgm_forward(model.params, scale_points(model.scaler, valid)),
                                                  build_operator(stats, quad, valid), dgm_forward(model.params, xq));
    const double loss = eps_val.squaredNorm() / static_cast<double>(valid.size());
    if (!std::isfinite(loss))
      throw DivergenceError("row " + std::to_string(i + 1) + ": non-finite validation loss in epoch " +
                                std::to_string(epoch),
                            epoch);
    model.loss_history.push_back(loss);
  }
  return model;
}

std::vector<RowModel> fit(const SecondOrderStats& stats, const TrainConfig& config, int jobs) {
  const std::size_t D = stats.dim;
  std::vector<RowModel> models(D);
  std::vector<std::exception_ptr> errors(D);
  const auto run = [&](std::size_t i) {
    try {
      models[i] = train_row(i, stats, config);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), D);
  if (workers <= 1) {
    for (std::size_t i = 0; i < D; ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < D; i += workers) run(i);
      });
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < D; ++i)
    if (errors[i]) {
      try {
        std::rethrow_exception(errors[i]);
      } catch (const DivergenceError&) {
        throw;
      } catch (const NumericalError& e) {
        throw NumericalError("row " + std::to_string(i + 1) + ": " + e.what());
      } catch (const ArgumentError& e) {
        throw ArgumentError("row " + std::to_string(i + 1) + ": " + e.what());
      }
    }
  return models;
}

// ---------------------------------------------------------------- tabulation

NormMatrix fitted_norms(const std::vector<RowModel>& models, const SecondOrderStats& stats,
                        const QuadratureGrid& quad, bool absolute) {
  const std::size_t D = stats.dim;
  if (models.size() != D) throw ArgumentError("need one model per row");
  const auto pts = quadrature_points(quad, stats.marks);
  NormMatrix norms(D);
  for (std::size_t i = 0; i < D; ++i) {
    const Eigen::MatrixXd u = network_function(models[i].params, models[i].scaler)(pts);
    for (std::size_t j = 0; j < D; ++j) {
      double total = 0.0;
      for (std::size_t c = 0; c < pts.size(); ++c) {
        const auto q = c % quad.size();
        const double v = u(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c));
        total += stats.pmf[j][static_cast<std::size_t>(pts[c].m - 1)] * quad.weights[q] * (absolute ? std::abs(v) : v);
      }
      norms(i, j) = total;
    }
  }
  return norms;
}

KernelSpec tabulate(const std::vector<RowModel>& models, const SecondOrderStats& stats,
                    const std::vector<double>& nodes) {
  const std::size_t D = stats.dim;
  const int M = stats.marks;
  if (models.size() != D) throw ArgumentError("need one model per row");
  if (nodes.size() < 2) throw ArgumentError("tabulation needs at least two nodes");
  std::vector<KernelEntry> entries(D * D);
  for (std::size_t i = 0; i < D; ++i) {
    std::vector<SamplePoint> pts;
    for (int m = 1; m <= M; ++m)
      for (double t : nodes) pts.push_back({t, m});
    const Eigen::MatrixXd u = network_function(models[i].params, models[i].scaler)(pts);
    for (std::size_t j = 0; j < D; ++j) {
      Tabulated tab;
      tab.grid = nodes;
      tab.values.assign(static_cast<std::size_t>(M), std::vector<double>(nodes.size()));
      tab.maxima.assign(static_cast<std::size_t>(M), 0.0);
      for (int m = 1; m <= M; ++m)
        for (std::size_t k = 0; k < nodes.size(); ++k) {
          const double v = u(static_cast<Eigen::Index>(j),
                             static_cast<Eigen::Index>(static_cast<std::size_t>(m - 1) * nodes.size() + k));
          tab.values[static_cast<std::size_t>(m - 1)][k] = v;
          tab.maxima[static_cast<std::size_t>(m - 1)] = std::max(tab.maxima[static_cast<std::size_t>(m - 1)], v);
        }
      entries[i * D + j] = {std::move(tab), MarkFactor::None};
    }
  }
  std::vector<double> baseline(D, 0.0);
  try {
    const QuadratureGrid quad = solver_quadrature(stats, models.front().config.quadrature);
    baseline = baseline_from_rates(fitted_norms(models, stats, quad), stats.rates);
    for (double& mu : baseline) mu = std::max(mu, 0.0);
  } catch (const StationarityError&) {
    std::fill(baseline.begin(), baseline.end(), 0.0);
  }
  return KernelSpec(D, M, baseline, stats.pmf, std::move(entries));
}

SecondOrderStats refit_stats(const std::vector<RowFunction>& rows, const SecondOrderStats& stats,
                             const QuadratureGrid& quad) {
  const std::size_t D = stats.dim;
  if (rows.size() != D) throw ArgumentError("need one row function per row");
  std::vector<SamplePoint> pts;
  for (int m = 1; m <= stats.marks; ++m)
    for (std::size_t b = 0; b < stats.grid.bins(); ++b) pts.push_back({stats.grid.center(b), m});
  const RowMajor A = build_operator(stats, quad, pts);
  const auto quad_pts = quadrature_points(quad, stats.marks);
  SecondOrderStats out = stats;
  for (std::size_t i = 0; i < D; ++i) {
    const Eigen::MatrixXd u = rows[i](pts);
    const Eigen::MatrixXd uq = rows[i](quad_pts);
    const Eigen::VectorXd integral = A * Eigen::Map<const Eigen::VectorXd>(uq.data(), uq.size());
    for (std::size_t n = 0; n < pts.size(); ++n) {
      const std::size_t b = n % stats.grid.bins();
      for (std::size_t j = 0; j < D; ++j)
        out.g(i, j, pts[n].m, b) = u(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(n)) +
                                   integral(static_cast<Eigen::Index>(n * D + j));
    }
  }
  return out;
}

GoodnessOfFit goodness_of_fit(const std::vector<RowModel>& models, const SecondOrderStats& stats,
                              std::size_t n_events, std::uint64_t seed, std::size_t table_nodes) {
  if (n_events == 0) throw ArgumentError("goodness of fit needs n_events > 0");
  const QuadratureGrid quad = solver_quadrature(stats, models.at(0).config.quadrature);
  const NormMatrix norms = fitted_norms(models, stats, quad);
  GoodnessOfFit r;
  r.branching_ratio = branching_ratio(norms);
  if (r.branching_ratio >= 1.0)
    throw StationarityError("fitted branching ratio " + format_double(r.branching_ratio) + " >= 1", r.branching_ratio);
  r.fitted_baseline = baseline_from_rates(norms, stats.rates);
  r.true_rates = stats.rates;

  std::vector<double> nodes(table_nodes);
  const double lo = stats.grid.t_min, hi = stats.grid.T;
  for (std::size_t k = 0; k < table_nodes; ++k)
    nodes[k] = lo * std::pow(hi / lo, static_cast<double>(k) / static_cast<double>(table_nodes - 1));
  nodes.back() = hi;
  const KernelSpec spec = tabulate(models, stats, nodes);

  double total_rate = 0.0;
  for (double l : stats.rates) total_rate += l;
  SimConfig sim{spec, 100.0 * static_cast<double>(n_events) / total_rate + stats.grid.T * 10.0, seed};
  sim.stop_after_events = n_events;
  sim.max_events = n_events + 1;
  const SimResult res = simulate_with_diagnostics(sim);
  r.events = res.stream.size();
  r.clamp_fraction = res.diagnostics.clamp_fraction();
  const SecondOrderStats resim = estimate_second_order(res.stream, stats.grid);
  r.simulated_rates = resim.rates;
  for (std::size_t i = 0; i < stats.dim; ++i)
    r.rate_mare += std::abs(resim.rates[i] - stats.rates[i]) / stats.rates[i] / static_cast<double>(stats.dim);

  std::vector<RowFunction> rows;
  for (const auto& m : models) rows.push_back(network_function(m.params, m.scaler));
  const SecondOrderStats refit = refit_stats(rows, stats, quad);
  for (std::size_t q = 0; q < stats.values.size(); ++q) {
    r.g_mean_abs_diff += std::abs(resim.values[q] - stats.values[q]);
    r.refit_mean_abs_diff += std::abs(refit.values[q] - stats.values[q]);
    r.g_mean_abs += std::abs(stats.values[q]);
  }
  const double n = static_cast<double>(stats.values.size());
  r.g_mean_abs_diff /= n;
  r.refit_mean_abs_diff /= n;
  r.g_mean_abs /= n;
  return r;
}

}  // namespace nhawkes
