#include "nhawkes/metrics.hpp"

#include "nhawkes/error.hpp"
#include "nhawkes/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

namespace nhawkes {

KernelFunction spec_function(const KernelSpec& spec) {
  return [spec](std::size_t i, std::size_t j, double t, int m) { return kernel_eval(spec, i, j, t, m); };
}

KernelFunction model_function(const std::vector<RowModel>& models) {
  return [models](std::size_t i, std::size_t j, double t, int m) { return models.at(i).eval(t, m).at(j); };
}

KernelFunction wh_function(const WhSolution& sol) {
  return [sol](std::size_t i, std::size_t j, double t, int m) { return wh_reconstruct(sol, i, j, t, m); };
}

// ---------------------------------------------------------------- errors

double ErrorReport::delta2_subset(bool diagonal) const {
  double acc = 0.0, sup = 0.0;
  std::size_t n = 0;
  for (const auto& e : entries)
    if ((e.i == e.j) == diagonal) {
      acc += e.delta2 * e.delta2;
      sup = std::max(sup, e.sup_true);
      ++n;
    }
  if (n == 0 || sup == 0.0) return 0.0;
  return std::sqrt(acc / static_cast<double>(n)) / sup;
}

ErrorReport error_report(const KernelFunction& estimate, const KernelSpec& truth, std::size_t K, double T,
                         double t_first) {
  if (K < 1) throw ArgumentError("error grid needs K >= 1");
  if (!(T > 0.0)) throw ArgumentError("error grid needs T > 0");
  const std::size_t D = truth.dimension();
  const int M = truth.marks();
  std::vector<double> nodes(K + 1);
  for (std::size_t k = 0; k <= K; ++k) nodes[k] = T * static_cast<double>(k) / static_cast<double>(K);
  nodes[0] = t_first;

  ErrorReport r;
  r.K = K;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D; ++j)
      for (int m = 1; m <= M; ++m) {
        EntryError e{i, j, m, 0.0, 0.0, 0.0};
        for (double t : nodes) {
          const double truth_v = kernel_eval(truth, i, j, t, m);
          const double d = estimate(i, j, t, m) - truth_v;
          e.delta2 += d * d;
          e.delta_inf = std::max(e.delta_inf, std::abs(d));
          e.sup_true = std::max(e.sup_true, std::abs(truth_v));
        }
        r.sup_true = std::max(r.sup_true, e.sup_true);
        sum_sq += e.delta2;
        e.delta2 = std::sqrt(e.delta2 / static_cast<double>(K + 1));
        r.delta_inf = std::max(r.delta_inf, e.delta_inf);
        r.entries.push_back(e);
      }
  r.delta2 = std::sqrt(sum_sq / static_cast<double>(D * D * static_cast<std::size_t>(M) * (K + 1)));
  if (r.sup_true > 0.0) {
    r.delta2_norm = r.delta2 / r.sup_true;
    r.delta_inf_norm = r.delta_inf / r.sup_true;
  }
  return r;
}

nlohmann::json to_json(const ErrorReport& r) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"i", e.i + 1},
                       {"j", e.j + 1},
                       {"mark", e.m},
                       {"delta2", e.delta2},
                       {"delta_inf", e.delta_inf},
                       {"sup_true", e.sup_true}});
  return {{"K", r.K},
          {"delta2", r.delta2},
          {"delta_inf", r.delta_inf},
          {"delta2_normalized", r.delta2_norm},
          {"delta_inf_normalized", r.delta_inf_norm},
          {"delta2_normalized_diagonal", r.delta2_subset(true)},
          {"delta2_normalized_off_diagonal", r.delta2_subset(false)},
          {"sup_true", r.sup_true},
          {"entries", entries}};
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ArgumentError("slope needs two or more (x, y) pairs");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0 && y[k] > 0.0)) throw ArgumentError("log-log slope needs positive values");
    mx += std::log(x[k]) / n;
    my += std::log(y[k]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(y[k]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw ArgumentError("log-log slope needs distinct x values");
  return sxy / sxx;
}

double total_variation(const std::vector<double>& v) {
  double tv = 0.0;
  for (std::size_t q = 1; q < v.size(); ++q) tv += std::abs(v[q] - v[q - 1]);
  return tv;
}

// ---------------------------------------------------------------- convergence

ConvergenceResult convergence_study(const KernelSpec& spec, const ConvergenceConfig& c) {
  if (c.events.size() < 3) throw ArgumentError("convergence study needs at least three sample sizes");
  for (std::size_t k = 1; k < c.events.size(); ++k)
    if (c.events[k] < c.events[k - 1]) throw ArgumentError("sample sizes must be nondecreasing");
  if (c.seeds.empty()) throw ArgumentError("convergence study needs at least one seed");
  c.train.validate();
  const StatGrid grid = build_grid(c.h, c.n_lin, c.n_log, c.T);
  const auto rates = rates_from_baseline(kernel_l1_norm_exact(spec, INFINITY), spec.baseline());
  double total_rate = 0.0;
  for (double l : rates) total_rate += l;

  const std::size_t S = c.seeds.size();
  const std::size_t jobs_total = c.events.size() * S;
  std::vector<ErrorReport> reports(jobs_total);
  std::vector<std::exception_ptr> errors(jobs_total);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < jobs_total;) {
      const std::size_t N = c.events[k / S];
      const std::uint64_t seed = c.seeds[k % S];
      try {
        SimConfig sim{spec, 20.0 * static_cast<double>(N) / total_rate + 100.0 * c.T, seed};
        sim.stop_after_events = N;
        sim.max_events = N + 1;
        const auto stats = estimate_second_order(simulate(sim), grid);
        TrainConfig train = c.train;
        train.seed = seed;
        const auto models = fit(stats, train, 1);
        reports[k] = error_report(model_function(models), spec, c.K, c.T, grid.t_min);
      } catch (const std::exception& e) {
        errors[k] = std::make_exception_ptr(
            NumericalError("convergence study failed at N = " + std::to_string(N) + ": " + e.what()));
      }
    }
  };
  const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(c.jobs, 1)), jobs_total);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ConvergenceResult r;
  std::vector<double> xs, y2, yinf;
  for (std::size_t n = 0; n < c.events.size(); ++n) {
    ConvergencePoint p;
    p.events = c.events[n];
    for (std::size_t s = 0; s < S; ++s) {
      p.delta2_norm.push_back(reports[n * S + s].delta2_norm);
      p.delta_inf_norm.push_back(reports[n * S + s].delta_inf_norm);
      p.mean_delta2_norm += p.delta2_norm.back() / static_cast<double>(S);
      p.mean_delta_inf_norm += p.delta_inf_norm.back() / static_cast<double>(S);
    }
    xs.push_back(static_cast<double>(p.events));
    y2.push_back(p.mean_delta2_norm);
    yinf.push_back(p.mean_delta_inf_norm);
    r.points.push_back(std::move(p));
  }
  if (xs.front() == xs.back()) {
    r.slope_delta2 = r.slope_delta_inf = std::numeric_limits<double>::quiet_NaN();
  } else {
    r.slope_delta2 = loglog_slope(xs, y2);
    r.slope_delta_inf = loglog_slope(xs, yinf);
  }
  return r;
}

nlohmann::json to_json(const ConvergenceResult& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points)
    pts.push_back({{"events", p.events},
                   {"delta2_normalized", p.delta2_norm},
                   {"delta_inf_normalized", p.delta_inf_norm},
                   {"mean_delta2_normalized", p.mean_delta2_norm},
                   {"mean_delta_inf_normalized", p.mean_delta_inf_norm}});
  return {{"points", pts}, {"slope_delta2", r.slope_delta2}, {"slope_delta_inf", r.slope_delta_inf}};
}

// ---------------------------------------------------------------- causality

CausalityReport causality_report(const NormMatrix& norms, const std::vector<double>& rates,
                                 const std::vector<double>& volumes) {
  const std::size_t D = norms.dim;
  if (rates.size() != D || volumes.size() != D) throw ArgumentError("rates and volumes need one entry per component");
  for (double l : rates)
    if (!(l > 0.0) || !std::isfinite(l)) throw ArgumentError("rates must be positive");
  double total_volume = 0.0;
  for (double v : volumes) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError("volumes must be nonnegative");
    total_volume += v;
  }
  if (!(total_volume > 0.0)) throw ArgumentError("total volume must be positive");

  CausalityReport r;
  r.norms = norms;
  r.branching_ratio = branching_ratio(norms);
  r.spillover = NormMatrix(D);
  r.leader.assign(D, 0.0);
  r.receiver.assign(D, 0.0);
  r.participation.assign(D, 0.0);
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D; ++j)
      if (i != j) r.spillover(i, j) = rates[j] / rates[i] * norms(i, j);
  for (std::size_t j = 0; j < D; ++j) {
    double others = 0.0, impact = 0.0;
    for (std::size_t i = 0; i < D; ++i)
      if (i != j) {
        others += rates[i];
        impact += norms(i, j);
      }
    r.leader[j] = others > 0.0 ? rates[j] / others * impact : 0.0;
    r.participation[j] = volumes[j] / total_volume;
  }
  for (std::size_t i = 0; i < D; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < D; ++j)
      if (j != i) acc += rates[j] * norms(i, j);
    r.receiver[i] = acc / rates[i];
  }
  if (r.branching_ratio < 1.0) r.baseline = baseline_from_rates(norms, rates);
  return r;
}

nlohmann::json to_json(const CausalityReport& r) {
  const auto matrix = [](const NormMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.dim; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t j = 0; j < m.dim; ++j) row.push_back(m(i, j));
      rows.push_back(row);
    }
    return rows;
  };
  nlohmann::json j = {{"norms", matrix(r.norms)},
                      {"branching_ratio", r.branching_ratio},
                      {"spillover", matrix(r.spillover)},
                      {"leader", r.leader},
                      {"receiver", r.receiver},
                      {"participation", r.participation}};
  j["baseline"] = r.baseline ? nlohmann::json(*r.baseline) : nlohmann::json(nullptr);
  return j;
}

}  // namespace nhawkes
