#include "nhawkes/simulator.hpp"

#include "nhawkes/first_order.hpp"
#include "nhawkes/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

namespace nhawkes {

namespace {

int draw_mark(Rng& rng, const std::vector<double>& pmf) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t m = 0; m < pmf.size(); ++m) {
    acc += pmf[m];
    if (u < acc) return static_cast<int>(m) + 1;
  }
  for (std::size_t m = pmf.size(); m-- > 0;)
    if (pmf[m] > 0.0) return static_cast<int>(m) + 1;
  return 1;
}

struct PastEvent {
  double time;
  int mark;
};

class ThinningState {
public:
  ThinningState(const SimConfig& cfg)
      : spec_(cfg.spec),
        D_(spec_.dimension()),
        M_(spec_.marks()),
        recursive_(D_ * D_, 0.0),
        window_(D_, 0.0),
        history_(D_) {
    for (std::size_t i = 0; i < D_; ++i)
      for (std::size_t j = 0; j < D_; ++j) {
        const auto& e = spec_.entry(i, j);
        if (std::holds_alternative<ZeroKernel>(e.family) || is_exponential(e)) continue;
        if (const auto* tab = std::get_if<Tabulated>(&e.family); tab && tab->maxima.empty())
          throw ArgumentError("tabulated kernel lacks stored maxima; no thinning bound");
        double h = kernel_prune_horizon(e, M_, cfg.prune_rel_tol);
        if (h > cfg.prune_horizon_cap) {
          h = cfg.prune_horizon_cap;
          pruned_mass_ = std::max(pruned_mass_, lost_mass(e, h));
        }
        window_[j] = std::max(window_[j], h);
        windowed_.push_back({i, j});
      }
  }

  double pruned_mass() const { return pruned_mass_; }

  // Decay recursive states to time t and drop stale history.
  void advance(double t) {
    const double dt = t - now_;
    if (dt > 0.0) {
      for (std::size_t i = 0; i < D_; ++i)
        for (std::size_t j = 0; j < D_; ++j) {
          double& r = recursive_[i * D_ + j];
          if (r != 0.0) r *= std::exp(-std::get<Exponential>(spec_.entry(i, j).family).beta * dt);
        }
    }
    now_ = t;
    for (std::size_t j = 0; j < D_; ++j) {
      auto& h = history_[j];
      while (!h.empty() && t - h.front().time > window_[j]) h.pop_front();
    }
  }

  double bound() const {
    double total = 0.0;
    for (std::size_t i = 0; i < D_; ++i) {
      total += spec_.baseline()[i];
      for (std::size_t j = 0; j < D_; ++j) total += std::max(recursive_[i * D_ + j], 0.0);
    }
    for (const auto& [i, j] : windowed_)
      for (const auto& ev : history_[j]) total += kernel_envelope(spec_.entry(i, j), now_ - ev.time, ev.mark, M_);
    return total;
  }

  // Raw (unclamped) intensities at the current time.
  void intensities(std::vector<double>& out) const {
    out.assign(spec_.baseline().begin(), spec_.baseline().end());
    for (std::size_t i = 0; i < D_; ++i)
      for (std::size_t j = 0; j < D_; ++j) out[i] += recursive_[i * D_ + j];
    for (const auto& [i, j] : windowed_)
      for (const auto& ev : history_[j]) out[i] += kernel_value(spec_.entry(i, j), now_ - ev.time, ev.mark, M_);
  }

  void add_event(std::size_t j, int mark) {
    for (std::size_t i = 0; i < D_; ++i) {
      const auto& e = spec_.entry(i, j);
      if (const auto* k = std::get_if<Exponential>(&e.family))
        recursive_[i * D_ + j] += k->alpha * mark_factor_value(e.factor, mark, M_);
    }
    if (window_[j] > 0.0) history_[j].push_back({now_, mark});
  }

private:
  double lost_mass(const KernelEntry& e, double h) const {
    double kept = 0.0, full = 0.0;
    for (int m = 1; m <= M_; ++m) {
      kept += std::abs(kernel_integral(e, h, m, M_));
      full += std::abs(kernel_integral(e, std::numeric_limits<double>::infinity(), m, M_));
    }
    if (std::isinf(full)) return 1.0;
    return full > 0.0 ? 1.0 - kept / full : 0.0;
  }

  const KernelSpec& spec_;
  std::size_t D_;
  int M_;
  double now_ = 0.0;
  std::vector<double> recursive_;
  std::vector<double> window_;
  std::vector<std::deque<PastEvent>> history_;
  std::vector<std::pair<std::size_t, std::size_t>> windowed_;
  double pruned_mass_ = 0.0;
};

}  // namespace

std::vector<double> intensity_at(const KernelSpec& spec, const EventStream& history, double t) {
  if (history.dimension() != spec.dimension() || history.marks() != spec.marks())
    throw ArgumentError("history does not match the kernel spec shape");
  const auto events = history.events();
  if (!events.empty() && t < events.back().time) throw ArgumentError("intensity time precedes the history");
  std::vector<double> lambda = spec.baseline();
  for (const auto& ev : events) {
    if (ev.time >= t) continue;
    for (std::size_t i = 0; i < spec.dimension(); ++i)
      lambda[i] += kernel_value(spec.entry(i, ev.component), t - ev.time, ev.mark, spec.marks());
  }
  for (double& l : lambda) l = std::max(l, 0.0);
  return lambda;
}

SimResult simulate_with_diagnostics(const SimConfig& cfg) {
  const KernelSpec& spec = cfg.spec;
  if (!(cfg.horizon > 0.0)) throw ArgumentError("simulation horizon must be > 0");
  if (cfg.max_events == 0) throw ArgumentError("max_events must be > 0");
  const NormMatrix norms = kernel_l1_norm_exact(spec, std::numeric_limits<double>::infinity());
  for (double v : norms.values)
    if (!std::isfinite(v)) throw StationarityError("kernel with infinite L1 norm", INFINITY);
  const double rho = branching_ratio(norms);
  if (rho >= 1.0) throw StationarityError("branching ratio " + std::to_string(rho) + " >= 1", rho);

  const std::size_t D = spec.dimension();
  ThinningState state(cfg);
  Rng rng(derive_seed(cfg.seed, 0));
  std::vector<Rng> mark_rngs;
  for (std::size_t j = 0; j < D; ++j) mark_rngs.emplace_back(derive_seed(cfg.seed, j + 1));

  SimDiagnostics diag;
  diag.pruned_mass = state.pruned_mass();
  std::vector<Event> events;
  std::vector<double> lambda;
  double t = 0.0;
  double horizon = cfg.horizon;
  bool truncated = false;
  while (true) {
    const double bound = state.bound();
    if (!(bound > 0.0)) break;
    const double candidate = t + rng.exponential(bound);
    if (candidate > cfg.horizon) break;
    if (candidate <= t) continue;
    t = candidate;
    state.advance(t);
    state.intensities(lambda);
    ++diag.candidates;
    double total = 0.0;
    bool clamped = false;
    for (double& l : lambda) {
      if (l < cfg.intensity_floor) {
        l = cfg.intensity_floor;
        clamped = true;
      }
      total += l;
    }
    if (clamped) ++diag.clamped;
    const double u = rng.uniform() * bound;
    if (u >= total) continue;
    std::size_t comp = 0;
    double acc = lambda[0];
    while (u >= acc && comp + 1 < D) acc += lambda[++comp];
    const int mark = draw_mark(mark_rngs[comp], spec.mark_pmf(comp));
    events.push_back({t, static_cast<std::uint32_t>(comp), mark});
    state.add_event(comp, mark);
    ++diag.accepted;
    if (cfg.stop_after_events > 0 && events.size() >= cfg.stop_after_events) {
      horizon = t;
      break;
    }
    if (events.size() >= cfg.max_events) {
      horizon = t;
      truncated = true;
      break;
    }
  }
  EventStream stream(D, spec.marks(), horizon, std::move(events));
  if (truncated)
    throw TruncationError("max_events reached at t=" + std::to_string(horizon), std::move(stream));
  return {std::move(stream), diag};
}

EventStream simulate(const SimConfig& config) { return simulate_with_diagnostics(config).stream; }

}  // namespace nhawkes
