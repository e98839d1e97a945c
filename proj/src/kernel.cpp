#include "nhawkes/kernel.hpp"

#include "nhawkes/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nhawkes {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * M_PI);

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// One Gaussian mode of a bimodal kernel: alpha / (2 sqrt(2 pi) sigma) * exp(...)
double mode_value(double alpha, double center, double sigma, double t) {
  const double z = (t - center) / sigma;
  return 0.5 * alpha * kInvSqrt2Pi / sigma * std::exp(-0.5 * z * z);
}

double mode_envelope(double alpha, double center, double sigma, double t) {
  if (alpha <= 0.0) return 0.0;
  return mode_value(alpha, center, sigma, std::max(t, center));
}

double mode_integral(double alpha, double center, double sigma, double T) {
  const double upper = std::isinf(T) ? 1.0 : normal_cdf((T - center) / sigma);
  return 0.5 * alpha * (upper - normal_cdf(-center / sigma));
}

// z such that the upper normal tail beyond z equals rel.
double normal_tail_quantile(double rel) {
  double lo = 0.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(mid / std::sqrt(2.0)) > rel ? lo : hi) = mid;
  }
  return hi;
}

double shifted_center(const NonMultiplicativeBimodal& k, int mark, int marks) {
  const double x = mark;
  return (x - 1.0) / marks * k.mu_lo + (marks - x + 1.0) / marks * k.mu_hi;
}

double exp_integral(double alpha, double beta, double length) {
  if (length <= 0.0) return 0.0;
  if (std::isinf(length)) return alpha / beta;
  return alpha / beta * -std::expm1(-beta * length);
}

double table_value(const Tabulated& tab, double t, int mark) {
  const auto& g = tab.grid;
  const auto& v = tab.values[static_cast<std::size_t>(mark - 1)];
  if (t > g.back()) return 0.0;
  if (t <= g.front()) return v.front();
  const auto it = std::upper_bound(g.begin(), g.end(), t);
  const auto k = static_cast<std::size_t>(it - g.begin());  // g[k-1] <= t < g[k]
  if (k >= g.size()) return v.back();
  const double w = (t - g[k - 1]) / (g[k] - g[k - 1]);
  return v[k - 1] + w * (v[k] - v[k - 1]);
}

double table_envelope(const Tabulated& tab, double t, int mark) {
  const auto& g = tab.grid;
  if (t > g.back()) return 0.0;
  const auto m = static_cast<std::size_t>(mark - 1);
  std::vector<double> local;
  const std::vector<double>* suffix = nullptr;
  if (tab.suffix_max.size() == tab.values.size()) {
    suffix = &tab.suffix_max[m];
  } else {
    local = tab.values[m];
    double run = 0.0;
    for (std::size_t k = local.size(); k-- > 0;) local[k] = run = std::max(run, std::max(local[k], 0.0));
    suffix = &local;
  }
  if (t <= g.front()) return (*suffix)[0];
  const auto k = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), t) - g.begin());
  const double tail = k < g.size() ? (*suffix)[k] : 0.0;
  return std::max(std::max(table_value(tab, t, mark), 0.0), tail);
}

double table_integral(const Tabulated& tab, double T, int mark) {
  const auto& g = tab.grid;
  const auto& v = tab.values[static_cast<std::size_t>(mark - 1)];
  double total = v.front() * std::min(g.front(), T);
  for (std::size_t k = 1; k < g.size(); ++k) {
    if (g[k - 1] >= T) break;
    const double hi = std::min(g[k], T);
    const double vhi = table_value(tab, hi, mark);
    total += 0.5 * (v[k - 1] + vhi) * (hi - g[k - 1]);
  }
  return total;
}

}  // namespace

double mark_factor_value(MarkFactor factor, int mark, int marks) {
  const double x = mark;
  const double M = marks;
  switch (factor) {
    case MarkFactor::Constant:
    case MarkFactor::None:
      return 1.0;
    case MarkFactor::Linear:
      return 2.0 * x / (M + 1.0);
    case MarkFactor::Quadratic:
      return 6.0 * x * x / ((M + 1.0) * (2.0 * M + 1.0));
  }
  return 1.0;
}

double kernel_value(const KernelEntry& entry, double t, int mark, int marks) {
  if (t < 0.0) return 0.0;
  const double time_part = std::visit(
      overloaded{
          [](const ZeroKernel&) { return 0.0; },
          [t](const Exponential& k) { return k.alpha * std::exp(-k.beta * t); },
          [t](const PowerLaw& k) { return k.alpha * std::pow(k.gamma + t, -k.beta); },
          [t](const DelayedExponential& k) {
            return t >= k.delay ? k.alpha * std::exp(-k.beta * (t - k.delay)) : 0.0;
          },
          [t](const InhibitionTwoPhase& k) {
            return t < k.delay ? k.alpha_lo * std::exp(-k.beta_lo * t)
                               : k.alpha_hi * std::exp(-k.beta_hi * (t - k.delay));
          },
          [t](const BimodalGaussian& k) {
            return mode_value(k.alpha, k.mu_lo, k.sigma_lo, t) +
                   mode_value(k.alpha, k.mu_hi, k.sigma_hi, t);
          },
          [t, mark, marks](const NonMultiplicativeBimodal& k) {
            return mode_value(k.alpha, k.mu_lo, k.sigma_lo, t) +
                   mode_value(k.alpha, shifted_center(k, mark, marks), k.sigma_hi, t);
          },
          [t, mark](const Tabulated& k) { return table_value(k, t, mark); },
      },
      entry.family);
  return time_part * mark_factor_value(entry.factor, mark, marks);
}

double kernel_envelope(const KernelEntry& entry, double t, int mark, int marks) {
  t = std::max(t, 0.0);
  const double f = mark_factor_value(entry.factor, mark, marks);
  const double time_env = std::visit(
      overloaded{
          [](const ZeroKernel&) { return 0.0; },
          [t](const Exponential& k) { return k.alpha > 0.0 ? k.alpha * std::exp(-k.beta * t) : 0.0; },
          [t](const PowerLaw& k) { return k.alpha > 0.0 ? k.alpha * std::pow(k.gamma + t, -k.beta) : 0.0; },
          [t](const DelayedExponential& k) {
            if (k.alpha <= 0.0) return 0.0;
            return t <= k.delay ? k.alpha : k.alpha * std::exp(-k.beta * (t - k.delay));
          },
          [t](const InhibitionTwoPhase& k) {
            double env = 0.0;
            if (t < k.delay && k.alpha_lo > 0.0) env = k.alpha_lo * std::exp(-k.beta_lo * t);
            if (k.alpha_hi > 0.0)
              env = std::max(env, t <= k.delay ? k.alpha_hi
                                               : k.alpha_hi * std::exp(-k.beta_hi * (t - k.delay)));
            return env;
          },
          [t](const BimodalGaussian& k) {
            return mode_envelope(k.alpha, k.mu_lo, k.sigma_lo, t) +
                   mode_envelope(k.alpha, k.mu_hi, k.sigma_hi, t);
          },
          [t, mark, marks](const NonMultiplicativeBimodal& k) {
            return mode_envelope(k.alpha, k.mu_lo, k.sigma_lo, t) +
                   mode_envelope(k.alpha, shifted_center(k, mark, marks), k.sigma_hi, t);
          },
          [t, mark](const Tabulated& k) { return table_envelope(k, t, mark); },
      },
      entry.family);
  return time_env * f;
}

double kernel_integral(const KernelEntry& entry, double T, int mark, int marks) {
  if (T <= 0.0) return 0.0;
  const double f = mark_factor_value(entry.factor, mark, marks);
  const double time_int = std::visit(
      overloaded{
          [](const ZeroKernel&) { return 0.0; },
          [T](const Exponential& k) { return exp_integral(k.alpha, k.beta, T); },
          [T](const PowerLaw& k) {
            if (k.beta == 1.0) return std::isinf(T) ? kInf : k.alpha * std::log((k.gamma + T) / k.gamma);
            const double head = std::pow(k.gamma, 1.0 - k.beta);
            const double tail = std::isinf(T) ? (k.beta > 1.0 ? 0.0 : kInf)
                                              : std::pow(k.gamma + T, 1.0 - k.beta);
            return k.alpha * (head - tail) / (k.beta - 1.0);
          },
          [T](const DelayedExponential& k) { return exp_integral(k.alpha, k.beta, T - k.delay); },
          [T](const InhibitionTwoPhase& k) {
            return exp_integral(k.alpha_lo, k.beta_lo, std::min(T, k.delay)) +
                   exp_integral(k.alpha_hi, k.beta_hi, T - k.delay);
          },
          [T](const BimodalGaussian& k) {
            return mode_integral(k.alpha, k.mu_lo, k.sigma_lo, T) +
                   mode_integral(k.alpha, k.mu_hi, k.sigma_hi, T);
          },
          [T, mark, marks](const NonMultiplicativeBimodal& k) {
            return mode_integral(k.alpha, k.mu_lo, k.sigma_lo, T) +
                   mode_integral(k.alpha, shifted_center(k, mark, marks), k.sigma_hi, T);
          },
          [T, mark](const Tabulated& k) { return table_integral(k, T, mark); },
      },
      entry.family);
  return time_int * f;
}

double kernel_prune_horizon(const KernelEntry& entry, int marks, double rel_tol) {
  const double decades = std::log(1.0 / rel_tol);
  return std::visit(
      overloaded{
          [](const ZeroKernel&) { return 0.0; },
          [&](const Exponential& k) { return decades / k.beta; },
          [&](const PowerLaw& k) {
            if (k.beta <= 1.0) return kInf;
            const double h = k.gamma * std::pow(rel_tol, -1.0 / (k.beta - 1.0)) - k.gamma;
            return std::isfinite(h) ? h : kInf;
          },
          [&](const DelayedExponential& k) { return k.delay + decades / k.beta; },
          [&](const InhibitionTwoPhase& k) {
            return std::max(k.delay, k.delay + decades / k.beta_hi);
          },
          [&](const BimodalGaussian& k) {
            const double z = normal_tail_quantile(rel_tol);
            return std::max(k.mu_lo + z * k.sigma_lo, k.mu_hi + z * k.sigma_hi);
          },
          [&](const NonMultiplicativeBimodal& k) {
            const double z = normal_tail_quantile(rel_tol);
            (void)marks;
            return std::max(k.mu_lo + z * k.sigma_lo,
                            std::max(k.mu_lo, k.mu_hi) + z * k.sigma_hi);
          },
          [](const Tabulated& k) { return k.grid.back(); },
      },
      entry.family);
}

bool is_exponential(const KernelEntry& entry) {
  return std::holds_alternative<Exponential>(entry.family);
}

void prepare_tabulated(Tabulated& tab, int marks) {
  if (tab.grid.size() < 2) throw ArgumentError("tabulated kernel needs at least two grid points");
  if (tab.grid.front() < 0.0) throw ArgumentError("tabulated grid must start at t >= 0");
  for (std::size_t k = 1; k < tab.grid.size(); ++k)
    if (!(tab.grid[k] > tab.grid[k - 1])) throw ArgumentError("tabulated grid must be strictly increasing");
  if (tab.values.size() != static_cast<std::size_t>(marks))
    throw ArgumentError("tabulated kernel needs one value row per mark");
  for (const auto& row : tab.values)
    if (row.size() != tab.grid.size()) throw ArgumentError("tabulated value row length != grid length");
  if (!tab.maxima.empty() && tab.maxima.size() != tab.values.size())
    throw ArgumentError("tabulated maxima must have one entry per mark");
  tab.suffix_max.assign(tab.values.size(), {});
  for (std::size_t m = 0; m < tab.values.size(); ++m) {
    auto& s = tab.suffix_max[m];
    s.resize(tab.grid.size());
    double run = 0.0;
    for (std::size_t k = s.size(); k-- > 0;) s[k] = run = std::max(run, std::max(tab.values[m][k], 0.0));
  }
}

std::vector<double> uniform_pmf(int marks) {
  return std::vector<double>(static_cast<std::size_t>(marks), 1.0 / marks);
}

KernelSpec::KernelSpec(std::size_t dimension, int marks, std::vector<double> baseline,
                       std::vector<KernelEntry> entries)
    : KernelSpec(dimension, marks, std::move(baseline),
                 std::vector<std::vector<double>>(dimension, uniform_pmf(std::max(marks, 1))),
                 std::move(entries)) {}

KernelSpec::KernelSpec(std::size_t dimension, int marks, std::vector<double> baseline,
                       std::vector<std::vector<double>> mark_pmf, std::vector<KernelEntry> entries)
    : dim_(dimension),
      marks_(marks),
      baseline_(std::move(baseline)),
      pmf_(std::move(mark_pmf)),
      entries_(std::move(entries)) {
  if (dim_ == 0) throw ArgumentError("kernel spec dimension must be >= 1");
  if (marks_ < 1) throw ArgumentError("kernel spec needs at least one mark");
  if (baseline_.size() != dim_) throw ArgumentError("baseline length must equal the dimension");
  for (double mu : baseline_)
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw ArgumentError("baseline rates must be finite and >= 0");
  if (pmf_.size() != dim_) throw ArgumentError("one mark pmf per component required");
  for (const auto& p : pmf_) {
    if (p.size() != static_cast<std::size_t>(marks_)) throw ArgumentError("mark pmf length must equal M");
    double total = 0.0;
    for (double v : p) {
      if (!(v >= 0.0)) throw ArgumentError("mark pmf entries must be >= 0");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ArgumentError("mark pmf must sum to 1");
  }
  if (entries_.size() != dim_ * dim_) throw ArgumentError("kernel matrix must have D*D entries");
  for (auto& e : entries_)
    if (auto* tab = std::get_if<Tabulated>(&e.family)) prepare_tabulated(*tab, marks_);
}

const KernelEntry& KernelSpec::entry(std::size_t i, std::size_t j) const {
  if (i >= dim_ || j >= dim_) throw ArgumentError("kernel index out of range");
  return entries_[i * dim_ + j];
}

KernelSpec KernelSpec::with_baseline(std::vector<double> baseline) const {
  return KernelSpec(dim_, marks_, std::move(baseline), pmf_, entries_);
}

double kernel_eval(const KernelSpec& spec, std::size_t i, std::size_t j, double t, int m) {
  if (i >= spec.dimension() || j >= spec.dimension()) throw ArgumentError("kernel index out of range");
  if (m < 1 || m > spec.marks()) throw ArgumentError("mark out of range");
  if (!(t >= 0.0)) throw ArgumentError("kernel time must be >= 0");
  return kernel_value(spec.entry(i, j), t, m, spec.marks());
}

// ---------------------------------------------------------------- JSON

namespace {

const char* factor_name(MarkFactor f) {
  switch (f) {
    case MarkFactor::Constant: return "f0";
    case MarkFactor::Linear: return "f1";
    case MarkFactor::Quadratic: return "f2";
    case MarkFactor::None: return "none";
  }
  return "f0";
}

MarkFactor factor_from_name(const std::string& s) {
  if (s == "f0") return MarkFactor::Constant;
  if (s == "f1") return MarkFactor::Linear;
  if (s == "f2") return MarkFactor::Quadratic;
  if (s == "none") return MarkFactor::None;
  throw ArgumentError("unknown mark factor '" + s + "'");
}

double num(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw ArgumentError(std::string("kernel entry lacks numeric '") + key + "'");
  return j.at(key).get<double>();
}

}  // namespace

nlohmann::json entry_to_json(const KernelEntry& entry) {
  nlohmann::json j = std::visit(
      overloaded{
          [](const ZeroKernel&) { return nlohmann::json{{"family", "zero"}}; },
          [](const Exponential& k) {
            return nlohmann::json{{"family", "exponential"}, {"alpha", k.alpha}, {"beta", k.beta}};
          },
          [](const PowerLaw& k) {
            return nlohmann::json{
                {"family", "power_law"}, {"alpha", k.alpha}, {"beta", k.beta}, {"gamma", k.gamma}};
          },
          [](const DelayedExponential& k) {
            return nlohmann::json{{"family", "delayed_exponential"},
                                  {"alpha", k.alpha},
                                  {"beta", k.beta},
                                  {"delay", k.delay}};
          },
          [](const InhibitionTwoPhase& k) {
            return nlohmann::json{{"family", "inhibition_two_phase"},
                                  {"alpha_lo", k.alpha_lo},
                                  {"beta_lo", k.beta_lo},
                                  {"alpha_hi", k.alpha_hi},
                                  {"beta_hi", k.beta_hi},
                                  {"delay", k.delay}};
          },
          [](const BimodalGaussian& k) {
            return nlohmann::json{{"family", "bimodal_gaussian"}, {"alpha", k.alpha},
                                  {"mu_lo", k.mu_lo},           {"sigma_lo", k.sigma_lo},
                                  {"mu_hi", k.mu_hi},           {"sigma_hi", k.sigma_hi}};
          },
          [](const NonMultiplicativeBimodal& k) {
            return nlohmann::json{{"family", "non_multiplicative_bimodal"},
                                  {"alpha", k.alpha},
                                  {"mu_lo", k.mu_lo},
                                  {"sigma_lo", k.sigma_lo},
                                  {"mu_hi", k.mu_hi},
                                  {"sigma_hi", k.sigma_hi}};
          },
          [](const Tabulated& k) {
            nlohmann::json out{{"family", "tabulated"}, {"grid", k.grid}, {"values", k.values}};
            if (!k.maxima.empty()) out["max"] = k.maxima;
            return out;
          },
      },
      entry.family);
  j["mark_factor"] = factor_name(entry.factor);
  return j;
}

KernelEntry entry_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("family")) throw ArgumentError("kernel entry must carry 'family'");
  const auto family = j.at("family").get<std::string>();
  KernelEntry e;
  if (family == "zero") {
    e.family = ZeroKernel{};
  } else if (family == "exponential") {
    e.family = Exponential{num(j, "alpha"), num(j, "beta")};
  } else if (family == "power_law") {
    e.family = PowerLaw{num(j, "alpha"), num(j, "beta"), num(j, "gamma")};
  } else if (family == "delayed_exponential") {
    e.family = DelayedExponential{num(j, "alpha"), num(j, "beta"), num(j, "delay")};
  } else if (family == "inhibition_two_phase") {
    e.family = InhibitionTwoPhase{num(j, "alpha_lo"), num(j, "beta_lo"), num(j, "alpha_hi"),
                                  num(j, "beta_hi"), num(j, "delay")};
  } else if (family == "bimodal_gaussian") {
    e.family = BimodalGaussian{num(j, "alpha"), num(j, "mu_lo"), num(j, "sigma_lo"), num(j, "mu_hi"),
                               num(j, "sigma_hi")};
  } else if (family == "non_multiplicative_bimodal") {
    e.family = NonMultiplicativeBimodal{num(j, "alpha"), num(j, "mu_lo"), num(j, "sigma_lo"),
                                        num(j, "mu_hi"), num(j, "sigma_hi")};
  } else if (family == "tabulated") {
    Tabulated t;
    t.grid = j.at("grid").get<std::vector<double>>();
    t.values = j.at("values").get<std::vector<std::vector<double>>>();
    if (j.contains("max")) t.maxima = j.at("max").get<std::vector<double>>();
    e.family = std::move(t);
  } else {
    throw ArgumentError("unknown kernel family '" + family + "'");
  }
  const bool coupled = std::holds_alternative<NonMultiplicativeBimodal>(e.family) ||
                       std::holds_alternative<Tabulated>(e.family);
  e.factor = j.contains("mark_factor") ? factor_from_name(j.at("mark_factor").get<std::string>())
                                       : (coupled ? MarkFactor::None : MarkFactor::Constant);
  return e;
}

nlohmann::json to_json(const KernelSpec& spec) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < spec.dimension(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < spec.dimension(); ++j) row.push_back(entry_to_json(spec.entry(i, j)));
    rows.push_back(std::move(row));
  }
  return {{"format", "nhawkes-kernel-spec-v1"},
          {"dimension", spec.dimension()},
          {"marks", spec.marks()},
          {"baseline", spec.baseline()},
          {"mark_pmf", spec.mark_pmfs()},
          {"kernels", std::move(rows)}};
}

KernelSpec kernel_spec_from_json(const nlohmann::json& j) {
  try {
    const auto dim = j.at("dimension").get<std::size_t>();
    const int marks = j.value("marks", 1);
    auto baseline = j.at("baseline").get<std::vector<double>>();
    const auto& rows = j.at("kernels");
    if (!rows.is_array() || rows.size() != dim) throw ArgumentError("'kernels' must have D rows");
    std::vector<KernelEntry> entries;
    for (const auto& row : rows) {
      if (!row.is_array() || row.size() != dim) throw ArgumentError("each kernel row must have D entries");
      for (const auto& cell : row) entries.push_back(entry_from_json(cell));
    }
    if (j.contains("mark_pmf"))
      return KernelSpec(dim, marks, std::move(baseline),
                        j.at("mark_pmf").get<std::vector<std::vector<double>>>(), std::move(entries));
    return KernelSpec(dim, marks, std::move(baseline), std::move(entries));
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed kernel spec JSON: ") + e.what());
  }
}

}  // namespace nhawkes
