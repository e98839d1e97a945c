#include <doctest.h>

#include "nhawkes/first_order.hpp"
#include "nhawkes/simulator.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace nhawkes;

namespace {

KernelSpec exp1d(double alpha, double beta, double mu) {
  return KernelSpec(1, 1, {mu}, {{Exponential{alpha, beta}, MarkFactor::Constant}});
}

KernelSpec benchmark_spec() {
  return KernelSpec(2, 1, {0.05, 0.05},
                    {{Exponential{10.0, 20.0}, MarkFactor::Constant},
                     {Exponential{0.2, 5.0}, MarkFactor::Constant},
                     {Exponential{0.5, 2.5}, MarkFactor::Constant},
                     {Exponential{30.0, 40.0}, MarkFactor::Constant}});
}

// Asymptotic standard errors of N_T / T for a stationary linear Hawkes
// process: diag((I - N)^{-1} diag(Lambda) (I - N)^{-T}) / T.
std::vector<double> rate_standard_errors(const NormMatrix& n, const std::vector<double>& lambda, double T) {
  const auto D = static_cast<Eigen::Index>(n.dim);
  Eigen::MatrixXd I_N = Eigen::MatrixXd::Identity(D, D);
  for (Eigen::Index i = 0; i < D; ++i)
    for (Eigen::Index j = 0; j < D; ++j) I_N(i, j) -= n(i, j);
  const Eigen::MatrixXd inv = I_N.inverse();
  Eigen::VectorXd l(D);
  for (Eigen::Index i = 0; i < D; ++i) l(i) = lambda[i];
  const Eigen::MatrixXd cov = inv * l.asDiagonal() * inv.transpose();
  std::vector<double> se(n.dim);
  for (std::size_t i = 0; i < n.dim; ++i) se[i] = std::sqrt(cov(i, i) / T);
  return se;
}

}  // namespace

TEST_SUITE("simulator") {
  TEST_CASE("intensity examples") {
    const auto spec = exp1d(1.0, 2.0, 0.5);
    const EventStream empty(1, 1, 10.0, {});
    CHECK(intensity_at(spec, empty, 3.0)[0] == 0.5);
    const EventStream one(1, 1, 10.0, {{0.0, 0, 1}});
    CHECK(intensity_at(spec, one, 1.0)[0] == doctest::Approx(0.5 + std::exp(-2.0)).epsilon(1e-14));
    const KernelSpec inhib(1, 1, {0.1}, {{Exponential{-2.0, 1.0}, MarkFactor::Constant}});
    CHECK(intensity_at(inhib, one, 0.5)[0] == 0.0);
    CHECK_THROWS_AS(intensity_at(spec, EventStream(1, 1, 10.0, {{2.0, 0, 1}}), 1.0), ArgumentError);
  }

  TEST_CASE("zero kernel gives a Poisson count") {
    const KernelSpec spec(1, 1, {2.0}, std::vector<KernelEntry>(1));
    const auto stream = simulate({spec, 1e4, 11});
    CHECK(std::abs(static_cast<double>(stream.size()) - 2e4) < 4.0 * std::sqrt(2e4));
  }

  TEST_CASE("1-dim exponential rate matches the first-order identity") {
    const auto spec = exp1d(1.0, 2.0, 0.5);
    const double T = 2e4;
    const auto stream = simulate({spec, T, 5});
    const double se = std::sqrt(1.0 / T) / 0.5;
    CHECK(std::abs(static_cast<double>(stream.size()) / T - 1.0) < 4.0 * se);
  }

  TEST_CASE("2-dim benchmark rates") {
    const auto spec = benchmark_spec();
    const auto norms = kernel_l1_norm_exact(spec, INFINITY);
    const auto lambda = rates_from_baseline(norms, spec.baseline());
    const double T = 1e4 / std::min(lambda[0], lambda[1]);
    const auto stream = simulate({spec, T, 17});
    const auto se = rate_standard_errors(norms, lambda, T);
    const auto counts = stream.counts();
    for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(counts[i] / T - lambda[i]) < 4.0 * se[i]);
  }

  TEST_CASE("same seed, same stream") {
    const auto spec = benchmark_spec();
    std::ostringstream a, b;
    write_events_csv(a, simulate({spec, 500.0, 3}));
    write_events_csv(b, simulate({spec, 500.0, 3}));
    CHECK(a.str() == b.str());
    std::ostringstream c;
    write_events_csv(c, simulate({spec, 500.0, 4}));
    CHECK(a.str() != c.str());
  }

  TEST_CASE("second arrival time follows the analytic survival function") {
    // After the first event at s, the waiting time u has survival
    // exp(-(mu u + alpha/beta (1 - e^{-beta u}))).
    const double alpha = 1.0, beta = 2.0, mu = 0.5;
    const auto spec = exp1d(alpha, beta, mu);
    std::vector<double> waits;
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
      SimConfig cfg{spec, 1e6, seed};
      cfg.stop_after_events = 2;
      const auto s = simulate(cfg);
      waits.push_back(s.events()[1].time - s.events()[0].time);
    }
    std::sort(waits.begin(), waits.end());
    const double n = static_cast<double>(waits.size());
    double ks = 0.0;
    for (std::size_t k = 0; k < waits.size(); ++k) {
      const double u = waits[k];
      const double cdf = 1.0 - std::exp(-(mu * u + alpha / beta * (1.0 - std::exp(-beta * u))));
      ks = std::max({ks, std::abs(cdf - k / n), std::abs(cdf - (k + 1) / n)});
    }
    CHECK(ks < 1.628 / std::sqrt(n));
  }

  TEST_CASE("marks follow the pmf") {
    const std::vector<double> pmf = {0.1, 0.2, 0.3, 0.4};
    const KernelSpec spec(1, 4, {1.0}, {pmf}, {{Exponential{0.5, 1.0}, MarkFactor::Linear}});
    const auto stream = simulate({spec, 8000.0, 21});
    std::vector<double> counts(4, 0.0);
    for (const auto& e : stream.events()) counts[e.mark - 1] += 1.0;
    const double n = static_cast<double>(stream.size());
    CHECK(n >= 1e4);
    double chi2 = 0.0;
    for (int m = 0; m < 4; ++m) chi2 += std::pow(counts[m] - n * pmf[m], 2) / (n * pmf[m]);
    CHECK(chi2 < 11.345);
  }

  TEST_CASE("non-exponential families agree with the first-order identity") {
    const KernelSpec spec(2, 3, {0.4, 0.3},
                          {{DelayedExponential{1.0, 4.0, 0.2}, MarkFactor::Linear},
                           {PowerLaw{0.05, 2.5, 0.2}, MarkFactor::Constant},
                           {BimodalGaussian{0.3, 0.1, 0.05, 0.5, 0.1}, MarkFactor::Quadratic},
                           {InhibitionTwoPhase{-0.5, 3.0, 1.0, 2.0, 0.3}, MarkFactor::Constant}});
    const auto norms = kernel_l1_norm_exact(spec, INFINITY);
    const auto lambda = rates_from_baseline(norms, spec.baseline());
    const double T = 2e4 / std::min(lambda[0], lambda[1]);
    const auto result = simulate_with_diagnostics({spec, T, 9});
    const auto se = rate_standard_errors(norms, lambda, T);
    const auto counts = result.stream.counts();
    for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(counts[i] / T - lambda[i]) < 4.0 * se[i]);
    CHECK(result.diagnostics.clamped > 0);
    CHECK(result.diagnostics.clamp_fraction() < 0.5);
  }

  TEST_CASE("errors") {
    const auto spec = exp1d(1.0, 2.0, 0.5);
    SimConfig cfg{spec, 1e4, 1};
    cfg.max_events = 100;
    try {
      simulate(cfg);
      FAIL("expected truncation");
    } catch (const TruncationError& e) {
      CHECK(e.partial().size() == 100);
    }
    CHECK_THROWS_AS(simulate({exp1d(3.0, 2.0, 0.5), 10.0, 1}), StationarityError);
    Tabulated tab;
    tab.grid = {0.1, 0.2};
    tab.values = {{0.5, 0.1}};
    const KernelSpec no_max(1, 1, {0.5}, {{tab, MarkFactor::None}});
    CHECK_THROWS_AS(simulate({no_max, 10.0, 1}), ArgumentError);
    tab.maxima = {0.5};
    const KernelSpec with_max(1, 1, {0.5}, {{tab, MarkFactor::None}});
    CHECK(simulate({with_max, 10.0, 1}).size() > 0);
  }
}
