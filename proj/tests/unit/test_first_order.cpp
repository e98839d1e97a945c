#include <doctest.h>

#include "nhawkes/error.hpp"
#include "nhawkes/first_order.hpp"
#include "nhawkes/rng.hpp"

#include <cmath>

using namespace nhawkes;

TEST_SUITE("first_order") {
  TEST_CASE("quadrature basics") {
    const auto q2 = build_quadrature(2, 0.5, 2.0);
    CHECK(q2.nodes == std::vector<double>{0.5, 2.0});
    CHECK(q2.weights[0] == doctest::Approx(0.75));
    CHECK(q2.weights[1] == doctest::Approx(0.75));
    const auto q = build_quadrature(250, 1e-3, 10.0);
    CHECK(q.integrate([](double) { return 1.0; }) == doctest::Approx(10.0 - 1e-3).epsilon(1e-14));
    const double exact = (std::exp(-8e-3) - std::exp(-80.0)) / 8.0;
    CHECK(std::abs(q.integrate([](double s) { return std::exp(-8.0 * s); }) / exact - 1.0) < 1e-4);
    for (std::size_t k = 1; k < q.size(); ++k) CHECK(q.nodes[k] > q.nodes[k - 1]);
    CHECK_THROWS_AS(build_quadrature(1, 0.1, 1.0), ArgumentError);
    CHECK_THROWS_AS(build_quadrature(5, 0.0, 1.0), ArgumentError);
  }

  TEST_CASE("l1 norms") {
    const auto quad = build_quadrature(4000, 1e-5, 10.0);
    const KernelSpec zero(2, 1, {0.1, 0.1}, std::vector<KernelEntry>(4));
    for (double v : kernel_l1_norm(zero, 10.0, quad).values) CHECK(v == 0.0);

    const KernelSpec exp_spec(1, 10, {0.1}, {{Exponential{1.5, 8.0}, MarkFactor::Linear}});
    CHECK(kernel_l1_norm(exp_spec, 10.0, quad)(0, 0) == doctest::Approx(0.1875).epsilon(1e-6));
    CHECK(kernel_l1_norm_exact(exp_spec, 10.0)(0, 0) == doctest::Approx(0.1875).epsilon(1e-14));

    const KernelSpec pl(1, 1, {0.1}, {{PowerLaw{0.01, 1.05, 0.0005}, MarkFactor::Constant}});
    CHECK(kernel_l1_norm_exact(pl, INFINITY)(0, 0) ==
          doctest::Approx(0.01 * std::pow(0.0005, -0.05) / 0.05).epsilon(1e-12));
  }

  TEST_CASE("quadrature refinement changes smooth norms by < 1e-6") {
    const KernelSpec spec(2, 3, {0.1, 0.1},
                          {{Exponential{1.0, 2.0}, MarkFactor::Linear},
                           {PowerLaw{0.012, 1.3, 0.05}, MarkFactor::Constant},
                           {BimodalGaussian{0.3, 0.2, 0.05, 0.6, 0.2}, MarkFactor::Quadratic},
                           {Exponential{0.5, 1.5}, MarkFactor::Constant}});
    const auto coarse = kernel_l1_norm(spec, 5.0, build_quadrature(4000, 1e-5, 5.0));
    const auto fine = kernel_l1_norm(spec, 5.0, build_quadrature(40000, 1e-5, 5.0));
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(coarse.values[k] - fine.values[k]) < 1e-6);
  }

  TEST_CASE("branching ratio") {
    CHECK(branching_ratio(NormMatrix(2, {0.3, 0.0, 0.0, 0.7})) == doctest::Approx(0.7).epsilon(1e-10));
    CHECK(branching_ratio(NormMatrix(1, {0.5})) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(branching_ratio(NormMatrix(2, {0.5, 0.2, 0.2, 0.5})) == doctest::Approx(0.7).epsilon(1e-10));
    CHECK(branching_ratio(NormMatrix(2, {0.5, 1.0, 0.0, 0.5})) == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(branching_ratio(NormMatrix(2, {0.0, 0.0, 0.0, 0.0})) == doctest::Approx(0.0));
    CHECK_THROWS_AS(branching_ratio(NormMatrix(1, {NAN})), NumericalError);
  }

  TEST_CASE("branching ratio is transpose invariant") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t D = 1 + static_cast<std::size_t>(rng.uniform_int(0, 14));
      NormMatrix n(D);
      for (double& v : n.values) v = rng.uniform() < 0.3 ? 0.0 : rng.uniform(-0.2, 0.3);
      CHECK(branching_ratio(n) == doctest::Approx(branching_ratio(n.transposed())).epsilon(1e-8));
    }
  }

  TEST_CASE("baseline from rates") {
    const NormMatrix zero(2);
    CHECK(baseline_from_rates(zero, {2.0, 1.0}) == std::vector<double>{2.0, 1.0});
    CHECK(baseline_from_rates(NormMatrix(1, {0.5}), {1.0})[0] == doctest::Approx(0.5));
    const auto mu = baseline_from_rates(NormMatrix(2, {0.5, 0.2, 0.2, 0.5}), {2.0, 1.0});
    CHECK(mu[0] == doctest::Approx(0.8));
    CHECK(mu[1] == doctest::Approx(0.1));
    CHECK_THROWS_AS(baseline_from_rates(NormMatrix(1, {1.2}), {1.0}), StationarityError);
  }

  TEST_CASE("baseline round trip through the rates") {
    const KernelSpec spec(2, 2, {0.3, 0.1},
                          {{Exponential{1.0, 2.0}, MarkFactor::Linear},
                           {Exponential{0.25, 1.0}, MarkFactor::Constant},
                           {InhibitionTwoPhase{-0.2, 3.0, 0.6, 2.0, 0.2}, MarkFactor::Constant},
                           {Exponential{0.75, 1.5}, MarkFactor::Constant}});
    const auto norms = kernel_l1_norm(spec, 20.0, build_quadrature(2000, 1e-4, 20.0));
    const auto lambda = rates_from_baseline(norms, spec.baseline());
    const auto mu = baseline_from_rates(norms, lambda);
    CHECK(std::abs(mu[0] - 0.3) < 1e-8);
    CHECK(std::abs(mu[1] - 0.1) < 1e-8);
  }

  TEST_CASE("aggregated kernels") {
    const auto quad = build_quadrature(4000, 1e-5, 10.0);
    const KernelSpec lin(1, 10, {0.1}, {{Exponential{1.5, 8.0}, MarkFactor::Linear}});
    CHECK(aggregated_time_kernel(lin, 0, 0, 0.3) == doctest::Approx(1.5 * std::exp(-2.4)).epsilon(1e-12));
    CHECK(aggregated_mark_kernel(lin, 0, 0, 10, 10.0, quad) == doctest::Approx(20.0 / 11.0).epsilon(1e-9));

    const KernelSpec quad_factor(1, 5, {0.1}, {{Exponential{2.0, 3.0}, MarkFactor::Quadratic}});
    CHECK(aggregated_time_kernel(quad_factor, 0, 0, 0.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(aggregated_mark_kernel(quad_factor, 0, 0, 1, 10.0, quad) == doctest::Approx(6.0 / 66.0).epsilon(1e-9));

    const KernelSpec flat(1, 4, {0.1}, {{Exponential{2.0, 3.0}, MarkFactor::Constant}});
    for (int m = 1; m <= 4; ++m) CHECK(aggregated_mark_kernel(flat, 0, 0, m, 10.0, quad) == doctest::Approx(1.0));

    const KernelSpec one(1, 1, {0.1}, {{PowerLaw{0.1, 1.5, 0.1}, MarkFactor::Constant}});
    CHECK(aggregated_time_kernel(one, 0, 0, 0.7) == kernel_eval(one, 0, 0, 0.7, 1));

    const KernelSpec zero(1, 2, {0.1}, std::vector<KernelEntry>(1));
    CHECK_THROWS_AS(aggregated_mark_kernel(zero, 0, 0, 1, 10.0, quad), DegenerateKernelError);
  }

  TEST_CASE("mark kernel normalization holds for every family") {
    const int M = 5;
    const std::vector<std::vector<double>> pmf(1, {0.1, 0.3, 0.2, 0.25, 0.15});
    const auto quad = build_quadrature(4000, 1e-5, 4.0);
    for (const KernelEntry& e : std::vector<KernelEntry>{
             {Exponential{1.0, 2.0}, MarkFactor::Quadratic},
             {DelayedExponential{0.8, 3.0, 0.4}, MarkFactor::Linear},
             {BimodalGaussian{0.5, 0.1, 0.05, 0.6, 0.2}, MarkFactor::Linear},
             {NonMultiplicativeBimodal{0.5, 0.05, 0.1, 0.5, 0.1}, MarkFactor::None}}) {
      const KernelSpec spec(1, M, {0.1}, pmf, {e});
      double total = 0.0;
      for (int m = 1; m <= M; ++m) total += pmf[0][m - 1] * aggregated_mark_kernel(spec, 0, 0, m, 4.0, quad);
      CHECK(std::abs(total - 1.0) < 1e-6);
    }
  }

  TEST_CASE("truncated mass diagnostic") {
    const KernelSpec spec(1, 1, {0.1}, {{Exponential{1.0, 2.0}, MarkFactor::Constant}});
    CHECK(truncated_mass(spec, 1.0)(0, 0) == doctest::Approx(std::exp(-2.0)));
    const KernelSpec heavy(1, 1, {0.1}, {{PowerLaw{0.1, 0.9, 0.1}, MarkFactor::Constant}});
    CHECK(truncated_mass(heavy, 1.0)(0, 0) == 1.0);
  }
}
