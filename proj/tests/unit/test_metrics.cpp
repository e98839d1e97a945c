#include <doctest.h>

#include "nhawkes/error.hpp"
#include "nhawkes/metrics.hpp"

#include <cmath>

using namespace nhawkes;

namespace {

KernelSpec exp2d() {
  return KernelSpec(2, 1, {0.1, 0.1},
                    {{Exponential{1.0, 2.0}, MarkFactor::Constant},
                     {Exponential{0.25, 1.0}, MarkFactor::Constant},
                     {Exponential{0.5, 1.0}, MarkFactor::Constant},
                     {Exponential{0.75, 1.5}, MarkFactor::Constant}});
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("error report of the truth is zero") {
    const auto spec = exp2d();
    const auto r = error_report(spec_function(spec), spec, 100, 2.0);
    CHECK(r.delta2 == 0.0);
    CHECK(r.delta_inf == 0.0);
    CHECK(r.delta2_norm == 0.0);
    CHECK(r.sup_true == doctest::Approx(1.0));
    CHECK(r.entries.size() == 4);
  }

  TEST_CASE("constant offset") {
    const auto spec = exp2d();
    const auto truth = spec_function(spec);
    const KernelFunction shifted = [&](std::size_t i, std::size_t j, double t, int m) { return truth(i, j, t, m) + 0.3; };
    const auto r = error_report(shifted, spec, 50, 2.0);
    CHECK(r.delta2 == doctest::Approx(0.3));
    CHECK(r.delta_inf == doctest::Approx(0.3));
    CHECK(r.delta2_norm == doctest::Approx(0.3));
    // each subset is normalized by its own sup: 1 on the diagonal, 0.5 off it
    CHECK(r.delta2_subset(true) == doctest::Approx(0.3));
    CHECK(r.delta2_subset(false) == doctest::Approx(0.6));
  }

  TEST_CASE("hand grid with two nodes") {
    const KernelSpec spec(1, 1, {0.1}, {{Exponential{0.5, 1.0}, MarkFactor::Constant}});
    const auto truth = spec_function(spec);
    const KernelFunction est = [&](std::size_t, std::size_t, double t, int) {
      return truth(0, 0, t, 1) + (t == 0.0 ? 1.0 : 3.0);
    };
    const auto r = error_report(est, spec, 1, 1.0);
    CHECK(r.delta2 == doctest::Approx(std::sqrt(5.0)));
    CHECK(r.delta_inf == doctest::Approx(3.0));
    CHECK(r.delta2_norm == doctest::Approx(std::sqrt(5.0) / 0.5));
    CHECK_THROWS_AS(error_report(est, spec, 0, 1.0), ArgumentError);
  }

  TEST_CASE("first node can move off zero") {
    const KernelSpec spec(1, 1, {0.1}, {{Exponential{0.5, 1.0}, MarkFactor::Constant}});
    bool saw_zero = false;
    const KernelFunction est = [&](std::size_t, std::size_t, double t, int) {
      saw_zero = saw_zero || t == 0.0;
      return 0.0;
    };
    error_report(est, spec, 10, 1.0, 0.01);
    CHECK_FALSE(saw_zero);
  }

  TEST_CASE("diagonal and off-diagonal split") {
    const auto spec = exp2d();
    const auto truth = spec_function(spec);
    const KernelFunction est = [&](std::size_t i, std::size_t j, double t, int m) {
      return truth(i, j, t, m) + (i == j ? 0.1 : 0.4);
    };
    const auto r = error_report(est, spec, 20, 2.0);
    CHECK(r.delta2_subset(true) == doctest::Approx(0.1));
    CHECK(r.delta2_subset(false) == doctest::Approx(0.8));
  }

  TEST_CASE("log-log slope and total variation") {
    CHECK(loglog_slope({1e4, 1e5, 1e6}, {1.0, std::pow(10.0, -0.5), 0.1}) == doctest::Approx(-0.5));
    CHECK(loglog_slope({1.0, 2.0}, {3.0, 12.0}) == doctest::Approx(2.0));
    CHECK_THROWS_AS(loglog_slope({1.0}, {1.0}), ArgumentError);
    CHECK_THROWS_AS(loglog_slope({1.0, 1.0}, {1.0, 2.0}), ArgumentError);
    CHECK(total_variation({0.0, 1.0, -1.0, -1.0}) == 3.0);
    CHECK(total_variation({}) == 0.0);
  }

  TEST_CASE("causality hand example") {
    const NormMatrix norms(2, {0.4, 0.1, 0.3, 0.2});
    const auto r = causality_report(norms, {2.0, 1.0}, {3.0, 1.0});
    CHECK(r.spillover(0, 0) == 0.0);
    CHECK(r.spillover(1, 1) == 0.0);
    CHECK(r.spillover(0, 1) == doctest::Approx(0.05));
    CHECK(r.spillover(1, 0) == 0.6);
    CHECK(r.leader[0] == 0.6);
    CHECK(r.leader[1] == doctest::Approx(0.05));
    CHECK(r.receiver[0] == doctest::Approx(0.05));
    CHECK(r.receiver[1] == 0.6);
    CHECK(r.participation == std::vector<double>{0.75, 0.25});
    REQUIRE(r.baseline.has_value());
    // Lambda = mu + N Lambda
    CHECK((*r.baseline)[0] == doctest::Approx(2.0 - 0.4 * 2.0 - 0.1 * 1.0));
    CHECK((*r.baseline)[1] == doctest::Approx(1.0 - 0.3 * 2.0 - 0.2 * 1.0));
  }

  TEST_CASE("one component") {
    const auto r = causality_report(NormMatrix(1, {0.5}), {3.0}, {7.0});
    CHECK(r.spillover(0, 0) == 0.0);
    CHECK(r.leader[0] == 0.0);
    CHECK(r.receiver[0] == 0.0);
    CHECK(r.participation[0] == 1.0);
  }

  TEST_CASE("symmetry and rate scaling") {
    const NormMatrix sym(3, {0.2, 0.1, 0.05, 0.1, 0.2, 0.1, 0.05, 0.1, 0.2});
    const auto r = causality_report(sym, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0});
    CHECK(r.spillover(0, 2) == r.spillover(2, 0));
    CHECK(r.leader[0] == r.leader[2]);
    CHECK(r.receiver[0] == r.receiver[2]);

    const NormMatrix norms(3, {0.2, 0.1, 0.05, 0.3, 0.1, 0.1, 0.05, 0.2, 0.25});
    const std::vector<double> rates{1.5, 0.5, 2.0};
    const auto a = causality_report(norms, rates, {1.0, 2.0, 3.0});
    const auto b = causality_report(norms, {4.0 * 1.5, 4.0 * 0.5, 4.0 * 2.0}, {1.0, 2.0, 3.0});
    CHECK(a.spillover.values == b.spillover.values);
    CHECK(a.leader == b.leader);
    CHECK(a.receiver == b.receiver);
    double total = 0.0;
    for (double v : a.participation) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
  }

  TEST_CASE("causality argument checks") {
    const NormMatrix norms(2, {0.4, 0.1, 0.3, 0.2});
    CHECK_THROWS_AS(causality_report(norms, {2.0, 0.0}, {1.0, 1.0}), ArgumentError);
    CHECK_THROWS_AS(causality_report(norms, {2.0, 1.0}, {-1.0, 1.0}), ArgumentError);
    CHECK_THROWS_AS(causality_report(norms, {2.0}, {1.0, 1.0}), ArgumentError);
    const auto unstable = causality_report(NormMatrix(2, {0.9, 0.5, 0.5, 0.9}), {1.0, 1.0}, {1.0, 1.0});
    CHECK_FALSE(unstable.baseline.has_value());
  }

  TEST_CASE("convergence study argument checks and duplicates") {
    ConvergenceConfig c;
    c.events = {1000, 1000};
    c.seeds = {1};
    CHECK_THROWS_AS(convergence_study(exp2d(), c), ArgumentError);
    c.events = {3000, 3000, 3000};
    c.train.width = 4;
    c.train.epochs = 2;
    c.train.train_size = 32;
    c.train.quadrature = 30;
    c.K = 20;
    c.jobs = 3;
    const auto r = convergence_study(exp2d(), c);
    CHECK(r.points[0].delta2_norm == r.points[1].delta2_norm);
    CHECK(r.points[1].delta2_norm == r.points[2].delta2_norm);
  }
}
