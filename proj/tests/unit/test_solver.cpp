#include <doctest.h>

#include "nhawkes/error.hpp"
#include "nhawkes/simulator.hpp"
#include "nhawkes/solver.hpp"

#include <algorithm>
#include <cmath>

using namespace nhawkes;

namespace {

// 1-dim exponential kernel e^{-2t}: G(t) = 1.5 e^{-t}, Lambda = 2 mu.
KernelSpec exp1d(double mu = 0.5) { return KernelSpec(1, 1, {mu}, {{Exponential{1.0, 2.0}, MarkFactor::Constant}}); }

SecondOrderStats exact_stats(double T = 5.0, int n_lin = 10, int n_log = 40) {
  SecondOrderStats s;
  s.dim = 1;
  s.marks = 1;
  s.rates = {1.0};
  s.pmf = {{1.0}};
  s.grid = build_grid(0.1, n_lin, n_log, T);
  s.n_conditioning = {1000000};
  for (std::size_t b = 0; b < s.grid.bins(); ++b) s.values.push_back(1.5 * std::exp(-s.grid.center(b)));
  return s;
}

double mean_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().mean(); }

std::vector<SamplePoint> centers(const SecondOrderStats& s) {
  std::vector<SamplePoint> pts;
  for (std::size_t b = 0; b < s.grid.bins(); ++b) pts.push_back({s.grid.center(b), 1});
  return pts;
}

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("training config round trip and validation") {
    TrainConfig c;
    c.optimizer = Optimizer::Adam;
    c.epochs = 7;
    const auto back = train_config_from_json(to_json(c));
    CHECK(back.optimizer == Optimizer::Adam);
    CHECK(back.epochs == 7);
    CHECK(train_config_from_json(nlohmann::json::object()).width == 64);
    CHECK_THROWS_AS(train_config_from_json({{"widht", 3}}), ArgumentError);
    CHECK_THROWS_AS(train_config_from_json({{"batch", 7}}), ArgumentError);
    c.epochs = 50;
    CHECK(c.learning_rate(50) == doctest::Approx(c.lr0 / 100.0));
    CHECK(c.learning_rate(25) == doctest::Approx(c.lr0 / 10.0));
  }

  TEST_CASE("training set sampling") {
    const auto pts = sample_training_set(1000, 0.3, 0.1, 5.0, 4, 11);
    CHECK(pts.size() == 1000);
    CHECK(std::is_sorted(pts.begin(), pts.end(), [](auto a, auto b) { return a.t < b.t; }));
    const auto n_short = std::count_if(pts.begin(), pts.end(), [](auto p) { return p.t < 0.1; });
    CHECK(n_short == 300);
    for (const auto& p : pts) {
      CHECK(p.t > 0.0);
      CHECK(p.t < 5.0);
      CHECK(p.m >= 1);
      CHECK(p.m <= 4);
    }
    const auto all_long = sample_training_set(10, 0.0, 1.0, 2.0, 1, 1);
    for (const auto& p : all_long) CHECK(p.t > 1.0);
    CHECK(sample_training_set(50, 0.3, 0.1, 5.0, 4, 11)[7].t == sample_training_set(50, 0.3, 0.1, 5.0, 4, 11)[7].t);
    CHECK_THROWS_AS(sample_training_set(10, 0.3, 6.0, 5.0, 1, 1), ArgumentError);
  }

  TEST_CASE("temporal weights") {
    Eigen::MatrixXd eps(4, 3);
    eps << 1, 0, 3, 1, 0, -1, 1, 0, 2, 1, 0, 5;
    const auto w = temporal_weights(eps, 2.0);
    for (int j = 0; j < 3; ++j) CHECK(w(0, j) == 1.0);
    for (int n = 0; n < 4; ++n) CHECK(w(n, 0) == doctest::Approx(std::exp(-2.0 * n / 4.0)));
    for (int n = 0; n < 4; ++n) CHECK(w(n, 1) == 1.0);
    CHECK(w(1, 2) == doctest::Approx(std::exp(-2.0 * 9.0 / 39.0)));
    CHECK(w(3, 2) == doctest::Approx(std::exp(-2.0 * 14.0 / 39.0)));
    const auto flat = temporal_weights(eps, 0.0);
    CHECK(flat.minCoeff() == 1.0);
    CHECK(flat.maxCoeff() == 1.0);
  }

  TEST_CASE("magnitude weights") {
    auto s = exact_stats();
    const auto quad = solver_quadrature(s, 100);
    CHECK(magnitude_weights(s, quad) == std::vector<double>{1.0});

    SecondOrderStats two;
    two.dim = 2;
    two.marks = 1;
    two.rates = {1.0, 1.0};
    two.pmf = {{1.0}, {1.0}};
    two.grid = s.grid;
    two.n_conditioning = {1000, 1000};
    const double scale[4] = {1.0, 1.0, 1.0, 0.1};
    for (double c : scale)
      for (std::size_t b = 0; b < s.grid.bins(); ++b) two.values.push_back(c * s.values[b]);
    auto z = magnitude_weights(two, quad);
    CHECK(z[0] == doctest::Approx(1.0 / 13.0));
    CHECK(z[3] == doctest::Approx(10.0 / 13.0));

    std::fill(two.values.begin(), two.values.end(), 2.0);
    z = magnitude_weights(two, quad);
    for (double v : z) CHECK(v == doctest::Approx(0.25));

    // ratios 1 : 1 : 1 : 10 in integral give 10/31 and 1/31
    for (std::size_t b = 0; b < s.grid.bins(); ++b) two.values[3 * s.grid.bins() + b] = 20.0;
    z = magnitude_weights(two, quad);
    CHECK(z[0] == doctest::Approx(10.0 / 31.0));
    CHECK(z[3] == doctest::Approx(1.0 / 31.0));

    std::fill(two.values.begin(), two.values.begin() + static_cast<long>(s.grid.bins()), 0.0);
    CHECK_THROWS_AS(magnitude_weights(two, quad), EstimationError);
  }

  TEST_CASE("residual of the zero kernel is G") {
    const auto s = exact_stats();
    const auto quad = solver_quadrature(s, 100);
    const RowFunction zero = [](const std::vector<SamplePoint>& p) {
      return Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(p.size())).eval();
    };
    const auto pts = centers(s);
    const auto eps = residuals(0, zero, s, quad, pts);
    for (std::size_t b = 0; b < pts.size(); ++b) CHECK(eps(static_cast<Eigen::Index>(b), 0) == doctest::Approx(s.values[b]));
  }

  TEST_CASE("the true kernel solves the exact equation") {
    const auto s = exact_stats(8.0, 20, 80);
    const auto quad = solver_quadrature(s, 400);
    const auto eps = residuals(0, spec_row_function(exp1d(), 0), s, quad, centers(s));
    // interpolation of G between centers is the only error source
    CHECK(eps.cwiseAbs().maxCoeff() < 5e-3);
    CHECK(mean_abs(eps) < 1e-3);
  }

  TEST_CASE("empirical residuals of the true kernel shrink like 1/sqrt(N)") {
    const auto grid = build_grid(0.1, 10, 30, 4.0);
    const auto spec = exp1d();
    SimConfig small{spec, 5e4, 21};
    SimConfig large{spec, 5e5, 22};
    const auto s1 = estimate_second_order(simulate(small), grid);
    const auto s2 = estimate_second_order(simulate(large), grid);
    const auto quad = solver_quadrature(s1, 200);
    const auto row = spec_row_function(spec, 0);
    const double r1 = mean_abs(residuals(0, row, s1, quad, centers(s1)));
    const double r2 = mean_abs(residuals(0, row, s2, quad, centers(s2)));
    const double ratio = r1 / r2;
    MESSAGE("residual ratio " << ratio);
    CHECK(ratio > std::sqrt(10.0) * 0.5);
    CHECK(ratio < std::sqrt(10.0) * 1.5);

    const auto stream = simulate(large);
    const auto se = bootstrap_standard_error(stream, grid, 50, 50, 3);
    const auto eps = residuals(0, row, s2, quad, centers(s2));
    double mean_se = 0.0;
    for (double v : se) mean_se += v / static_cast<double>(se.size());
    CHECK(mean_abs(eps) < 3.0 * mean_se);
  }

  TEST_CASE("zero epochs return the initialization") {
    const auto s = exact_stats();
    TrainConfig c;
    c.epochs = 0;
    c.width = 8;
    const auto m = train_row(0, s, c);
    CHECK(m.loss_history.empty());
    CHECK(m.params.theta == dgm_init({8, 1, 1}, Rng(derive_seed(0, 0)).next()).theta);
    CHECK(m.eval(6.0, 1)[0] == 0.0);
  }

  TEST_CASE("one SGD step follows the gradient of the batch loss") {
    const auto s = exact_stats();
    TrainConfig c;
    c.width = 6;
    c.epochs = 1;
    c.batch = 8;
    c.train_size = 8;
    c.validation_size = 4;
    c.quadrature = 60;
    c.temporal_eps = 0.0;
    c.magnitude_weighting = false;
    c.lr0 = 1e-2;
    c.seed = 5;
    const auto trained = train_row(0, s, c);

    Rng rng(derive_seed(c.seed, 0));
    DgmParams p = dgm_init({c.width, c.cells, 1}, rng.next());
    const auto pts = sample_training_set(c.train_size, c.short_fraction, s.grid.h, s.grid.T, 1, rng);
    const auto quad = solver_quadrature(s, c.quadrature);
    const auto scaler = InputScaler::for_marks(1, s.grid.t_min / 10.0);
    const auto loss = [&](const DgmParams& q) {
      return residuals(0, network_function(q, scaler), s, quad, pts).squaredNorm() / c.batch;
    };
    const double lr = c.learning_rate(1);
    int checked = 0;
    for (std::size_t k = 0; k < p.theta.size(); k += 3) {
      const double step_grad = (p.theta[k] - trained.params.theta[k]) / lr;
      const double keep = p.theta[k];
      p.theta[k] = keep + 1e-6;
      const double up = loss(p);
      p.theta[k] = keep - 1e-6;
      const double down = loss(p);
      p.theta[k] = keep;
      const double fd = (up - down) / 2e-6;
      CHECK(std::abs(step_grad - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
      ++checked;
    }
    CHECK(checked > 10);
  }

  TEST_CASE("training on exact statistics recovers the kernel") {
    const auto s = exact_stats();
    TrainConfig c;
    c.width = 16;
    c.epochs = 60;
    c.train_size = 256;
    c.validation_size = 64;
    c.quadrature = 100;
    c.optimizer = Optimizer::Adam;
    c.lr0 = 1e-2;
    const auto m = train_row(0, s, c);
    REQUIRE(m.loss_history.size() == 60);
    CHECK(m.loss_history.back() < 0.05 * m.loss_history.front());
    const auto quad = solver_quadrature(s, 100);
    const auto norms = fitted_norms({m}, s, quad);
    MESSAGE("fitted norm " << norms(0, 0) << " loss " << m.loss_history.back());
    CHECK(std::abs(norms(0, 0) - 0.5) < 0.05);
    for (double t : {0.3, 1.0, 2.0}) CHECK(std::abs(m.eval(t, 1)[0] - std::exp(-2.0 * t)) < 0.1);

    SUBCASE("tabulation") {
      std::vector<double> nodes;
      for (int k = 0; k <= 400; ++k) nodes.push_back(s.grid.t_min * std::pow(s.grid.T / s.grid.t_min, k / 400.0));
      const auto spec = tabulate({m}, s, nodes);
      for (std::size_t k = 0; k < nodes.size(); k += 37)
        CHECK(kernel_eval(spec, 0, 0, nodes[k], 1) == doctest::Approx(m.eval(nodes[k], 1)[0]).epsilon(1e-12));
      CHECK(kernel_l1_norm_exact(spec, s.grid.T)(0, 0) == doctest::Approx(norms(0, 0)).epsilon(0.01));
      CHECK(spec.baseline()[0] == doctest::Approx(1.0 - norms(0, 0)).epsilon(1e-9));
    }

    SUBCASE("model JSON round trip") {
      const auto back = row_model_from_json(nlohmann::json::parse(to_json(m).dump()));
      CHECK(back.params.theta == m.params.theta);
      CHECK(back.loss_history == m.loss_history);
      CHECK(back.eval(0.7, 1) == m.eval(0.7, 1));
    }

    SUBCASE("goodness of fit") {
      const auto gof = goodness_of_fit({m}, s, 200000, 9, 500);
      MESSAGE("rate error " << gof.rate_mare << " refit " << gof.refit_mean_abs_diff);
      CHECK(gof.rate_mare < 0.05);
      CHECK(gof.branching_ratio == doctest::Approx(norms(0, 0)));
      CHECK(gof.refit_mean_abs_diff < 0.2 * gof.g_mean_abs);
    }
  }

  TEST_CASE("refit statistics are linear in the kernel") {
    const auto s = exact_stats();
    const auto quad = solver_quadrature(s, 100);
    const auto u = spec_row_function(exp1d(), 0);
    const RowFunction u3 = [&](const std::vector<SamplePoint>& p) { return (3.0 * u(p)).eval(); };
    const auto a = refit_stats({u}, s, quad);
    const auto b = refit_stats({u3}, s, quad);
    for (std::size_t k = 0; k < a.values.size(); ++k) CHECK(b.values[k] == doctest::Approx(3.0 * a.values[k]));
    for (std::size_t k = 0; k < a.values.size(); ++k) CHECK(std::abs(a.values[k] - s.values[k]) < 5e-3);
  }

  TEST_CASE("serial and parallel fits agree bit for bit") {
    SecondOrderStats two;
    const auto s = exact_stats();
    two.dim = 2;
    two.marks = 1;
    two.rates = {1.0, 1.0};
    two.pmf = {{1.0}, {1.0}};
    two.grid = s.grid;
    two.n_conditioning = {1000, 1000};
    for (double c : {1.0, 0.3, 0.3, 1.0})
      for (std::size_t b = 0; b < s.grid.bins(); ++b) two.values.push_back(c * s.values[b]);
    TrainConfig c;
    c.width = 8;
    c.epochs = 3;
    c.train_size = 64;
    c.quadrature = 50;
    const auto serial = fit(two, c, 1);
    const auto parallel = fit(two, c, 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(serial[i].params.theta == parallel[i].params.theta);
      CHECK(serial[i].loss_history == parallel[i].loss_history);
    }
    CHECK(serial[0].params.theta != serial[1].params.theta);
  }

  TEST_CASE("divergence is reported with its epoch") {
    const auto s = exact_stats();
    TrainConfig c;
    c.width = 8;
    c.epochs = 5;
    c.train_size = 64;
    c.quadrature = 50;
    c.lr0 = 1e12;
    try {
      train_row(0, s, c);
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.epoch() >= 1);
      CHECK(e.epoch() <= 5);
    }
  }
}
