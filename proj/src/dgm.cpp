#include "nhawkes/dgm.hpp"

#include "nhawkes/error.hpp"
#include "nhawkes/rng.hpp"

#include <array>
#include <cmath>

namespace nhawkes {

namespace {

using Mat = Eigen::MatrixXd;
using CMap = Eigen::Map<const Eigen::MatrixXd>;
using MMap = Eigen::Map<Eigen::MatrixXd>;
using CVec = Eigen::Map<const Eigen::VectorXd>;
using MVec = Eigen::Map<Eigen::VectorXd>;

constexpr int kGates = 4;  // z, g, r, h

struct Gate {
  std::size_t U, W, b;
};

struct Layout {
  std::size_t W1, b1;
  std::vector<std::array<Gate, kGates>> cells;
  std::size_t Wout, bout, total;

  explicit Layout(const DgmShape& s) {
    const auto W = static_cast<std::size_t>(s.width);
    std::size_t at = 0;
    W1 = at, at += W * 2;
    b1 = at, at += W;
    cells.resize(static_cast<std::size_t>(s.cells));
    for (auto& cell : cells)
      for (auto& g : cell) {
        g.U = at, at += W * 2;
        g.W = at, at += W * W;
        g.b = at, at += W;
      }
    Wout = at, at += static_cast<std::size_t>(s.outputs) * W;
    bout = at, at += static_cast<std::size_t>(s.outputs);
    total = at;
  }
};

Eigen::ArrayXXd relu(const Mat& a) { return a.array().max(0.0); }
Eigen::ArrayXXd step(const Mat& a) { return (a.array() > 0.0).cast<double>(); }

struct CellCache {
  Mat S, Z, G, R, H, SR;
  Mat pz, pg, pr, ph;
};

struct Forward {
  Mat p1;
  std::vector<CellCache> cells;
  Mat S;
  Mat out;
};

Forward run_forward(const DgmParams& p, const Mat& x) {
  const Layout L(p.shape);
  const auto W = p.shape.width;
  const double* th = p.theta.data();
  Forward f;
  f.p1 = (CMap(th + L.W1, W, 2) * x).colwise() + CVec(th + L.b1, W);
  f.S = relu(f.p1).matrix();
  f.cells.resize(L.cells.size());
  for (std::size_t l = 0; l < L.cells.size(); ++l) {
    auto& c = f.cells[l];
    const auto& gz = L.cells[l][0];
    const auto& gg = L.cells[l][1];
    const auto& gr = L.cells[l][2];
    const auto& gh = L.cells[l][3];
    c.S = f.S;
    const auto pre = [&](const Gate& g, const Mat& s) -> Mat {
      return ((CMap(th + g.U, W, 2) * x + CMap(th + g.W, W, W) * s).colwise() + CVec(th + g.b, W));
    };
    c.pz = pre(gz, c.S);
    c.pg = pre(gg, c.S);
    c.pr = pre(gr, c.S);
    c.Z = relu(c.pz).matrix();
    c.G = relu(c.pg).matrix();
    c.R = relu(c.pr).matrix();
    c.SR = (c.S.array() * c.R.array()).matrix();
    c.ph = pre(gh, c.SR);
    c.H = relu(c.ph).matrix();
    f.S = ((1.0 - c.G.array()) * c.H.array() + c.Z.array() * c.S.array()).matrix();
  }
  f.out = (CMap(th + L.Wout, p.shape.outputs, W) * f.S).colwise() + CVec(th + L.bout, p.shape.outputs);
  return f;
}

}  // namespace

std::size_t DgmShape::param_count() const { return Layout(*this).total; }

InputScaler InputScaler::for_marks(int marks, double t_floor) {
  if (!(t_floor > 0.0)) throw ArgumentError("time floor must be > 0");
  InputScaler s;
  s.t_floor = t_floor;
  s.mark_mean = 0.5 * (marks + 1.0);
  s.mark_std = marks > 1 ? std::sqrt((static_cast<double>(marks) * marks - 1.0) / 12.0) : 1.0;
  return s;
}

double InputScaler::time(double t) const { return std::log10(std::max(t, t_floor)); }

DgmParams dgm_init(const DgmShape& shape, std::uint64_t seed) {
  if (shape.width < 1 || shape.cells < 0 || shape.outputs < 1) throw ArgumentError("invalid network shape");
  const Layout L(shape);
  DgmParams p{shape, std::vector<double>(L.total, 0.0)};
  Rng rng(seed);
  const auto fill = [&](std::size_t at, std::size_t rows, std::size_t cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (std::size_t k = 0; k < rows * cols; ++k) p.theta[at + k] = rng.uniform(-bound, bound);
  };
  const auto W = static_cast<std::size_t>(shape.width);
  fill(L.W1, W, 2);
  for (const auto& cell : L.cells)
    for (const auto& g : cell) {
      fill(g.U, W, 2);
      fill(g.W, W, W);
    }
  fill(L.Wout, static_cast<std::size_t>(shape.outputs), W);
  return p;
}

Eigen::MatrixXd scale_inputs(const InputScaler& scaler, const std::vector<double>& t, const std::vector<int>& m) {
  Mat x(2, static_cast<Eigen::Index>(t.size()));
  for (std::size_t n = 0; n < t.size(); ++n) {
    x(0, static_cast<Eigen::Index>(n)) = scaler.time(t[n]);
    x(1, static_cast<Eigen::Index>(n)) = scaler.mark(m[n]);
  }
  return x;
}

Eigen::MatrixXd dgm_forward(const DgmParams& params, const Eigen::MatrixXd& x) {
  return run_forward(params, x).out;
}

void dgm_gradient(const DgmParams& p, const Eigen::MatrixXd& x, const Eigen::MatrixXd& coeff,
                  std::vector<double>& grad) {
  const Layout L(p.shape);
  if (grad.size() != L.total) grad.assign(L.total, 0.0);
  const auto W = p.shape.width;
  const auto D = p.shape.outputs;
  const double* th = p.theta.data();
  double* gr = grad.data();
  const Forward f = run_forward(p, x);

  MMap(gr + L.Wout, D, W) += coeff * f.S.transpose();
  MVec(gr + L.bout, D) += coeff.rowwise().sum();
  Mat dS = CMap(th + L.Wout, D, W).transpose() * coeff;

  for (std::size_t l = L.cells.size(); l-- > 0;) {
    const auto& c = f.cells[l];
    const auto& gates = L.cells[l];
    const Mat dG = (dS.array() * -c.H.array()).matrix();
    const Mat dH = (dS.array() * (1.0 - c.G.array())).matrix();
    const Mat dZ = (dS.array() * c.S.array()).matrix();
    Mat dSprev = (dS.array() * c.Z.array()).matrix();

    const auto accumulate = [&](const Gate& g, const Mat& dpre, const Mat& s) {
      MMap(gr + g.U, W, 2) += dpre * x.transpose();
      MMap(gr + g.W, W, W) += dpre * s.transpose();
      MVec(gr + g.b, W) += dpre.rowwise().sum();
    };
    const Mat dph = (dH.array() * step(c.ph)).matrix();
    accumulate(gates[3], dph, c.SR);
    const Mat dSR = CMap(th + gates[3].W, W, W).transpose() * dph;
    dSprev.array() += dSR.array() * c.R.array();
    const Mat dR = (dSR.array() * c.S.array()).matrix();

    const Mat dpz = (dZ.array() * step(c.pz)).matrix();
    const Mat dpg = (dG.array() * step(c.pg)).matrix();
    const Mat dpr = (dR.array() * step(c.pr)).matrix();
    accumulate(gates[0], dpz, c.S);
    accumulate(gates[1], dpg, c.S);
    accumulate(gates[2], dpr, c.S);
    dSprev.noalias() += CMap(th + gates[0].W, W, W).transpose() * dpz;
    dSprev.noalias() += CMap(th + gates[1].W, W, W).transpose() * dpg;
    dSprev.noalias() += CMap(th + gates[2].W, W, W).transpose() * dpr;
    dS = std::move(dSprev);
  }
  const Mat dp1 = (dS.array() * step(f.p1)).matrix();
  MMap(gr + L.W1, W, 2) += dp1 * x.transpose();
  MVec(gr + L.b1, W) += dp1.rowwise().sum();
}

std::vector<double> forward(const DgmParams& params, const InputScaler& scaler, double t, int m) {
  if (!(t > 0.0)) throw ArgumentError("network time input must be > 0");
  const Mat out = dgm_forward(params, scale_inputs(scaler, {t}, {m}));
  return {out.data(), out.data() + out.size()};
}

std::vector<double> gradient(const DgmParams& params, const InputScaler& scaler,
                             const std::vector<WeightedPoint>& points) {
  std::vector<double> ts, grad(params.theta.size(), 0.0);
  std::vector<int> ms;
  Mat coeff(params.shape.outputs, static_cast<Eigen::Index>(points.size()));
  for (std::size_t n = 0; n < points.size(); ++n) {
    if (!(points[n].t > 0.0)) throw ArgumentError("network time input must be > 0");
    if (points[n].coeff.size() != static_cast<std::size_t>(params.shape.outputs))
      throw ArgumentError("coefficient length must equal the output count");
    ts.push_back(points[n].t);
    ms.push_back(points[n].m);
    for (int d = 0; d < params.shape.outputs; ++d)
      coeff(d, static_cast<Eigen::Index>(n)) = points[n].coeff[static_cast<std::size_t>(d)];
  }
  if (!points.empty()) dgm_gradient(params, scale_inputs(scaler, ts, ms), coeff, grad);
  return grad;
}

nlohmann::json to_json(const DgmParams& p) {
  return {{"format", "nhawkes-dgm-v1"},
          {"width", p.shape.width},
          {"cells", p.shape.cells},
          {"outputs", p.shape.outputs},
          {"theta", p.theta}};
}

DgmParams dgm_params_from_json(const nlohmann::json& j) {
  try {
    DgmParams p;
    p.shape = {j.at("width").get<int>(), j.at("cells").get<int>(), j.at("outputs").get<int>()};
    p.theta = j.at("theta").get<std::vector<double>>();
    if (p.theta.size() != p.shape.param_count()) throw ArgumentError("parameter count does not match the shape");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed network JSON: ") + e.what());
  }
}

nlohmann::json to_json(const InputScaler& s) {
  return {{"t_floor", s.t_floor}, {"mark_mean", s.mark_mean}, {"mark_std", s.mark_std}};
}

InputScaler input_scaler_from_json(const nlohmann::json& j) {
  try {
    InputScaler s{j.at("t_floor").get<double>(), j.at("mark_mean").get<double>(), j.at("mark_std").get<double>()};
    if (!(s.t_floor > 0.0) || !(s.mark_std > 0.0)) throw ArgumentError("invalid input scaler");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed scaler JSON: ") + e.what());
  }
}

}  // namespace nhawkes
