#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace nhawkes {

struct DgmShape {
  int width = 64;
  int cells = 1;
  int outputs = 1;

  std::size_t param_count() const;
  friend bool operator==(const DgmShape&, const DgmShape&) = default;
};

/// All weights in one flat vector. Layout: W1 (W x 2), b1, then per cell
/// the gates z, g, r, h each as U (W x 2), W (W x W), b (W), then
/// W_out (D x W) and b_out (D). Matrices are column-major.
struct DgmParams {
  DgmShape shape;
  std::vector<double> theta;
};

/// log10 time with a floor, z-scored mark.
struct InputScaler {
  double t_floor = 1e-4;
  double mark_mean = 0.0;
  double mark_std = 1.0;

  /// z-scores of the uniform grid 1..M (std 1 when M = 1).
  static InputScaler for_marks(int marks, double t_floor);

  double time(double t) const;
  double mark(int m) const { return (m - mark_mean) / mark_std; }
};

/// Glorot uniform on +-sqrt(6 / (fan_in + fan_out)), zero biases.
DgmParams dgm_init(const DgmShape& shape, std::uint64_t seed);

/// Scaled inputs for a list of (t, m), as the 2 x N matrix the network takes.
Eigen::MatrixXd scale_inputs(const InputScaler& scaler, const std::vector<double>& t, const std::vector<int>& m);

/// Network outputs (D x N) on scaled inputs.
Eigen::MatrixXd dgm_forward(const DgmParams& params, const Eigen::MatrixXd& x);

/// Adds to `grad` the gradient of sum_n coeff(:, n) . output(:, n) with
/// respect to theta. ReLU has derivative 0 at 0.
void dgm_gradient(const DgmParams& params, const Eigen::MatrixXd& x, const Eigen::MatrixXd& coeff,
                  std::vector<double>& grad);

/// One point. Throws ArgumentError for t <= 0.
std::vector<double> forward(const DgmParams& params, const InputScaler& scaler, double t, int m);

struct WeightedPoint {
  double t;
  int m;
  std::vector<double> coeff;
};

std::vector<double> gradient(const DgmParams& params, const InputScaler& scaler,
                             const std::vector<WeightedPoint>& points);

nlohmann::json to_json(const DgmParams& params);
DgmParams dgm_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const InputScaler& scaler);
InputScaler input_scaler_from_json(const nlohmann::json& j);

}  // namespace nhawkes
