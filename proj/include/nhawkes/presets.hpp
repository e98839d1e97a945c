#pragma once

#include "nhawkes/kernel.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace nhawkes {

/// Statistics grid and truncation horizon that go with a preset.
struct PresetGrid {
  double h = 0.1;
  int n_lin = 10;
  int n_log = 50;
  double T = 2.0;
};

struct Preset {
  std::string name;
  std::string description;
  KernelSpec spec;
  PresetGrid grid;
};

/// Built-in benchmark configurations:
///   exp1d           1-dim exponential, alpha 1, beta 2, mu 0.5
///   benchmark       2-dim exponential with kernels of very different sizes
///   exponential     2-dim exponential used for the convergence study
///   inhibition      2-dim two-phase kernels, 5 marks, quadratic mark factor
///   non-multiplicative  2-dim bimodal Gaussian with mark-dependent second mode, 10 marks
Preset preset(std::string_view name);
std::vector<std::string> preset_names();

}  // namespace nhawkes
