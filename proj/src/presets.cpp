#include "nhawkes/presets.hpp"

#include "nhawkes/error.hpp"

namespace nhawkes {

namespace {

using Matrix = std::vector<std::vector<double>>;

std::vector<KernelEntry> exponential_entries(const Matrix& alpha, const Matrix& beta, MarkFactor f) {
  std::vector<KernelEntry> out;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    for (std::size_t j = 0; j < alpha.size(); ++j) out.push_back({Exponential{alpha[i][j], beta[i][j]}, f});
  return out;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"exp1d", "benchmark", "exponential", "inhibition", "non-multiplicative"};
}

Preset preset(std::string_view name) {
  if (name == "exp1d")
    return {"exp1d", "1-dim exponential kernel",
            KernelSpec(1, 1, {0.5}, exponential_entries({{1.0}}, {{2.0}}, MarkFactor::Constant)), {0.1, 10, 50, 5.0}};
  if (name == "benchmark")
    return {"benchmark", "2-dim exponential kernels of different orders of magnitude",
            KernelSpec(2, 1, {0.05, 0.05},
                       exponential_entries({{10.0, 0.2}, {0.5, 30.0}}, {{20.0, 5.0}, {2.5, 40.0}}, MarkFactor::Constant)),
            {0.1, 10, 50, 2.0}};
  if (name == "exponential")
    return {"exponential", "2-dim exponential kernels",
            KernelSpec(2, 1, {0.1, 0.1},
                       exponential_entries({{1.0, 0.25}, {0.5, 0.75}}, {{2.0, 1.0}, {1.0, 1.5}}, MarkFactor::Constant)),
            {0.1, 10, 50, 5.0}};
  if (name == "inhibition") {
    const Matrix a_lo{{1.0, -0.25}, {-0.2, 1.2}}, b_lo{{3.0, 3.0}, {2.0, 2.0}};
    const Matrix a_hi{{-0.3, 1.5}, {1.0, -0.25}}, b_hi{{2.0, 5.0}, {3.0, 10.0}};
    const Matrix delay{{0.25, 0.5}, {0.15, 0.6}};
    std::vector<KernelEntry> e;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        e.push_back({InhibitionTwoPhase{a_lo[i][j], b_lo[i][j], a_hi[i][j], b_hi[i][j], delay[i][j]},
                     MarkFactor::Quadratic});
    return {"inhibition", "2-dim two-phase kernels with latencies, 5 marks", KernelSpec(2, 5, {3.0, 2.5}, e),
            {0.1, 25, 75, 5.0}};
  }
  if (name == "non-multiplicative") {
    const Matrix alpha{{0.5, 0.1}, {0.1, 0.2}};
    const Matrix mu_lo{{0.05, 0.15}, {0.25, 0.15}}, s_lo{{0.1, 0.05}, {0.2, 0.1}};
    const Matrix mu_hi{{0.5, 0.7}, {0.6, 0.8}}, s_hi{{0.1, 0.2}, {0.075, 0.1}};
    std::vector<KernelEntry> e;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        e.push_back({NonMultiplicativeBimodal{alpha[i][j], mu_lo[i][j], s_lo[i][j], mu_hi[i][j], s_hi[i][j]},
                     MarkFactor::None});
    return {"non-multiplicative", "2-dim bimodal Gaussian kernels with a mark-dependent mode, 10 marks",
            KernelSpec(2, 10, {0.05, 0.05}, e), {1.0, 75, 0, 1.0}};
  }
  throw ArgumentError("unknown preset '" + std::string(name) + "'");
}

}  // namespace nhawkes
