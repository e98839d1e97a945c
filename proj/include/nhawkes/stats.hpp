#pragma once

#include "nhawkes/event_stream.hpp"
#include "nhawkes/io_util.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nhawkes {

/// Lin-log lag grid: n_lin + 1 linear points from t_min = h / n_lin to h,
/// then n_log geometric points up to T. Consecutive points bound the bins
/// (lo, hi]; bin values sit at the geometric centers sqrt(lo * hi).
struct StatGrid {
  double h = 0.0;
  int n_lin = 0;
  int n_log = 0;
  double T = 0.0;
  double t_min = 0.0;
  std::vector<double> points;

  std::size_t bins() const { return points.size() - 1; }
  double lo(std::size_t b) const { return points[b]; }
  double hi(std::size_t b) const { return points[b + 1]; }
  double center(std::size_t b) const;
};

/// n_log = 0 with h = T gives the plain linear grid {k T / n_lin}.
StatGrid build_grid(double h, int n_lin, int n_log, double T);

/// Lambda, mark pmfs and the G tensor. G is indexed (i, j, mark, bin) with
/// mark 1-based at the API and stored row-major in that order.
struct SecondOrderStats {
  std::size_t dim = 0;
  int marks = 1;
  std::vector<double> rates;
  std::vector<std::vector<double>> pmf;
  StatGrid grid;
  std::vector<double> values;
  /// Conditioning events per (j, mark), row-major.
  std::vector<std::size_t> n_conditioning;

  std::size_t index(std::size_t i, std::size_t j, int m, std::size_t b) const {
    return ((i * dim + j) * static_cast<std::size_t>(marks) + static_cast<std::size_t>(m - 1)) * grid.bins() + b;
  }
  double g(std::size_t i, std::size_t j, int m, std::size_t b) const { return values[index(i, j, m, b)]; }
  double& g(std::size_t i, std::size_t j, int m, std::size_t b) { return values[index(i, j, m, b)]; }
  std::size_t conditioning(std::size_t j, int m) const {
    return n_conditioning[j * static_cast<std::size_t>(marks) + static_cast<std::size_t>(m - 1)];
  }

  /// (j, mark) cells without conditioning events; their G is zero.
  std::vector<std::pair<std::size_t, int>> flagged() const;

  /// Throws EstimationError if a flagged cell carries pmf mass above
  /// `threshold`.
  void require_complete(double threshold = 0.01) const;

  /// Shape checks.
  void validate() const;
};

/// Lambda^i = count_i / observed length; p^j = empirical mark frequencies.
/// Throws EstimationError for a component without events.
std::pair<std::vector<double>, std::vector<std::vector<double>>> estimate_first_order(const EventStream& stream);

/// Empirical G on the grid: for each conditioning event (type j, mark m) at
/// tau with tau <= segment end - T, count type-i events in
/// (tau + lo, tau + hi], divide by n_{j,m} (hi - lo) and subtract Lambda^i.
/// Counting runs per conditioning type, optionally on `jobs` threads.
SecondOrderStats estimate_second_order(const EventStream& stream, const StatGrid& grid, int jobs = 1);

/// Block-bootstrap standard error of every G value, same layout as
/// SecondOrderStats::values. Conditioning events are grouped into
/// `blocks` consecutive time blocks which are resampled with replacement.
std::vector<double> bootstrap_standard_error(const EventStream& stream, const StatGrid& grid, int blocks,
                                             int resamples, std::uint64_t seed);

/// Linear between bin centers; the first value on (0, c_0); the last value
/// from the last center to T; 0 for t <= 0 and t > T.
double interpolate_g(const SecondOrderStats& stats, std::size_t i, std::size_t j, double t, int m);

/// G^{kj}(t, x) for t > 0, (Lambda^k / Lambda^j) G^{jk}(-t, z) for t < 0,
/// 0 at t = 0.
double h_kernel(const SecondOrderStats& stats, std::size_t k, std::size_t j, double t, int x, int z);

/// CSV `i,j,bin_lo,bin_hi,mark,value` (1-based indices) with a comment
/// header; the JSON sidecar carries Lambda, pmfs, grid parameters and
/// conditioning counts.
void write_stats_csv(std::ostream& out, const SecondOrderStats& stats, const std::optional<Provenance>& prov);
nlohmann::json stats_sidecar(const SecondOrderStats& stats, const std::optional<Provenance>& prov);
SecondOrderStats read_stats(std::istream& csv, const nlohmann::json& sidecar);

/// Writes `path` and `path + ".json"`.
void save_stats(const std::string& path, const SecondOrderStats& stats, const std::optional<Provenance>& prov);
SecondOrderStats load_stats(const std::string& path);

}  // namespace nhawkes
