#include "nhawkes/stats.hpp"

#include "nhawkes/error.hpp"
#include "nhawkes/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

namespace nhawkes {

double StatGrid::center(std::size_t b) const { return std::sqrt(points[b] * points[b + 1]); }

StatGrid build_grid(double h, int n_lin, int n_log, double T) {
  if (n_log == 0 && n_lin >= 1 && h == T && T > 0.0) {
    StatGrid g{h, n_lin, 0, T, T / n_lin, {}};
    for (int k = 1; k <= n_lin; ++k) g.points.push_back(k == n_lin ? T : T * k / n_lin);
    return g;
  }
  if (n_lin < 1 || n_log < 1) throw ArgumentError("grid needs n_lin >= 1 and n_log >= 1");
  if (!(h > 0.0)) throw ArgumentError("grid switch point h must be > 0");
  if (!(h < T)) throw ArgumentError("grid needs h < T");
  StatGrid g{h, n_lin, n_log, T, h / n_lin, {}};
  const double step = (h - g.t_min) / n_lin;
  for (int k = 0; k < n_lin; ++k) {
    const double p = g.t_min + step * k;
    if (g.points.empty() || p > g.points.back()) g.points.push_back(p);
  }
  if (g.points.empty() || h > g.points.back()) g.points.push_back(h);
  for (int k = 1; k <= n_log; ++k) g.points.push_back(k == n_log ? T : h * std::pow(T / h, static_cast<double>(k) / n_log));
  return g;
}

std::vector<std::pair<std::size_t, int>> SecondOrderStats::flagged() const {
  std::vector<std::pair<std::size_t, int>> out;
  for (std::size_t j = 0; j < dim; ++j)
    for (int m = 1; m <= marks; ++m)
      if (conditioning(j, m) == 0) out.emplace_back(j, m);
  return out;
}

void SecondOrderStats::require_complete(double threshold) const {
  for (const auto& [j, m] : flagged())
    if (pmf[j][static_cast<std::size_t>(m - 1)] > threshold)
      throw EstimationError("no conditioning events for component " + std::to_string(j + 1) + ", mark " +
                            std::to_string(m) + " although its probability is " +
                            format_double(pmf[j][static_cast<std::size_t>(m - 1)]));
}

void SecondOrderStats::validate() const {
  if (dim == 0 || marks < 1) throw ArgumentError("stats need D >= 1 and M >= 1");
  if (rates.size() != dim || pmf.size() != dim) throw ArgumentError("stats rate/pmf shape mismatch");
  for (const auto& p : pmf)
    if (p.size() != static_cast<std::size_t>(marks)) throw ArgumentError("stats pmf length mismatch");
  if (grid.points.size() < 2) throw ArgumentError("stats grid needs at least one bin");
  if (values.size() != dim * dim * static_cast<std::size_t>(marks) * grid.bins())
    throw ArgumentError("stats value tensor has the wrong size");
  if (n_conditioning.size() != dim * static_cast<std::size_t>(marks))
    throw ArgumentError("stats conditioning counts have the wrong size");
  for (double v : values)
    if (!std::isfinite(v)) throw NumericalError("stats contain non-finite G values");
}

std::pair<std::vector<double>, std::vector<std::vector<double>>> estimate_first_order(const EventStream& stream) {
  const std::size_t D = stream.dimension();
  const auto M = static_cast<std::size_t>(stream.marks());
  std::vector<std::vector<double>> pmf(D, std::vector<double>(M, 0.0));
  std::vector<double> counts(D, 0.0);
  for (const auto& e : stream.events()) {
    counts[e.component] += 1.0;
    pmf[e.component][static_cast<std::size_t>(e.mark - 1)] += 1.0;
  }
  const double length = stream.observed_length();
  std::vector<double> rates(D);
  for (std::size_t i = 0; i < D; ++i) {
    if (counts[i] == 0.0) throw EstimationError("component " + std::to_string(i + 1) + " has no events");
    rates[i] = counts[i] / length;
    for (double& p : pmf[i]) p /= counts[i];
  }
  return {rates, pmf};
}

namespace {

// Pair counts accumulated per time block of the conditioning event.
struct BlockCounts {
  std::size_t blocks = 1;
  std::size_t D = 0, M = 0, B = 0;
  std::vector<double> cond;   // (block, j, m)
  std::vector<double> pairs;  // (block, i, j, m, b)
  std::vector<double> events; // (block, i)
  std::vector<double> length; // (block)

  std::size_t pair_index(std::size_t k, std::size_t i, std::size_t j, std::size_t m, std::size_t b) const {
    return (((k * D + i) * D + j) * M + m) * B + b;
  }
};

BlockCounts count_pairs(const EventStream& stream, const StatGrid& grid, std::size_t blocks, int jobs) {
  BlockCounts c;
  c.blocks = blocks;
  c.D = stream.dimension();
  c.M = static_cast<std::size_t>(stream.marks());
  c.B = grid.bins();
  c.cond.assign(blocks * c.D * c.M, 0.0);
  c.pairs.assign(blocks * c.D * c.D * c.M * c.B, 0.0);
  c.events.assign(blocks * c.D, 0.0);
  c.length.assign(blocks, 0.0);

  const double horizon = stream.horizon();
  const auto block_of = [&](double t) {
    const auto k = static_cast<std::size_t>(t / horizon * static_cast<double>(blocks));
    return std::min(k, blocks - 1);
  };
  for (const auto& seg : stream.segments()) {
    for (std::size_t k = 0; k < blocks; ++k) {
      const double lo = horizon * static_cast<double>(k) / static_cast<double>(blocks);
      const double hi = horizon * static_cast<double>(k + 1) / static_cast<double>(blocks);
      c.length[k] += std::max(0.0, std::min(hi, seg.end) - std::max(lo, seg.start));
    }
  }
  for (const auto& e : stream.events()) c.events[block_of(e.time) * c.D + e.component] += 1.0;

  std::vector<std::vector<double>> times(c.D);
  for (std::size_t i = 0; i < c.D; ++i) times[i] = stream.times_of(i);
  const auto segments = stream.segments();
  const auto& pts = grid.points;
  const double first = pts.front();
  const double T = grid.T;

  const auto run = [&](std::size_t j) {
    std::vector<std::size_t> start(c.D, 0);
    std::size_t seg = 0;
    for (const auto& e : stream.events()) {
      if (e.component != j) continue;
      const double tau = e.time;
      while (seg + 1 < segments.size() && tau >= segments[seg].end) ++seg;
      if (tau + T >= segments[seg].end) continue;
      const std::size_t k = block_of(tau);
      const auto m = static_cast<std::size_t>(e.mark - 1);
      c.cond[(k * c.D + j) * c.M + m] += 1.0;
      for (std::size_t i = 0; i < c.D; ++i) {
        const auto& ti = times[i];
        std::size_t& s = start[i];
        while (s < ti.size() && ti[s] - tau <= first) ++s;
        std::size_t b = 0;
        for (std::size_t q = s; q < ti.size(); ++q) {
          const double lag = ti[q] - tau;
          if (lag > T) break;
          while (lag > pts[b + 1]) ++b;
          c.pairs[c.pair_index(k, i, j, m, b)] += 1.0;
        }
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), c.D);
  if (workers <= 1) {
    for (std::size_t j = 0; j < c.D; ++j) run(j);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t j = w; j < c.D; j += workers) run(j);
      });
    for (auto& t : pool) t.join();
  }
  return c;
}

SecondOrderStats assemble(const BlockCounts& c, const StatGrid& grid, const std::vector<double>& weights,
                          const std::vector<std::vector<double>>& pmf) {
  SecondOrderStats s;
  s.dim = c.D;
  s.marks = static_cast<int>(c.M);
  s.grid = grid;
  s.pmf = pmf;
  s.rates.assign(c.D, 0.0);
  double length = 0.0;
  for (std::size_t k = 0; k < c.blocks; ++k) {
    length += weights[k] * c.length[k];
    for (std::size_t i = 0; i < c.D; ++i) s.rates[i] += weights[k] * c.events[k * c.D + i];
  }
  for (double& r : s.rates) r /= length;
  s.n_conditioning.assign(c.D * c.M, 0);
  std::vector<double> cond(c.D * c.M, 0.0);
  for (std::size_t k = 0; k < c.blocks; ++k)
    for (std::size_t q = 0; q < c.D * c.M; ++q) cond[q] += weights[k] * c.cond[k * c.D * c.M + q];
  for (std::size_t q = 0; q < c.D * c.M; ++q) s.n_conditioning[q] = static_cast<std::size_t>(std::llround(cond[q]));
  s.values.assign(c.D * c.D * c.M * c.B, 0.0);
  for (std::size_t i = 0; i < c.D; ++i)
    for (std::size_t j = 0; j < c.D; ++j)
      for (std::size_t m = 0; m < c.M; ++m) {
        const double n = cond[j * c.M + m];
        if (n == 0.0) continue;
        for (std::size_t b = 0; b < c.B; ++b) {
          double pairs = 0.0;
          for (std::size_t k = 0; k < c.blocks; ++k) pairs += weights[k] * c.pairs[c.pair_index(k, i, j, m, b)];
          s.values[s.index(i, j, static_cast<int>(m) + 1, b)] =
              pairs / (n * (grid.hi(b) - grid.lo(b))) - s.rates[i];
        }
      }
  return s;
}

}  // namespace

SecondOrderStats estimate_second_order(const EventStream& stream, const StatGrid& grid, int jobs) {
  if (!(grid.T < stream.horizon())) throw ArgumentError("grid horizon T must be below the stream horizon");
  const auto pmf = estimate_first_order(stream).second;
  return assemble(count_pairs(stream, grid, 1, jobs), grid, {1.0}, pmf);
}

std::vector<double> bootstrap_standard_error(const EventStream& stream, const StatGrid& grid, int blocks,
                                             int resamples, std::uint64_t seed) {
  if (blocks < 2 || resamples < 2) throw ArgumentError("bootstrap needs >= 2 blocks and >= 2 resamples");
  const auto pmf = estimate_first_order(stream).second;
  const BlockCounts c = count_pairs(stream, grid, static_cast<std::size_t>(blocks), 1);
  Rng rng(seed);
  std::vector<double> sum, sum_sq;
  std::vector<double> weights(static_cast<std::size_t>(blocks));
  for (int r = 0; r < resamples; ++r) {
    std::fill(weights.begin(), weights.end(), 0.0);
    for (int k = 0; k < blocks; ++k) weights[static_cast<std::size_t>(rng.uniform_int(0, blocks - 1))] += 1.0;
    const auto s = assemble(c, grid, weights, pmf);
    if (sum.empty()) {
      sum.assign(s.values.size(), 0.0);
      sum_sq.assign(s.values.size(), 0.0);
    }
    for (std::size_t q = 0; q < s.values.size(); ++q) {
      sum[q] += s.values[q];
      sum_sq[q] += s.values[q] * s.values[q];
    }
  }
  std::vector<double> se(sum.size());
  const double n = resamples;
  for (std::size_t q = 0; q < se.size(); ++q)
    se[q] = std::sqrt(std::max(0.0, (sum_sq[q] - sum[q] * sum[q] / n) / (n - 1.0)));
  return se;
}

double interpolate_g(const SecondOrderStats& stats, std::size_t i, std::size_t j, double t, int m) {
  const StatGrid& g = stats.grid;
  if (!(t > 0.0) || t > g.T) return 0.0;
  const std::size_t B = g.bins();
  if (t <= g.center(0)) return stats.g(i, j, m, 0);
  if (t >= g.center(B - 1)) return stats.g(i, j, m, B - 1);
  std::size_t lo = 0, hi = B - 1;  // c_lo <= t < c_hi
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    (g.center(mid) <= t ? lo : hi) = mid;
  }
  const double c0 = g.center(lo), c1 = g.center(lo + 1);
  const double w = (t - c0) / (c1 - c0);
  return (1.0 - w) * stats.g(i, j, m, lo) + w * stats.g(i, j, m, lo + 1);
}

double h_kernel(const SecondOrderStats& stats, std::size_t k, std::size_t j, double t, int x, int z) {
  if (t > 0.0) return interpolate_g(stats, k, j, t, x);
  if (t < 0.0) return stats.rates[k] / stats.rates[j] * interpolate_g(stats, j, k, -t, z);
  return 0.0;
}

// ---------------------------------------------------------------- IO

void write_stats_csv(std::ostream& out, const SecondOrderStats& s, const std::optional<Provenance>& prov) {
  write_comment(out, "format", "nhawkes-stats-v1");
  write_provenance(out, prov);
  out << "i,j,bin_lo,bin_hi,mark,value\n";
  for (std::size_t i = 0; i < s.dim; ++i)
    for (std::size_t j = 0; j < s.dim; ++j)
      for (int m = 1; m <= s.marks; ++m)
        for (std::size_t b = 0; b < s.grid.bins(); ++b)
          out << i + 1 << ',' << j + 1 << ',' << format_double(s.grid.lo(b)) << ',' << format_double(s.grid.hi(b))
              << ',' << m << ',' << format_double(s.g(i, j, m, b)) << '\n';
}

nlohmann::json stats_sidecar(const SecondOrderStats& s, const std::optional<Provenance>& prov) {
  nlohmann::json j{{"format", "nhawkes-stats-v1"},
                   {"dimension", s.dim},
                   {"marks", s.marks},
                   {"rates", s.rates},
                   {"mark_pmf", s.pmf},
                   {"grid", {{"h", s.grid.h}, {"n_lin", s.grid.n_lin}, {"n_log", s.grid.n_log}, {"T", s.grid.T}}},
                   {"n_conditioning", s.n_conditioning}};
  nlohmann::json flagged = nlohmann::json::array();
  for (const auto& [c, m] : s.flagged()) flagged.push_back({{"component", c + 1}, {"mark", m}});
  j["flagged"] = flagged;
  if (prov) {
    j["seed"] = prov->seed;
    j["config_hash"] = prov->config_hash;
  }
  return j;
}

SecondOrderStats read_stats(std::istream& csv, const nlohmann::json& side) {
  SecondOrderStats s;
  try {
    s.dim = side.at("dimension").get<std::size_t>();
    s.marks = side.at("marks").get<int>();
    s.rates = side.at("rates").get<std::vector<double>>();
    s.pmf = side.at("mark_pmf").get<std::vector<std::vector<double>>>();
    const auto& g = side.at("grid");
    s.grid = build_grid(g.at("h").get<double>(), g.at("n_lin").get<int>(), g.at("n_log").get<int>(),
                        g.at("T").get<double>());
    s.n_conditioning = side.at("n_conditioning").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed stats sidecar: ") + e.what());
  }
  s.values.assign(s.dim * s.dim * static_cast<std::size_t>(s.marks) * s.grid.bins(), 0.0);
  read_comment_header(csv);
  std::string line;
  if (!std::getline(csv, line) || line != "i,j,bin_lo,bin_hi,mark,value")
    throw ArgumentError("stats CSV lacks the header i,j,bin_lo,bin_hi,mark,value");
  std::vector<char> seen(s.values.size(), 0);
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 6) throw ArgumentError("stats CSV row needs 6 fields");
    const auto i = parse_int(f[0]) - 1, j = parse_int(f[1]) - 1, m = parse_int(f[4]);
    const double lo = parse_double(f[2]);
    if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= s.dim || static_cast<std::size_t>(j) >= s.dim || m < 1 ||
        m > s.marks)
      throw ArgumentError("stats CSV index out of range");
    const auto it = std::lower_bound(s.grid.points.begin(), s.grid.points.end() - 1, lo);
    const auto b = static_cast<std::size_t>(it - s.grid.points.begin());
    if (b >= s.grid.bins() || std::abs(s.grid.points[b] - lo) > 1e-12 * std::max(1.0, lo))
      throw ArgumentError("stats CSV bin does not match the grid");
    const auto q = s.index(static_cast<std::size_t>(i), static_cast<std::size_t>(j), static_cast<int>(m), b);
    s.values[q] = parse_double(f[5]);
    seen[q] = 1;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw ArgumentError("stats CSV is missing cells");
  s.validate();
  return s;
}

void save_stats(const std::string& path, const SecondOrderStats& stats, const std::optional<Provenance>& prov) {
  std::ofstream csv(path);
  if (!csv) throw ArgumentError("cannot write " + path);
  write_stats_csv(csv, stats, prov);
  std::ofstream side(path + ".json");
  if (!side) throw ArgumentError("cannot write " + path + ".json");
  side << stats_sidecar(stats, prov).dump(2) << '\n';
}

SecondOrderStats load_stats(const std::string& path) {
  std::ifstream csv(path);
  if (!csv) throw ArgumentError("cannot read " + path);
  std::ifstream side(path + ".json");
  if (!side) throw ArgumentError("cannot read " + path + ".json");
  nlohmann::json j;
  try {
    side >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(path + ".json: " + e.what());
  }
  return read_stats(csv, j);
}

}  // namespace nhawkes
