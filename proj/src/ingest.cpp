#include "nhawkes/ingest.hpp"

#include "nhawkes/error.hpp"
#include "nhawkes/io_util.hpp"
#include "nhawkes/rng.hpp"
#include "nhawkes/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

namespace nhawkes {

namespace {

constexpr std::int64_t kMicrosPerDay = 86400LL * 1000000LL;

std::int64_t floor_day(std::int64_t us) {
  std::int64_t d = us / kMicrosPerDay;
  if (us % kMicrosPerDay < 0) --d;
  return d * kMicrosPerDay;
}

}  // namespace

std::vector<TradeRecord> read_trades_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ArgumentError("trade CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "timestamp_us,pair,volume_usd") throw ArgumentError("trade CSV header must be timestamp_us,pair,volume_usd");
  std::vector<TradeRecord> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 3) throw ArgumentError("trade CSV line " + std::to_string(row) + ": expected 3 fields");
    TradeRecord r;
    try {
      r.timestamp_us = parse_int(cells[0]);
      r.pair = std::string(cells[1]);
      r.volume = parse_double(cells[2]);
    } catch (const ArgumentError& e) {
      throw ArgumentError("trade CSV line " + std::to_string(row) + ": " + e.what());
    }
    if (r.pair.empty()) throw ArgumentError("trade CSV line " + std::to_string(row) + ": empty pair");
    if (!(r.volume > 0.0) || !std::isfinite(r.volume))
      throw ArgumentError("trade CSV line " + std::to_string(row) + ": volume must be positive");
    out.push_back(std::move(r));
  }
  return out;
}

void write_trades_csv(std::ostream& out, const std::vector<TradeRecord>& trades) {
  out << "timestamp_us,pair,volume_usd\n";
  for (const auto& t : trades) out << t.timestamp_us << ',' << t.pair << ',' << format_double(t.volume) << '\n';
}

std::vector<TradeRecord> aggregate_trades(const std::vector<TradeRecord>& trades) {
  std::vector<TradeRecord> out;
  for (const auto& t : trades) {
    if (!out.empty() && t.pair != out.back().pair) throw ArgumentError("aggregate_trades takes trades of one pair");
    if (!out.empty() && t.timestamp_us < out.back().timestamp_us)
      throw ArgumentError("trades must be sorted by timestamp");
    if (!out.empty() && t.timestamp_us == out.back().timestamp_us)
      out.back().volume += t.volume;
    else
      out.push_back(t);
  }
  return out;
}

VolumeBinning::VolumeBinning(std::vector<double> e) : edges(std::move(e)) {
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (!(edges[k] > 0.0) || !std::isfinite(edges[k])) throw ArgumentError("volume edges must be positive");
    if (k > 0 && !(edges[k] > edges[k - 1])) throw ArgumentError("volume edges must be increasing");
  }
}

VolumeBinning default_volume_binning() {
  return VolumeBinning({100, 170, 290, 490, 840, 1425, 2425, 4125, 7000, 12000, 20300, 34500, 58750, 100000});
}

int bin_volume(double volume, const VolumeBinning& binning) {
  if (!(volume > 0.0)) throw ArgumentError("volume must be positive");
  const auto it = std::lower_bound(binning.edges.begin(), binning.edges.end(), volume);
  return static_cast<int>(it - binning.edges.begin()) + 1;
}

MarketStream build_market_stream(const std::vector<TradeRecord>& trades, std::vector<std::string> pairs,
                                 const VolumeBinning& binning) {
  if (trades.empty()) throw ArgumentError("no trades");
  std::map<std::string, std::vector<TradeRecord>> by_pair;
  for (const auto& t : trades) by_pair[t.pair].push_back(t);
  if (pairs.empty())
    for (const auto& [name, _] : by_pair) pairs.push_back(name);
  std::int64_t first = INT64_MAX, last = INT64_MIN;
  for (const auto& p : pairs) {
    const auto it = by_pair.find(p);
    if (it == by_pair.end()) throw ArgumentError("no trades for pair '" + p + "'");
    auto& v = it->second;
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.timestamp_us < b.timestamp_us; });
    first = std::min(first, v.front().timestamp_us);
    last = std::max(last, v.back().timestamp_us);
  }
  MarketStream out{EventStream(1, 1, 1.0, {}), pairs, std::vector<double>(pairs.size(), 0.0), floor_day(first)};
  const std::int64_t end = floor_day(last) + kMicrosPerDay;
  std::vector<Event> events;
  for (std::size_t k = 0; k < pairs.size(); ++k)
    for (const auto& t : aggregate_trades(by_pair[pairs[k]])) {
      events.push_back({static_cast<double>(t.timestamp_us - out.origin_us) * 1e-6, static_cast<std::uint32_t>(k),
                        bin_volume(t.volume, binning)});
      out.volumes[k] += t.volume;
    }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.time < b.time; });
  out.stream = EventStream(pairs.size(), binning.marks(), static_cast<double>(end - out.origin_us) * 1e-6,
                           std::move(events));
  return out;
}

IntradayProfile intraday_profile(const EventStream& stream, double bin_minutes) {
  if (!(bin_minutes > 0.0)) throw ArgumentError("bin length must be positive");
  const double bins_per_day = 1440.0 / bin_minutes;
  const auto B = static_cast<std::size_t>(std::llround(bins_per_day));
  if (std::abs(bins_per_day - static_cast<double>(B)) > 1e-9) throw ArgumentError("bin length must divide 24 h");
  const double width = bin_minutes * 60.0;
  const auto days = static_cast<std::size_t>(std::ceil(stream.horizon() / kSecondsPerDay - 1e-12));
  std::vector<std::vector<double>> counts(days, std::vector<double>(B, 0.0));
  for (const auto& e : stream.events()) {
    const auto d = std::min(days - 1, static_cast<std::size_t>(e.time / kSecondsPerDay));
    const double clock = e.time - static_cast<double>(d) * kSecondsPerDay;
    counts[d][std::min(B - 1, static_cast<std::size_t>(clock / width))] += 1.0;
  }
  IntradayProfile p;
  p.bin_minutes = bin_minutes;
  p.mean_rate.assign(B, 0.0);
  p.ci_low.assign(B, 0.0);
  p.ci_high.assign(B, 0.0);
  std::vector<std::size_t> used;
  for (std::size_t d = 0; d < days; ++d) {
    double total = 0.0;
    for (double c : counts[d]) total += c;
    (total > 0.0 ? used : p.skipped_days).push_back(d);
  }
  p.days_used = used.size();
  if (used.empty()) return p;
  const double n = static_cast<double>(used.size());
  for (std::size_t b = 0; b < B; ++b) {
    double mean = 0.0, sq = 0.0;
    for (auto d : used) mean += counts[d][b] / width / n;
    for (auto d : used) sq += std::pow(counts[d][b] / width - mean, 2);
    const double se = used.size() > 1 ? std::sqrt(sq / (n - 1.0) / n) : 0.0;
    p.mean_rate[b] = mean;
    p.ci_low[b] = mean - 1.96 * se;
    p.ci_high[b] = mean + 1.96 * se;
  }
  return p;
}

EventStream window_filter(const EventStream& stream, double start, double end) {
  if (!(start >= 0.0 && start < end && end <= kSecondsPerDay)) throw ArgumentError("need 0 <= start < end <= 86400");
  if (start == 0.0 && end == kSecondsPerDay) return stream;
  const auto days = static_cast<std::size_t>(std::ceil(stream.horizon() / kSecondsPerDay - 1e-12));
  std::vector<Segment> segments;
  std::vector<Event> events;
  std::vector<double> day_offset(days, -1.0);
  double offset = 0.0;
  for (std::size_t d = 0; d < days; ++d) {
    const double lo = static_cast<double>(d) * kSecondsPerDay + start;
    const double hi = std::min(static_cast<double>(d) * kSecondsPerDay + end, stream.horizon());
    if (!(hi > lo)) continue;
    day_offset[d] = offset;
    segments.push_back({offset, offset + (hi - lo)});
    offset += hi - lo;
  }
  for (const auto& e : stream.events()) {
    const auto d = static_cast<std::size_t>(e.time / kSecondsPerDay);
    if (d >= days || day_offset[d] < 0.0) continue;
    const double clock = e.time - static_cast<double>(d) * kSecondsPerDay;
    if (clock < start || clock >= end) continue;
    events.push_back({day_offset[d] + (clock - start), e.component, e.mark});
  }
  if (segments.empty()) throw ArgumentError("the window does not overlap the observation period");
  return EventStream(stream.dimension(), stream.marks(), offset, std::move(events), std::move(segments));
}

std::vector<TradeRecord> synthetic_trades(const KernelSpec& spec, double horizon, std::uint64_t seed,
                                          const std::vector<std::string>& pairs, std::int64_t origin_us,
                                          double log_mean, double log_sd) {
  if (pairs.size() != spec.dimension()) throw ArgumentError("need one pair name per component");
  if (!(log_sd >= 0.0)) throw ArgumentError("log-normal sd must be >= 0");
  const EventStream s = simulate({spec, horizon, seed});
  Rng rng(derive_seed(seed, 1000003));
  std::vector<TradeRecord> out;
  out.reserve(s.size());
  for (const auto& e : s.events())
    out.push_back({origin_us + std::llround(e.time * 1e6), pairs[e.component], std::exp(log_mean + log_sd * rng.normal())});
  return out;
}

}  // namespace nhawkes
