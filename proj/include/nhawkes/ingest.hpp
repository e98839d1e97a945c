#pragma once

#include "nhawkes/event_stream.hpp"
#include "nhawkes/kernel.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace nhawkes {

inline constexpr double kSecondsPerDay = 86400.0;

struct TradeRecord {
  std::int64_t timestamp_us = 0;  ///< microseconds since the Unix epoch
  std::string pair;
  double volume = 0.0;  ///< quote currency (USD)

  friend bool operator==(const TradeRecord&, const TradeRecord&) = default;
};

/// CSV with header `timestamp_us,pair,volume_usd`.
std::vector<TradeRecord> read_trades_csv(std::istream& in);
void write_trades_csv(std::ostream& out, const std::vector<TradeRecord>& trades);

/// Trades of one pair merged by timestamp (volumes summed). Input must be
/// sorted by timestamp.
std::vector<TradeRecord> aggregate_trades(const std::vector<TradeRecord>& trades);

/// Mark intervals (0, e_1], (e_1, e_2], ..., (e_last, inf).
struct VolumeBinning {
  std::vector<double> edges;

  VolumeBinning() = default;
  explicit VolumeBinning(std::vector<double> e);
  int marks() const { return static_cast<int>(edges.size()) + 1; }
};

/// Log-spaced edges from 100 to 100 000 USD; 15 marks.
VolumeBinning default_volume_binning();

int bin_volume(double volume, const VolumeBinning& binning);

struct MarketStream {
  EventStream stream;
  std::vector<std::string> pairs;  ///< component k is pairs[k]
  std::vector<double> volumes;     ///< total traded volume per component
  std::int64_t origin_us = 0;      ///< UTC midnight mapped to t = 0
};

/// One component per requested pair (all pairs present, sorted, when
/// `pairs` is empty). Trades are aggregated per pair, binned, and timed in
/// seconds from the UTC midnight before the first trade; the horizon runs to
/// the UTC midnight after the last one.
MarketStream build_market_stream(const std::vector<TradeRecord>& trades, std::vector<std::string> pairs,
                                 const VolumeBinning& binning);

struct IntradayProfile {
  double bin_minutes = 5.0;
  std::vector<double> mean_rate;  ///< events per second
  std::vector<double> ci_low, ci_high;
  std::size_t days_used = 0;
  std::vector<std::size_t> skipped_days;  ///< days without any event
};

/// Mean event rate per clock bin across days with a 95% normal
/// confidence interval. The stream origin must be a UTC midnight.
IntradayProfile intraday_profile(const EventStream& stream, double bin_minutes);

/// Keeps events with clock time in [start, end) (seconds after midnight).
/// Each day becomes its own segment, laid end to end, so no lag spans two
/// days. A full-day window returns the stream unchanged.
EventStream window_filter(const EventStream& stream, double start_seconds, double end_seconds);

/// Trades from a simulated process: one pair per component, log-normal
/// volumes exp(N(log_mean, log_sd)), timestamps rounded to microseconds.
std::vector<TradeRecord> synthetic_trades(const KernelSpec& spec, double horizon, std::uint64_t seed,
                                          const std::vector<std::string>& pairs, std::int64_t origin_us,
                                          double log_mean = 7.0, double log_sd = 1.5);

}  // namespace nhawkes
