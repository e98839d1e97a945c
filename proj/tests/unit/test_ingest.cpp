#include <doctest.h>

#include "nhawkes/error.hpp"
#include "nhawkes/ingest.hpp"
#include "nhawkes/rng.hpp"
#include "nhawkes/stats.hpp"

#include <cmath>
#include <set>
#include <sstream>

using namespace nhawkes;

namespace {

constexpr std::int64_t kDay = 86400LL * 1000000LL;
constexpr std::int64_t kOrigin = 19700LL * kDay;  // a UTC midnight

// Poisson events over `days` days with the rate doubled on [8h, 12h).
EventStream block_stream(std::size_t days, double rate, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Event> ev;
  double t = 0.0;
  const double horizon = static_cast<double>(days) * kSecondsPerDay;
  const double top = 2.0 * rate;
  for (;;) {
    t += rng.exponential(top);
    if (t >= horizon) break;
    const double clock = std::fmod(t, kSecondsPerDay);
    const double r = clock >= 8 * 3600.0 && clock < 12 * 3600.0 ? 2.0 * rate : rate;
    if (rng.uniform() * top < r) ev.push_back({t, 0, 1});
  }
  return EventStream(1, 1, horizon, std::move(ev));
}

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("trade CSV round trip and validation") {
    const std::vector<TradeRecord> trades{{kOrigin + 5, "BTC-USD", 10.5}, {kOrigin + 7, "ETH-USD", 0.25}};
    std::stringstream ss;
    write_trades_csv(ss, trades);
    CHECK(read_trades_csv(ss) == trades);
    std::istringstream bad_header("time,pair,volume\n1,a,1\n");
    CHECK_THROWS_AS(read_trades_csv(bad_header), ArgumentError);
    std::istringstream bad_volume("timestamp_us,pair,volume_usd\n1,a,-1\n");
    CHECK_THROWS_AS(read_trades_csv(bad_volume), ArgumentError);
    std::istringstream bad_fields("timestamp_us,pair,volume_usd\n1,a\n");
    CHECK_THROWS_AS(read_trades_csv(bad_fields), ArgumentError);
  }

  TEST_CASE("aggregation") {
    const std::vector<TradeRecord> same{{100, "X", 10}, {100, "X", 20}, {100, "X", 30}, {200, "X", 5}};
    const auto agg = aggregate_trades(same);
    REQUIRE(agg.size() == 2);
    CHECK(agg[0].volume == 60.0);
    CHECK(agg[1].volume == 5.0);
    CHECK(aggregate_trades(agg) == agg);
    const std::vector<TradeRecord> distinct{{1, "X", 1}, {2, "X", 2}, {3, "X", 3}};
    CHECK(aggregate_trades(distinct) == distinct);
    CHECK_THROWS_AS(aggregate_trades({{2, "X", 1}, {1, "X", 1}}), ArgumentError);
    CHECK_THROWS_AS(aggregate_trades({{1, "X", 1}, {2, "Y", 1}}), ArgumentError);
  }

  TEST_CASE("volume binning") {
    const auto b = default_volume_binning();
    CHECK(b.marks() == 15);
    CHECK(bin_volume(50, b) == 1);
    CHECK(bin_volume(100, b) == 1);
    CHECK(bin_volume(100.01, b) == 2);
    CHECK(bin_volume(170, b) == 2);
    CHECK(bin_volume(100000, b) == 14);
    CHECK(bin_volume(150000, b) == 15);
    CHECK_THROWS_AS(VolumeBinning({10, 5}), ArgumentError);
    CHECK_THROWS_AS(bin_volume(0.0, b), ArgumentError);
  }

  TEST_CASE("market stream build and microsecond round trip") {
    std::vector<TradeRecord> trades{{kOrigin + 3600000001LL, "B", 150},
                                    {kOrigin + 3600000001LL, "B", 50},
                                    {kOrigin + 1000000LL, "A", 20},
                                    {kOrigin + kDay + 17, "A", 1e6},
                                    {kOrigin + 3600000001LL, "A", 120}};
    const auto ms = build_market_stream(trades, {}, default_volume_binning());
    CHECK(ms.origin_us == kOrigin);
    CHECK(ms.pairs == std::vector<std::string>{"A", "B"});
    CHECK(ms.stream.horizon() == 2.0 * kSecondsPerDay);
    CHECK(ms.stream.size() == 4);
    CHECK(ms.volumes[1] == 200.0);
    CHECK(ms.stream.events()[0].time == 1.0);
    CHECK(ms.stream.events()[0].mark == 1);

    std::stringstream ss;
    write_events_csv(ss, ms.stream);
    const auto back = read_events_csv(ss);
    std::multiset<std::int64_t> a, b;
    for (const auto& e : back.events()) a.insert(ms.origin_us + std::llround(e.time * 1e6));
    for (const auto& t : trades) b.insert(t.timestamp_us);
    CHECK(a == std::multiset<std::int64_t>{kOrigin + 1000000LL, kOrigin + 3600000001LL, kOrigin + 3600000001LL,
                                           kOrigin + kDay + 17});
    CHECK_THROWS_AS(build_market_stream(trades, {"C"}, default_volume_binning()), ArgumentError);
  }

  TEST_CASE("intraday profile") {
    const auto flat = block_stream(20, 0.05, 3);
    const auto p5 = intraday_profile(flat, 5.0);
    CHECK(p5.mean_rate.size() == 288);
    CHECK(intraday_profile(flat, 60.0).mean_rate.size() == 24);
    CHECK_THROWS_AS(intraday_profile(flat, 7.0), ArgumentError);

    const auto p = intraday_profile(flat, 60.0);
    double in_block = 0.0, outside = 0.0;
    for (std::size_t b = 0; b < 24; ++b) (b >= 8 && b < 12 ? in_block : outside) += p.mean_rate[b];
    const double ratio = (in_block / 4.0) / (outside / 20.0);
    MESSAGE("block ratio " << ratio);
    CHECK(ratio == doctest::Approx(2.0).epsilon(0.15));

    Rng rng(9);
    std::vector<Event> ev;
    double t = 0.0;
    for (;;) {
      t += rng.exponential(0.05);
      if (t >= 20 * kSecondsPerDay) break;
      ev.push_back({t, 0, 1});
    }
    const auto constant = intraday_profile(EventStream(1, 1, 20 * kSecondsPerDay, ev), 60.0);
    double mean = 0.0;
    for (double r : constant.mean_rate) mean += r / 24.0;
    int covered = 0;
    for (std::size_t b = 0; b < 24; ++b) covered += constant.ci_low[b] <= mean && mean <= constant.ci_high[b];
    CHECK(covered >= 20);
    CHECK(constant.days_used == 20);

    std::vector<Event> gap;
    for (const auto& e : ev)
      if (e.time < 86400.0 || e.time >= 2 * 86400.0) gap.push_back(e);
    const auto skipped = intraday_profile(EventStream(1, 1, 20 * kSecondsPerDay, gap), 60.0);
    CHECK(skipped.skipped_days == std::vector<std::size_t>{1});
    CHECK(skipped.days_used == 19);
  }

  TEST_CASE("daily window") {
    const auto s = block_stream(3, 0.01, 5);
    CHECK(window_filter(s, 0.0, kSecondsPerDay) == s);

    const EventStream edge(1, 1, 2 * kSecondsPerDay, {{7 * 3600.0, 0, 1}, {12 * 3600.0, 0, 1}, {86400.0 + 7 * 3600.0 + 1, 0, 1}});
    const auto w = window_filter(edge, 7 * 3600.0, 12 * 3600.0);
    REQUIRE(w.size() == 2);
    CHECK(w.events()[0].time == 0.0);
    CHECK(w.events()[1].time == 5 * 3600.0 + 1);
    CHECK(w.horizon() == 10 * 3600.0);
    CHECK(w.segments().size() == 2);

    const auto filtered = window_filter(s, 7 * 3600.0, 12 * 3600.0);
    CHECK(filtered.horizon() == 3 * 5 * 3600.0);
    // lags inside one day survive the re-basing
    std::vector<double> orig, moved;
    for (const auto& e : s.events())
      if (e.time < kSecondsPerDay && e.time >= 7 * 3600.0 && e.time < 12 * 3600.0) orig.push_back(e.time);
    for (const auto& e : filtered.events())
      if (e.time < 5 * 3600.0) moved.push_back(e.time);
    REQUIRE(orig.size() == moved.size());
    for (std::size_t k = 1; k < orig.size(); ++k)
      CHECK(std::abs((moved[k] - moved[k - 1]) - (orig[k] - orig[k - 1])) < 1e-9);
    CHECK_THROWS_AS(window_filter(s, 5.0, 5.0), ArgumentError);
  }

  TEST_CASE("no lags across days after windowing") {
    // 20 s before the end of day 0's window, then at the start of day 1's:
    // 20 s apart after re-basing, never paired
    const EventStream s(1, 1, 2 * kSecondsPerDay, {{12 * 3600.0 - 20.0, 0, 1}, {86400.0 + 7 * 3600.0, 0, 1}});
    const auto w = window_filter(s, 7 * 3600.0, 12 * 3600.0);
    const auto st = estimate_second_order(w, build_grid(0.01, 1, 5, 15.0));
    CHECK(st.conditioning(0, 1) == 2);
    for (std::size_t b = 0; b < st.grid.bins(); ++b) CHECK(st.g(0, 0, 1, b) == doctest::Approx(-st.rates[0]));
  }

  TEST_CASE("synthetic trades") {
    const KernelSpec spec(2, 1, {0.2, 0.1}, std::vector<KernelEntry>(4));
    const auto a = synthetic_trades(spec, 5000.0, 4, {"AAA", "BBB"}, kOrigin);
    const auto b = synthetic_trades(spec, 5000.0, 4, {"AAA", "BBB"}, kOrigin);
    CHECK(a == b);
    CHECK(a.size() > 1000);
    std::size_t n_a = 0;
    for (const auto& t : a) {
      CHECK(t.volume > 0.0);
      n_a += t.pair == "AAA";
    }
    CHECK(static_cast<double>(n_a) / static_cast<double>(a.size()) == doctest::Approx(2.0 / 3.0).epsilon(0.1));
    const auto ms = build_market_stream(a, {"AAA", "BBB"}, default_volume_binning());
    CHECK(ms.stream.dimension() == 2);
  }
}
