#pragma once

#include "nhawkes/io_util.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace nhawkes {

/// One event. `component` is 0-based; `mark` is the mark value in 1..M
/// (it enters the kernel formulas as a number).
struct Event {
  double time = 0.0;
  std::uint32_t component = 0;
  std::int32_t mark = 1;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Observation interval. Lags are never measured across two segments.
struct Segment {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Time-sorted marked events of D component types observed on [0, horizon].
///
/// Invariants (checked on construction): times strictly increasing within a
/// component and non-decreasing overall, components in [0, D), marks in
/// [1, M], every time inside a segment. A stream without explicit segments
/// has the single segment [0, horizon].
class EventStream {
public:
  EventStream(std::size_t dimension, int marks, double horizon, std::vector<Event> events,
              std::vector<Segment> segments = {});

  std::size_t dimension() const { return dimension_; }
  int marks() const { return marks_; }
  double horizon() const { return horizon_; }
  std::span<const Event> events() const { return events_; }
  std::span<const Segment> segments() const { return segments_; }
  std::size_t size() const { return events_.size(); }

  /// Total observed time (sum of segment lengths).
  double observed_length() const;

  std::vector<std::size_t> counts() const;

  /// Event times of one component, ascending.
  std::vector<double> times_of(std::size_t component) const;

  friend bool operator==(const EventStream&, const EventStream&) = default;

private:
  std::size_t dimension_;
  int marks_;
  double horizon_;
  std::vector<Event> events_;
  std::vector<Segment> segments_;
};

/// CSV with `# key=value` metadata lines (format, dimension, marks, horizon,
/// optional segments and provenance) followed by the header
/// `time,component,mark`. Components and marks are written 1-based.
void write_events_csv(std::ostream& out, const EventStream& stream,
                      const std::optional<Provenance>& prov = std::nullopt);
EventStream read_events_csv(std::istream& in);

}  // namespace nhawkes
