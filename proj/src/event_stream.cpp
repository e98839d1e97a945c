#include "nhawkes/event_stream.hpp"

#include "nhawkes/error.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

namespace nhawkes {

EventStream::EventStream(std::size_t dimension, int marks, double horizon,
                         std::vector<Event> events, std::vector<Segment> segments)
    : dimension_(dimension),
      marks_(marks),
      horizon_(horizon),
      events_(std::move(events)),
      segments_(std::move(segments)) {
  if (dimension_ == 0) throw ArgumentError("event stream dimension must be >= 1");
  if (marks_ < 1) throw ArgumentError("mark cardinality must be >= 1");
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_))
    throw ArgumentError("event stream horizon must be positive and finite");
  if (segments_.empty()) segments_.push_back({0.0, horizon_});

  double prev_end = 0.0;
  for (const auto& seg : segments_) {
    if (!(seg.start >= prev_end) || !(seg.end > seg.start) || seg.end > horizon_)
      throw ArgumentError("segments must be ordered, non-empty and inside [0, horizon]");
    prev_end = seg.end;
  }

  std::vector<double> last(dimension_, -INFINITY);
  double prev = -INFINITY;
  std::size_t seg = 0;
  for (const auto& e : events_) {
    if (e.component >= dimension_) throw ArgumentError("event component out of range");
    if (e.mark < 1 || e.mark > marks_) throw ArgumentError("event mark out of range");
    if (!(e.time >= 0.0) || e.time > horizon_) throw ArgumentError("event time outside [0, horizon]");
    if (e.time < prev) throw ArgumentError("event times must be globally non-decreasing");
    if (!(e.time > last[e.component]))
      throw ArgumentError("event times must be strictly increasing within a component");
    while (seg < segments_.size() && e.time > segments_[seg].end) ++seg;
    if (seg == segments_.size() || e.time < segments_[seg].start)
      throw ArgumentError("event time outside every observation segment");
    prev = e.time;
    last[e.component] = e.time;
  }
}

double EventStream::observed_length() const {
  double total = 0.0;
  for (const auto& s : segments_) total += s.length();
  return total;
}

std::vector<std::size_t> EventStream::counts() const {
  std::vector<std::size_t> c(dimension_, 0);
  for (const auto& e : events_) ++c[e.component];
  return c;
}

std::vector<double> EventStream::times_of(std::size_t component) const {
  std::vector<double> out;
  for (const auto& e : events_)
    if (e.component == component) out.push_back(e.time);
  return out;
}

void write_events_csv(std::ostream& out, const EventStream& stream,
                      const std::optional<Provenance>& prov) {
  write_comment(out, "format", "nhawkes-events-v1");
  write_comment(out, "dimension", std::to_string(stream.dimension()));
  write_comment(out, "marks", std::to_string(stream.marks()));
  write_comment(out, "horizon", format_double(stream.horizon()));
  const auto segs = stream.segments();
  if (!(segs.size() == 1 && segs[0].start == 0.0 && segs[0].end == stream.horizon())) {
    std::string text;
    for (const auto& s : segs) {
      if (!text.empty()) text += ';';
      text += format_double(s.start) + ':' + format_double(s.end);
    }
    write_comment(out, "segments", text);
  }
  write_provenance(out, prov);
  out << "time,component,mark\n";
  for (const auto& e : stream.events())
    out << format_double(e.time) << ',' << (e.component + 1) << ',' << e.mark << '\n';
}

EventStream read_events_csv(std::istream& in) {
  const auto meta = read_comment_header(in);
  auto need = [&](const char* key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw ArgumentError(std::string("event CSV lacks '# ") + key + "=' line");
    return it->second;
  };
  const auto dim = static_cast<std::size_t>(parse_int(need("dimension")));
  const int marks = static_cast<int>(parse_int(need("marks")));
  const double horizon = parse_double(need("horizon"));
  std::vector<Segment> segments;
  if (auto it = meta.find("segments"); it != meta.end()) {
    for (auto part : split(it->second, ';')) {
      auto ab = split(part, ':');
      if (ab.size() != 2) throw ArgumentError("malformed segments line");
      segments.push_back({parse_double(ab[0]), parse_double(ab[1])});
    }
  }

  std::string line;
  if (!std::getline(in, line) || line.rfind("time,component,mark", 0) != 0)
    throw ArgumentError("event CSV header must be 'time,component,mark'");
  std::vector<Event> events;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto f = split(line, ',');
    if (f.size() != 3) throw ArgumentError("event CSV row must have 3 fields: " + line);
    const long long comp = parse_int(f[1]);
    if (comp < 1) throw ArgumentError("event component must be >= 1");
    events.push_back({parse_double(f[0]), static_cast<std::uint32_t>(comp - 1),
                      static_cast<std::int32_t>(parse_int(f[2]))});
  }
  return EventStream(dim, marks, horizon, std::move(events), std::move(segments));
}

}  // namespace nhawkes
