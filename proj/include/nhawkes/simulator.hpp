#pragma once

#include "nhawkes/error.hpp"
#include "nhawkes/event_stream.hpp"
#include "nhawkes/kernel.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

namespace nhawkes {

struct SimConfig {
  KernelSpec spec;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  std::size_t max_events = 100'000'000;
  /// Lower clamp applied to each intensity.
  double intensity_floor = 0.0;
  /// When > 0, stop at this many events; the stream horizon becomes the
  /// last event time. `horizon` then only bounds the run.
  std::size_t stop_after_events = 0;
  /// History of non-exponential kernels is dropped once the remaining
  /// |phi| mass is below this fraction of the norm...
  double prune_rel_tol = 1e-6;
  /// ...or after this many seconds for heavy tails.
  double prune_horizon_cap = 1000.0;
};

struct SimDiagnostics {
  std::size_t candidates = 0;
  std::size_t accepted = 0;
  /// Candidates at which some intensity fell below the floor.
  std::size_t clamped = 0;
  /// Largest share of a kernel's mass lost to history pruning.
  double pruned_mass = 0.0;

  double clamp_fraction() const {
    return candidates == 0 ? 0.0 : static_cast<double>(clamped) / static_cast<double>(candidates);
  }
};

struct SimResult {
  EventStream stream;
  SimDiagnostics diagnostics;
};

/// Raised when max_events is reached; carries what was simulated so far.
class TruncationError : public NumericalError {
public:
  TruncationError(const std::string& what, EventStream partial)
      : NumericalError(what), partial_(std::make_shared<EventStream>(std::move(partial))) {}
  const EventStream& partial() const { return *partial_; }

private:
  std::shared_ptr<EventStream> partial_;
};

/// lambda^i(t) = max(0, mu^i + sum_j sum_{s < t} phi^{ij}(t - s, mark_s)) by a
/// direct scan of the history. Throws ArgumentError if t precedes an event
/// or the stream does not match the spec.
std::vector<double> intensity_at(const KernelSpec& spec, const EventStream& history, double t);

/// Ogata thinning. The bound at time t is sum_i (mu^i + sum_s E^{ij}(t - s))
/// with E the non-increasing envelope of each kernel, valid until the next
/// event and recomputed after every candidate.
///
/// Streams: candidate times and acceptance use derive_seed(seed, 0); marks
/// of component j use derive_seed(seed, j + 1).
SimResult simulate_with_diagnostics(const SimConfig& config);
EventStream simulate(const SimConfig& config);

}  // namespace nhawkes
