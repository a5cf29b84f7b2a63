#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "freshsched/analytic.hpp"
#include "freshsched/model.hpp"
#include "freshsched/policy.hpp"

namespace freshsched {

struct RateTransition {
  std::size_t from;
  std::size_t to;
  double rate;
};

/// Off-diagonal generator entries of a finite CTMC.
struct RateMatrix {
  std::size_t size = 0;
  std::vector<RateTransition> transitions;
};

struct StationaryResult {
  std::vector<double> probability;
  /// max_s |(pi Q)_s| of the final iterate.
  double residual = 0.0;
};

/// Stationary law of an irreducible finite CTMC with the normalization
/// sum(pi) = 1. Throws Error{Reducible} or Error{NoConvergence}.
StationaryResult solve_stationary(const RateMatrix& rates, double residual_tolerance = 1e-10);

struct CtmcSpec {
  ModelParams params;
  PolicySpec policy;  // QueryK or UpdateK with a finite threshold
  TruncationBounds bounds;

  /// Throws Error{UnsupportedEngine} for other policies and
  /// Error{TruncationTooSmall} if the thresholded dimension is below k + 2.
  void validate() const;
};

/// Truncated chain over scheduler states reachable from the empty system.
/// Arrivals that would leave the truncation box are dropped.
class CtmcModel {
 public:
  const CtmcSpec& spec() const noexcept { return spec_; }
  const std::vector<SchedulerState>& states() const noexcept { return states_; }
  const RateMatrix& rates() const noexcept { return rates_; }

  std::optional<std::size_t> index_of(const SchedulerState& s) const;
  /// Outgoing transitions of one represented state.
  std::vector<std::pair<SchedulerState, double>> transitions_from(const SchedulerState& s) const;

 private:
  friend CtmcModel build_ctmc(const CtmcSpec& spec);
  explicit CtmcModel(CtmcSpec spec) : spec_(std::move(spec)) {}
  std::size_t key(const SchedulerState& s) const;

  CtmcSpec spec_;
  std::vector<SchedulerState> states_;
  RateMatrix rates_;
  std::vector<std::ptrdiff_t> lookup_;  // dense key -> state index or -1
};

CtmcModel build_ctmc(const CtmcSpec& spec);

struct CtmcSolution {
  std::vector<SchedulerState> states;
  std::vector<double> probability;
  TruncationBounds bounds;
  double residual = 0.0;
  double tail_mass_q = 0.0;  // probability on the two outermost query layers
  double tail_mass_u = 0.0;
  double tail_mass() const noexcept { return tail_mass_q + tail_mass_u; }

  /// Zero for states the chain never represents.
  double probability_of(const SchedulerState& s) const;
  double total() const;
};

CtmcSolution solve_ctmc(const CtmcModel& model, double residual_tolerance = 1e-10);

struct QueueMoments {
  double nq = 0.0;
  double nu = 0.0;
};

QueueMoments expected_queue_lengths(const CtmcSolution& solution);

/// Solves with growing bounds until the tail mass drops below the tolerance.
CtmcSolution solve_with_truncation(const ModelParams& params, const PolicySpec& policy,
                                   const TruncationPolicy& truncation);

}  // namespace freshsched
