#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "freshsched/model.hpp"

namespace freshsched {

enum class ServerPosition : std::uint8_t { Idle, ServingQuery, ServingUpdate };

enum class Trigger : std::uint8_t { ArrivalUpdate, ArrivalQuery, DepartureUpdate, DepartureQuery };

/// Queue totals (in-service job included) plus where the server sits.
/// `emptying` marks a commitment to exhaust the current queue before leaving it.
struct SchedulerState {
  std::uint32_t n_q = 0;
  std::uint32_t n_u = 0;
  ServerPosition position = ServerPosition::Idle;
  bool emptying = false;

  bool operator==(const SchedulerState&) const = default;
};

SchedulerState initial_state() noexcept;

/// True iff the state satisfies the position/occupancy invariants.
bool is_consistent(const SchedulerState& s) noexcept;

/// Post-event scheduler state. `state` is the pre-event state; the trigger's
/// arrival or departure is applied here.
///
/// FCFS cannot be decided from queue totals alone: on a departure that leaves
/// both queues non-empty the caller passes the class of the oldest job still
/// in system as `fcfs_head`. Other policies ignore it.
///
/// Throws Error{InconsistentTrigger} when the trigger does not fit the state.
SchedulerState decide(const PolicySpec& policy, const SchedulerState& state, Trigger trigger,
                      std::optional<JobClass> fcfs_head = std::nullopt);

/// Indices of `jobs` in FCFS service order: by arrival time, updates first on ties.
std::vector<std::size_t> equivalent_fcfs_order(std::span<const JobRecord> jobs);

// Class-swap mapping used by the mirror-symmetry properties.
SchedulerState swap_classes(const SchedulerState& s) noexcept;
Trigger swap_classes(Trigger t) noexcept;

constexpr ServerPosition serving(JobClass c) noexcept {
  return c == JobClass::Update ? ServerPosition::ServingUpdate : ServerPosition::ServingQuery;
}

constexpr std::optional<JobClass> served_class(ServerPosition p) noexcept {
  switch (p) {
    case ServerPosition::ServingQuery: return JobClass::Query;
    case ServerPosition::ServingUpdate: return JobClass::Update;
    case ServerPosition::Idle: break;
  }
  return std::nullopt;
}

constexpr bool is_arrival(Trigger t) noexcept {
  return t == Trigger::ArrivalUpdate || t == Trigger::ArrivalQuery;
}

constexpr JobClass trigger_class(Trigger t) noexcept {
  return (t == Trigger::ArrivalUpdate || t == Trigger::DepartureUpdate) ? JobClass::Update
                                                                        : JobClass::Query;
}

}  // namespace freshsched
