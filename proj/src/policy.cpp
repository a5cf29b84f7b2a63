#include "freshsched/policy.hpp"

#include <algorithm>
#include <numeric>

#include "freshsched/error.hpp"

namespace freshsched {

namespace {

std::uint32_t& count(SchedulerState& s, JobClass c) { return c == JobClass::Update ? s.n_u : s.n_q; }
std::uint32_t count(const SchedulerState& s, JobClass c) {
  return c == JobClass::Update ? s.n_u : s.n_q;
}

// Applies the arrival/departure to the queue totals; position is untouched.
SchedulerState apply_trigger(const SchedulerState& state, Trigger trigger) {
  if (!is_consistent(state)) {
    throw Error(ErrorCode::InconsistentTrigger, "scheduler state violates its invariants");
  }
  SchedulerState next = state;
  const JobClass c = trigger_class(trigger);
  if (is_arrival(trigger)) {
    ++count(next, c);
    return next;
  }
  if (state.position != serving(c)) {
    throw Error(ErrorCode::InconsistentTrigger,
                std::string(to_string(c)) + " departure while the server is not serving that queue");
  }
  --count(next, c);
  return next;
}

// Where a non-idling server goes when its current queue has emptied.
ServerPosition fallback(const SchedulerState& s, JobClass preferred) {
  if (count(s, preferred) > 0) return serving(preferred);
  if (count(s, other(preferred)) > 0) return serving(other(preferred));
  return ServerPosition::Idle;
}

// Query-k with prio = Query, Update-k with prio = Update.
SchedulerState decide_single(JobClass prio, const Threshold& k, const SchedulerState& before,
                             SchedulerState s, Trigger trigger) {
  const JobClass low = other(prio);
  switch (before.position) {
    case ServerPosition::Idle:
      // Only reachable through an arrival into an empty system.
      s.position = serving(trigger_class(trigger));
      break;
    case ServerPosition::ServingQuery:
    case ServerPosition::ServingUpdate: {
      const JobClass current = *served_class(before.position);
      if (current == prio) {
        // Exhaustive: arrivals during the emptying phase are served too.
        s.position = fallback(s, prio);
      } else if (count(s, low) == 0) {
        s.position = fallback(s, prio);
      } else if (k.reached(count(s, prio))) {
        s.position = serving(prio);  // preempt-resume
      } else {
        s.position = serving(low);
      }
      break;
    }
  }
  s.emptying = s.position == serving(prio) ||
               (s.position == serving(low) && k.is_unbounded());
  return s;
}

SchedulerState decide_joint(const JointMN& p, const SchedulerState& before, SchedulerState s,
                            Trigger trigger) {
  const bool update_reached = p.m.reached(s.n_u);
  const bool query_reached = p.n.reached(s.n_q);
  s.emptying = false;
  if (update_reached && query_reached) {
    if (is_arrival(trigger)) {
      s.position = serving(trigger_class(trigger));
    } else {
      // No new arrival: stay where we are (both queues are non-empty here).
      s.position = before.position;
    }
    return s;
  }
  if (update_reached) {
    s.position = ServerPosition::ServingUpdate;
    return s;
  }
  if (query_reached) {
    s.position = ServerPosition::ServingQuery;
    return s;
  }
  const auto current = served_class(before.position);
  s.position = fallback(s, current.value_or(trigger_class(trigger)));
  return s;
}

SchedulerState decide_fcfs(const SchedulerState& before, SchedulerState s, Trigger trigger,
                           std::optional<JobClass> head) {
  s.emptying = false;  // no commitments without preemption
  if (is_arrival(trigger)) {
    if (before.position == ServerPosition::Idle) s.position = serving(trigger_class(trigger));
    return s;
  }
  if (s.n_q == 0 && s.n_u == 0) {
    s.position = ServerPosition::Idle;
  } else if (s.n_q == 0) {
    s.position = ServerPosition::ServingUpdate;
  } else if (s.n_u == 0) {
    s.position = ServerPosition::ServingQuery;
  } else if (head && count(s, *head) > 0) {
    s.position = serving(*head);
  } else {
    throw Error(ErrorCode::InconsistentTrigger,
                "FCFS departure with both queues non-empty needs the head-of-line class");
  }
  return s;
}

}  // namespace

SchedulerState initial_state() noexcept { return SchedulerState{}; }

bool is_consistent(const SchedulerState& s) noexcept {
  switch (s.position) {
    case ServerPosition::Idle: return s.n_q == 0 && s.n_u == 0 && !s.emptying;
    case ServerPosition::ServingQuery: return s.n_q >= 1;
    case ServerPosition::ServingUpdate: return s.n_u >= 1;
  }
  return false;
}

SchedulerState decide(const PolicySpec& policy, const SchedulerState& state, Trigger trigger,
                      std::optional<JobClass> fcfs_head) {
  const SchedulerState after = apply_trigger(state, trigger);
  return std::visit(
      [&](const auto& p) -> SchedulerState {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Fcfs>) {
          return decide_fcfs(state, after, trigger, fcfs_head);
        } else if constexpr (std::is_same_v<T, QueryK>) {
          return decide_single(JobClass::Query, p.k, state, after, trigger);
        } else if constexpr (std::is_same_v<T, UpdateK>) {
          return decide_single(JobClass::Update, p.k, state, after, trigger);
        } else {
          return decide_joint(p, state, after, trigger);
        }
      },
      policy.variant());
}

std::vector<std::size_t> equivalent_fcfs_order(std::span<const JobRecord> jobs) {
  std::vector<std::size_t> order(jobs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ja = jobs[a];
    const auto& jb = jobs[b];
    if (ja.arrival_time != jb.arrival_time) return ja.arrival_time < jb.arrival_time;
    return ja.job_class == JobClass::Update && jb.job_class == JobClass::Query;
  });
  return order;
}

SchedulerState swap_classes(const SchedulerState& s) noexcept {
  SchedulerState out = s;
  out.n_q = s.n_u;
  out.n_u = s.n_q;
  if (s.position == ServerPosition::ServingQuery) out.position = ServerPosition::ServingUpdate;
  else if (s.position == ServerPosition::ServingUpdate) out.position = ServerPosition::ServingQuery;
  return out;
}

Trigger swap_classes(Trigger t) noexcept {
  switch (t) {
    case Trigger::ArrivalUpdate: return Trigger::ArrivalQuery;
    case Trigger::ArrivalQuery: return Trigger::ArrivalUpdate;
    case Trigger::DepartureUpdate: return Trigger::DepartureQuery;
    case Trigger::DepartureQuery: return Trigger::DepartureUpdate;
  }
  return t;
}

}  // namespace freshsched
