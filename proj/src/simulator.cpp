#include "freshsched/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "freshsched/error.hpp"

namespace freshsched {

void SimConfig::validate() const {
  if (!std::isfinite(horizon) || !std::isfinite(warmup) || warmup < 0.0 || horizon < warmup) {
    throw Error(ErrorCode::ValidationError, "simulation needs horizon >= warmup >= 0");
  }
  if (replications < 1) {
    throw Error(ErrorCode::ValidationError, "simulation needs at least one replication");
  }
}

RngStream::RngStream(std::uint64_t base_seed, std::uint32_t rep_index, std::uint32_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(base_seed & 0xffffffffu),
                    static_cast<std::uint32_t>(base_seed >> 32), rep_index, stream_id};
  engine_.seed(seq);
}

double RngStream::uniform_open() {
  // 53 random bits mapped to the midpoints of a uniform grid: never 0 or 1.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double exponential_from_uniform(double rate, double u) { return -std::log(u) / rate; }

double sample_exponential(double rate, RngStream& stream) {
  return exponential_from_uniform(rate, stream.uniform_open());
}

void AoiTracker::advance(double now) {
  const double from = std::max(last_event_time_, window_start_);
  if (now > from) {
    const double age_from = from - freshest_generation_;
    const double age_to = now - freshest_generation_;
    age_integral_ += (now - from) * 0.5 * (age_from + age_to);
  }
  last_event_time_ = std::max(last_event_time_, now);
}

void AoiTracker::record_update_departure(double generation_time, double now) {
  if (generation_time < freshest_generation_ || generation_time > now) {
    throw Error(ErrorCode::OutOfOrderDeparture, "update delivered out of generation order");
  }
  advance(now);
  const double inter_arrival = generation_time - previous_arrival_;
  const double system_time = now - generation_time;
  if (now > window_start_) paoi_samples_.push_back(inter_arrival + system_time);
  freshest_generation_ = generation_time;
  previous_arrival_ = generation_time;
}

void EventQueue::set_arrival(JobClass c, double time) {
  arrivals_[static_cast<std::size_t>(c)] = time;
}

void EventQueue::set_completion(JobClass c, double time) {
  completion_ = Event{time, c == JobClass::Update ? Kind::DepartureUpdate : Kind::DepartureQuery};
}

EventQueue::Event EventQueue::next() const {
  Event best{arrivals_[static_cast<std::size_t>(JobClass::Update)], Kind::ArrivalUpdate};
  const Event query{arrivals_[static_cast<std::size_t>(JobClass::Query)], Kind::ArrivalQuery};
  if (query.time < best.time) best = query;
  if (completion_ && completion_->time <= best.time) best = *completion_;
  return best;
}

Trigger to_trigger(EventQueue::Kind kind) noexcept {
  switch (kind) {
    case EventQueue::Kind::DepartureUpdate: return Trigger::DepartureUpdate;
    case EventQueue::Kind::DepartureQuery: return Trigger::DepartureQuery;
    case EventQueue::Kind::ArrivalUpdate: return Trigger::ArrivalUpdate;
    case EventQueue::Kind::ArrivalQuery: return Trigger::ArrivalQuery;
  }
  return Trigger::ArrivalUpdate;
}

namespace {

struct Job {
  double arrival;
  double requirement;
  double remaining;
  std::size_t trace_index;
};

std::size_t index(JobClass c) { return static_cast<std::size_t>(c); }

}  // namespace

ReplicationMetrics run_replication(const ModelParams& params, const PolicySpec& policy,
                                   const SimConfig& config, std::uint32_t rep_index,
                                   SimTrace* trace) {
  config.validate();
  const auto stream = [&](StreamId id) {
    return RngStream(config.base_seed, rep_index, static_cast<std::uint32_t>(id));
  };
  std::array<RngStream, 2> arrival_streams{stream(StreamId::UpdateArrivals),
                                           stream(StreamId::QueryArrivals)};
  std::array<RngStream, 2> service_streams{stream(StreamId::UpdateServices),
                                           stream(StreamId::QueryServices)};

  std::array<std::deque<Job>, 2> queues;
  EventQueue events;
  for (JobClass c : {JobClass::Update, JobClass::Query}) {
    events.set_arrival(c, sample_exponential(params.arrival_rate(c), arrival_streams[index(c)]));
  }

  SchedulerState state = initial_state();
  AoiTracker tracker(config.warmup);
  WindowSums sums;
  double service_start = 0.0;
  double last_time = 0.0;
  double busy_time = 0.0;
  double completed_work = 0.0;

  const auto integrate_to = [&](double t) {
    const double from = std::max(last_time, config.warmup);
    if (t > from) {
      sums.nq_integral += static_cast<double>(state.n_q) * (t - from);
      sums.nu_integral += static_cast<double>(state.n_u) * (t - from);
    }
    if (state.position != ServerPosition::Idle) busy_time += t - last_time;
    tracker.advance(t);
    last_time = t;
  };

  for (;;) {
    const auto event = events.next();
    if (event.time > config.horizon) break;
    const double now = event.time;
    integrate_to(now);

    const Trigger trigger = to_trigger(event.kind);
    const JobClass c = trigger_class(trigger);
    auto& queue = queues[index(c)];
    const bool in_window = now > config.warmup;

    if (is_arrival(trigger)) {
      const double requirement =
          sample_exponential(params.service_rate(c), service_streams[index(c)]);
      std::size_t trace_index = 0;
      if (trace) {
        trace_index = trace->jobs.size();
        trace->jobs.push_back(JobRecord{c, now, requirement, std::nullopt});
      }
      queue.push_back(Job{now, requirement, requirement, trace_index});
      if (in_window) ++(c == JobClass::Update ? sums.arrived_updates : sums.arrived_queries);
      events.set_arrival(c, now + sample_exponential(params.arrival_rate(c), arrival_streams[index(c)]));
    } else {
      const Job done = queue.front();
      queue.pop_front();
      completed_work += done.requirement;
      const double system_time = now - done.arrival;
      if (trace) trace->jobs[done.trace_index].completion_time = now;
      if (c == JobClass::Update) {
        const double previous_arrival = tracker.previous_update_arrival();
        const auto samples_before = tracker.paoi_samples().size();
        tracker.record_update_departure(done.arrival, now);
        if (trace) {
          const bool sampled = tracker.paoi_samples().size() > samples_before;
          trace->updates.push_back(UpdateTraceRecord{
              done.arrival, previous_arrival, now,
              sampled ? tracker.paoi_samples().back() : std::numeric_limits<double>::quiet_NaN()});
        }
        if (in_window) {
          sums.update_time_sum += system_time;
          ++sums.completed_updates;
        }
      } else if (in_window) {
        sums.query_time_sum += system_time;
        ++sums.completed_queries;
      }
    }

    std::optional<JobClass> head;
    if (!is_arrival(trigger)) {
      const auto& uq = queues[index(JobClass::Update)];
      const auto& qq = queues[index(JobClass::Query)];
      if (!uq.empty() && !qq.empty()) {
        head = qq.front().arrival < uq.front().arrival ? JobClass::Query : JobClass::Update;
      }
    }

    const ServerPosition before = state.position;
    state = decide(policy, state, trigger, head);

    if (is_arrival(trigger)) {
      if (state.position != before) {
        if (const auto preempted = served_class(before)) {
          auto& job = queues[index(*preempted)].front();
          job.remaining = std::max(0.0, job.remaining - (now - service_start));
          if (trace) ++trace->preemptions;
        }
        service_start = now;
      }
    } else {
      service_start = now;
    }

    if (const auto current = served_class(state.position)) {
      events.set_completion(*current, service_start + queues[index(*current)].front().remaining);
    } else {
      events.clear_completion();
    }
  }
  integrate_to(config.horizon);

  ReplicationMetrics metrics = finalize_metrics(tracker, sums, config.horizon, config.warmup);
  metrics.busy_time = busy_time;
  metrics.completed_work = completed_work;
  double partial = 0.0;
  for (const auto& q : queues) {
    for (const auto& job : q) partial += job.requirement - job.remaining;
  }
  if (state.position != ServerPosition::Idle) partial += config.horizon - service_start;
  metrics.partial_work = partial;
  return metrics;
}

ReplicationMetrics finalize_metrics(const AoiTracker& tracker, const WindowSums& sums,
                                    double horizon, double warmup) {
  ReplicationMetrics m;
  m.window = horizon - warmup;
  m.completed_queries = sums.completed_queries;
  m.completed_updates = sums.completed_updates;
  m.arrived_queries = sums.arrived_queries;
  m.arrived_updates = sums.arrived_updates;
  if (sums.completed_queries > 0) {
    m.mean_response_time = sums.query_time_sum / static_cast<double>(sums.completed_queries);
  }
  if (sums.completed_updates > 0) {
    m.mean_update_system_time = sums.update_time_sum / static_cast<double>(sums.completed_updates);
  }
  const auto& samples = tracker.paoi_samples();
  if (!samples.empty()) {
    double total = 0.0;
    for (double a : samples) total += a;
    m.mean_paoi = total / static_cast<double>(samples.size());
  }
  if (m.window > 0.0) {
    m.mean_aoi = tracker.age_integral() / m.window;
    m.mean_nq = sums.nq_integral / m.window;
    m.mean_nu = sums.nu_integral / m.window;
  }
  return m;
}

SummaryStats summarize(std::span<const double> values) {
  SummaryStats s;
  s.count = static_cast<std::uint32_t>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double n = static_cast<double>(values.size());
  const double mean = sum / n;
  s.mean = mean;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    s.stddev = sd;
    s.half_width = 1.96 * sd / std::sqrt(n);
  }
  return s;
}

std::optional<double> metric_value(const ReplicationMetrics& m, Metric metric) {
  switch (metric) {
    case Metric::ResponseTime: return m.mean_response_time;
    case Metric::Paoi: return m.mean_paoi;
    case Metric::Aoi: return m.mean_aoi;
    case Metric::Nq: return m.mean_nq;
    case Metric::Nu: return m.mean_nu;
    case Metric::UpdateSystemTime: return m.mean_update_system_time;
  }
  return std::nullopt;
}

const SummaryStats& AggregateStats::get(Metric metric) const {
  switch (metric) {
    case Metric::ResponseTime: return response_time;
    case Metric::Paoi: return paoi;
    case Metric::Aoi: return aoi;
    case Metric::Nq: return nq;
    case Metric::Nu: return nu;
    case Metric::UpdateSystemTime: return update_system_time;
  }
  return response_time;
}

AggregateStats aggregate(std::span<const ReplicationMetrics> runs) {
  const auto summary_of = [&](Metric metric) {
    std::vector<double> values;
    values.reserve(runs.size());
    for (const auto& r : runs) {
      if (auto v = metric_value(r, metric)) values.push_back(*v);
    }
    return summarize(values);
  };
  AggregateStats out;
  out.response_time = summary_of(Metric::ResponseTime);
  out.paoi = summary_of(Metric::Paoi);
  out.aoi = summary_of(Metric::Aoi);
  out.nq = summary_of(Metric::Nq);
  out.nu = summary_of(Metric::Nu);
  out.update_system_time = summary_of(Metric::UpdateSystemTime);
  return out;
}

std::vector<ReplicationMetrics> run_replications(const ModelParams& params,
                                                 const PolicySpec& policy,
                                                 const SimConfig& config, unsigned workers) {
  config.validate();
  std::vector<ReplicationMetrics> results(config.replications);
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, config.replications);
  if (workers <= 1) {
    for (std::uint32_t r = 0; r < config.replications; ++r) {
      results[r] = run_replication(params, policy, config, r);
    }
    return results;
  }

  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::uint32_t r = w; r < config.replications; r += workers) {
        try {
          results[r] = run_replication(params, policy, config, r);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  pool.clear();  // join
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

LittleResiduals littles_law_residual(const ReplicationMetrics& metrics, const ModelParams& params) {
  const auto residual = [&](std::uint64_t arrived, std::optional<double> occupancy,
                            std::optional<double> system_time) {
    if (arrived == 0 || !occupancy || !system_time || *occupancy <= 0.0 || metrics.window <= 0.0) {
      return 0.0;
    }
    const double rate = static_cast<double>(arrived) / metrics.window;
    return std::abs(*occupancy - rate * *system_time) / *occupancy;
  };
  LittleResiduals out;
  out.query = residual(metrics.arrived_queries, metrics.mean_nq, metrics.mean_response_time);
  out.update = residual(metrics.arrived_updates, metrics.mean_nu, metrics.mean_update_system_time);
  out.reliable = params.rho() < 1.0;
  return out;
}

}  // namespace freshsched
