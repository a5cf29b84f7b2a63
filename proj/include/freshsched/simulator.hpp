#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "freshsched/model.hpp"
#include "freshsched/policy.hpp"

namespace freshsched {

struct SimConfig {
  double horizon = 20000.0;
  double warmup = 0.0;
  std::uint32_t replications = 10;
  std::uint64_t base_seed = 20190501;

  /// Throws Error{ValidationError}. A zero-length window (horizon == warmup)
  /// is allowed and yields n/a metrics.
  void validate() const;
};

/// One pseudo-random stream. Uniform draws lie strictly inside (0, 1).
class RngStream {
 public:
  RngStream(std::uint64_t base_seed, std::uint32_t rep_index, std::uint32_t stream_id);

  double uniform_open();

 private:
  std::mt19937_64 engine_;
};

/// Inverse-transform exponential: -ln(u) / rate.
double exponential_from_uniform(double rate, double u);
double sample_exponential(double rate, RngStream& stream);

enum class StreamId : std::uint32_t { UpdateArrivals = 0, QueryArrivals, UpdateServices, QueryServices };

/// Age-of-information bookkeeping over the measurement window (window_start, now].
///
/// Before the first delivery the age grows from zero at t = 0, and a phantom
/// update generated at t = 0 stands in for the predecessor of the first one.
class AoiTracker {
 public:
  explicit AoiTracker(double window_start = 0.0) : window_start_(window_start) {}

  /// Integrates the age up to `now`.
  void advance(double now);

  /// Records delivery of an update generated at `generation_time`. Appends the
  /// peak-age sample (X + T) when `now` lies inside the window.
  /// Throws Error{OutOfOrderDeparture} if updates are delivered out of generation order.
  void record_update_departure(double generation_time, double now);

  double freshest_delivered_generation() const noexcept { return freshest_generation_; }
  double previous_update_arrival() const noexcept { return previous_arrival_; }
  double last_event_time() const noexcept { return last_event_time_; }
  double age_integral() const noexcept { return age_integral_; }
  double current_age() const noexcept { return last_event_time_ - freshest_generation_; }
  const std::vector<double>& paoi_samples() const noexcept { return paoi_samples_; }

 private:
  double window_start_;
  double freshest_generation_ = 0.0;
  double previous_arrival_ = 0.0;
  double last_event_time_ = 0.0;
  double age_integral_ = 0.0;
  std::vector<double> paoi_samples_;
};

/// Pending events of the single-server system: the next arrival of each class
/// and at most one service completion.
class EventQueue {
 public:
  enum class Kind : std::uint8_t { DepartureUpdate, DepartureQuery, ArrivalUpdate, ArrivalQuery };

  struct Event {
    double time;
    Kind kind;
  };

  void set_arrival(JobClass c, double time);
  void set_completion(JobClass c, double time);
  void clear_completion() noexcept { completion_.reset(); }

  /// Earliest pending event. Simultaneous events resolve as departures before
  /// arrivals and updates before queries.
  Event next() const;

 private:
  std::array<double, 2> arrivals_{};  // indexed by JobClass
  std::optional<Event> completion_;
};

Trigger to_trigger(EventQueue::Kind kind) noexcept;

struct UpdateTraceRecord {
  double arrival = 0.0;
  double previous_arrival = 0.0;
  double completion = 0.0;
  double paoi = 0.0;  // the tracker's sample, or NaN outside the window
};

/// Optional per-job trace filled by run_replication for verification.
struct SimTrace {
  std::vector<UpdateTraceRecord> updates;
  std::vector<JobRecord> jobs;  // every job that arrived; completion unset if still in system
  std::uint64_t preemptions = 0;
};

ReplicationMetrics run_replication(const ModelParams& params, const PolicySpec& policy,
                                   const SimConfig& config, std::uint32_t rep_index,
                                   SimTrace* trace = nullptr);

/// Turns window sums into per-replication means.
struct WindowSums {
  double query_time_sum = 0.0;
  double update_time_sum = 0.0;
  std::uint64_t completed_queries = 0;
  std::uint64_t completed_updates = 0;
  std::uint64_t arrived_queries = 0;
  std::uint64_t arrived_updates = 0;
  double nq_integral = 0.0;
  double nu_integral = 0.0;
};

ReplicationMetrics finalize_metrics(const AoiTracker& tracker, const WindowSums& sums,
                                    double horizon, double warmup);

struct SummaryStats {
  std::optional<double> mean;
  std::optional<double> stddev;       // n >= 2
  std::optional<double> half_width;   // 1.96 s / sqrt(n), n >= 2
  std::uint32_t count = 0;
};

SummaryStats summarize(std::span<const double> values);

enum class Metric : std::uint8_t { ResponseTime, Paoi, Aoi, Nq, Nu, UpdateSystemTime };

std::optional<double> metric_value(const ReplicationMetrics& m, Metric metric);

struct AggregateStats {
  SummaryStats response_time;
  SummaryStats paoi;
  SummaryStats aoi;
  SummaryStats nq;
  SummaryStats nu;
  SummaryStats update_system_time;

  const SummaryStats& get(Metric metric) const;
};

/// Per-metric summary over replications; runs where a metric is n/a are skipped.
AggregateStats aggregate(std::span<const ReplicationMetrics> runs);

/// Runs every replication of `config`; results are ordered by replication index.
std::vector<ReplicationMetrics> run_replications(const ModelParams& params,
                                                 const PolicySpec& policy,
                                                 const SimConfig& config,
                                                 unsigned workers = 0);

struct LittleResiduals {
  double query = 0.0;
  double update = 0.0;
  bool reliable = true;  // false for rho >= 1
};

/// Relative gap between the time-average occupancy and (arrival rate x mean
/// system time), using the arrival rate observed in the measurement window.
LittleResiduals littles_law_residual(const ReplicationMetrics& metrics, const ModelParams& params);

}  // namespace freshsched
