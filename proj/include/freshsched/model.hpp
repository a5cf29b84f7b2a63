#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace freshsched {

enum class JobClass : std::uint8_t { Update, Query };

constexpr JobClass other(JobClass c) noexcept {
  return c == JobClass::Update ? JobClass::Query : JobClass::Update;
}

std::string_view to_string(JobClass c);

/// Arrival and service rates of the two job classes. Loads are derived on
/// demand from the four rates and never stored.
class ModelParams {
 public:
  /// Throws Error{NonPositiveRate} or Error{NonFiniteRate}.
  static ModelParams validate(double lambda_u, double mu_u, double lambda_q, double mu_q);

  double lambda_u() const noexcept { return lambda_u_; }
  double mu_u() const noexcept { return mu_u_; }
  double lambda_q() const noexcept { return lambda_q_; }
  double mu_q() const noexcept { return mu_q_; }

  double rho_u() const noexcept { return lambda_u_ / mu_u_; }
  double rho_q() const noexcept { return lambda_q_ / mu_q_; }
  double rho() const noexcept { return rho_u() + rho_q(); }

  double arrival_rate(JobClass c) const noexcept {
    return c == JobClass::Update ? lambda_u_ : lambda_q_;
  }
  double service_rate(JobClass c) const noexcept {
    return c == JobClass::Update ? mu_u_ : mu_q_;
  }
  double load(JobClass c) const noexcept { return arrival_rate(c) / service_rate(c); }

  /// Same system with the roles of updates and queries exchanged.
  ModelParams swapped() const noexcept { return {lambda_q_, mu_q_, lambda_u_, mu_u_}; }

  bool operator==(const ModelParams&) const = default;

 private:
  ModelParams(double lu, double mu, double lq, double mq) noexcept
      : lambda_u_(lu), mu_u_(mu), lambda_q_(lq), mu_q_(mq) {}

  double lambda_u_;
  double mu_u_;
  double lambda_q_;
  double mu_q_;
};

ModelParams validate_params(double lambda_u, double mu_u, double lambda_q, double mu_q);

/// Throws Error{Unstable} when rho >= 1.
void stability_guard(const ModelParams& params);

/// Switching threshold: a positive count or explicitly unbounded.
class Threshold {
 public:
  /// Throws Error{InvalidPolicy} for k < 1.
  static Threshold finite(std::int64_t k);
  static Threshold unbounded() noexcept { return Threshold{}; }
  /// Accepts a positive integer or "inf".
  static Threshold parse(std::string_view text);

  bool is_unbounded() const noexcept { return !value_.has_value(); }
  /// Precondition: !is_unbounded().
  std::uint32_t value() const { return value_.value(); }
  bool reached(std::uint32_t length) const noexcept {
    return value_.has_value() && length >= *value_;
  }
  std::string to_string() const;

  bool operator==(const Threshold&) const = default;

 private:
  Threshold() = default;
  explicit Threshold(std::uint32_t k) : value_(k) {}

  std::optional<std::uint32_t> value_;
};

struct Fcfs {
  bool operator==(const Fcfs&) const = default;
};
struct QueryK {
  Threshold k;
  bool operator==(const QueryK&) const = default;
};
struct UpdateK {
  Threshold k;
  bool operator==(const UpdateK&) const = default;
};
/// m thresholds the update queue, n the query queue.
struct JointMN {
  Threshold m;
  Threshold n;
  bool operator==(const JointMN&) const = default;
};

class PolicySpec {
 public:
  using Variant = std::variant<Fcfs, QueryK, UpdateK, JointMN>;

  static PolicySpec fcfs() { return PolicySpec{Fcfs{}}; }
  static PolicySpec query_k(Threshold k) { return PolicySpec{QueryK{k}}; }
  static PolicySpec update_k(Threshold k) { return PolicySpec{UpdateK{k}}; }
  /// Throws Error{InvalidPolicy} when both thresholds are unbounded.
  static PolicySpec joint(Threshold m, Threshold n);

  /// Parses "fcfs", "query-3", "update-inf", "joint-3-5".
  static PolicySpec parse(std::string_view text);

  const Variant& variant() const noexcept { return v_; }

  /// Family name used in CSV output: fcfs, query-k, update-k, joint.
  std::string family() const;
  /// Full label, e.g. "query-3" or "joint-1-inf".
  std::string label() const;

  /// The single threshold of a Query-k / Update-k policy, if any.
  std::optional<Threshold> single_threshold() const;

  /// Policy with the classes exchanged (Query-k <-> Update-k, Joint(M,N) -> Joint(N,M)).
  PolicySpec mirrored() const;

  bool operator==(const PolicySpec&) const = default;

 private:
  explicit PolicySpec(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

struct JobRecord {
  JobClass job_class = JobClass::Update;
  double arrival_time = 0.0;
  double service_requirement = 0.0;
  std::optional<double> completion_time;

  std::optional<double> system_time() const {
    if (!completion_time) return std::nullopt;
    return *completion_time - arrival_time;
  }
};

/// Per-replication estimates. A metric is nullopt ("n/a") when its sample set
/// in the measurement window is empty.
struct ReplicationMetrics {
  std::optional<double> mean_response_time;
  std::optional<double> mean_update_system_time;
  std::optional<double> mean_paoi;
  std::optional<double> mean_aoi;
  std::optional<double> mean_nq;
  std::optional<double> mean_nu;

  std::uint64_t completed_queries = 0;
  std::uint64_t completed_updates = 0;
  std::uint64_t arrived_queries = 0;
  std::uint64_t arrived_updates = 0;
  double window = 0.0;  // horizon - warmup

  // Work accounting over [0, horizon].
  double busy_time = 0.0;
  double completed_work = 0.0;
  double partial_work = 0.0;  // service already received by jobs still in system
};

}  // namespace freshsched
