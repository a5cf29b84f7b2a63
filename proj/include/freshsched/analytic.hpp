#pragma once

#include <cstdint>
#include <optional>

#include "freshsched/model.hpp"

namespace freshsched {

struct TruncationBounds {
  std::uint32_t max_q = 0;
  std::uint32_t max_u = 0;
  bool operator==(const TruncationBounds&) const = default;
};

/// Numerical provenance of a CTMC-backed result.
struct CtmcDiagnostics {
  TruncationBounds bounds;
  std::size_t states = 0;
  double tail_mass = 0.0;
  double residual = 0.0;
  double nq_direct = 0.0;
  double nu_direct = 0.0;
  /// |derived occupancy - direct moment| for the occupancy obtained from the
  /// conservation law.
  double conservation_gap = 0.0;
  bool consistent = true;
};

/// Steady-state expectations for one policy at one operating point.
/// expected_paoi == 1/lambda_u + expected_update_system_time always holds.
struct ClosedFormResult {
  PolicySpec policy;
  ModelParams params;
  double expected_response_time = 0.0;
  double expected_update_system_time = 0.0;
  double expected_paoi = 0.0;
  double expected_nq = 0.0;  // lambda_q * E[T_q]
  double expected_nu = 0.0;  // lambda_u * E[T_u]
  std::optional<CtmcDiagnostics> ctmc;
};

/// FCFS over both classes: response time, update system time and peak age.
/// Throws Error{Unstable}.
ClosedFormResult fcfs_metrics(const ModelParams& params);

enum class PriorityOrder : std::uint8_t { QueriesFirst, UpdatesFirst };

/// Mean system time of priority class `class_index` (1 = highest) in the
/// two-class preemptive-resume priority queue with exponential service.
/// Throws Error{Unstable} when the cumulative load of classes 1..n is >= 1.
double priority_system_time(const ModelParams& params, PriorityOrder order, int class_index);

ClosedFormResult query1_metrics(const ModelParams& params);
ClosedFormResult update1_metrics(const ModelParams& params);

/// (lambda_q/mu_q^2 + lambda_u/mu_u^2) / (1 - rho): the policy-invariant
/// value of E[N_q]/mu_q + E[N_u]/mu_u.
double conservation_rhs(const ModelParams& params);

double paoi_from_update_system_time(const ModelParams& params, double expected_update_system_time);

/// How the CTMC-backed metrics choose their truncation.
struct TruncationPolicy {
  /// Starting bound per dimension; default max(64, 8/(1 - rho)).
  std::optional<std::uint32_t> initial_bound;
  /// When false the initial bound is used as-is and the tail mass only reported.
  bool adaptive = true;
  double tail_tolerance = 1e-8;
  std::uint32_t max_bound = 8192;
  std::size_t max_states = 3'000'000;
};

/// Query-k (1 <= k < inf) via the truncated CTMC. Throws Error{Unstable},
/// Error{TruncationTooSmall}, Error{NoConvergence}.
ClosedFormResult query_k_metrics(const ModelParams& params, std::uint32_t k,
                                 const TruncationPolicy& truncation = {});
ClosedFormResult update_k_metrics(const ModelParams& params, std::uint32_t k,
                                  const TruncationPolicy& truncation = {});

}  // namespace freshsched
