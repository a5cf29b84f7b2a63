#include "freshsched/analytic.hpp"

#include <cmath>
#include <sstream>

#include "freshsched/ctmc.hpp"
#include "freshsched/error.hpp"

namespace freshsched {

namespace {

ClosedFormResult make_result(const PolicySpec& policy, const ModelParams& params,
                             double response_time, double update_system_time) {
  ClosedFormResult r{policy, params, 0.0, 0.0, 0.0, 0.0, 0.0, std::nullopt};
  r.expected_response_time = response_time;
  r.expected_update_system_time = update_system_time;
  r.expected_paoi = paoi_from_update_system_time(params, update_system_time);
  r.expected_nq = params.lambda_q() * response_time;
  r.expected_nu = params.lambda_u() * update_system_time;
  return r;
}

}  // namespace

ClosedFormResult fcfs_metrics(const ModelParams& p) {
  stability_guard(p);
  const double idle = 1.0 - p.rho();
  const double response = (p.rho_u() / p.mu_u() + (1.0 - p.rho_u()) / p.mu_q()) / idle;
  const double update = (p.rho_q() / p.mu_q() + (1.0 - p.rho_q()) / p.mu_u()) / idle;
  return make_result(PolicySpec::fcfs(), p, response, update);
}

double priority_system_time(const ModelParams& p, PriorityOrder order, int class_index) {
  if (class_index != 1 && class_index != 2) {
    throw Error(ErrorCode::ValidationError, "two-class priority model: class index must be 1 or 2");
  }
  const JobClass first = order == PriorityOrder::QueriesFirst ? JobClass::Query : JobClass::Update;
  const JobClass classes[2] = {first, other(first)};

  double load_above = 0.0;  // classes strictly above n
  for (int i = 0; i < class_index - 1; ++i) load_above += p.load(classes[i]);
  double load_through = 0.0;  // classes 1..n
  double residual_work = 0.0;  // sum rho_i E[S_i^2] / (2 E[S_i]) = sum rho_i / mu_i
  for (int i = 0; i < class_index; ++i) {
    load_through += p.load(classes[i]);
    residual_work += p.load(classes[i]) / p.service_rate(classes[i]);
  }
  if (!(load_through < 1.0)) {
    std::ostringstream msg;
    msg << "priority class " << class_index << " unstable: cumulative load " << load_through;
    throw Error(ErrorCode::Unstable, msg.str());
  }
  const JobClass target = classes[class_index - 1];
  return (1.0 / p.service_rate(target)) / (1.0 - load_above) +
         residual_work / ((1.0 - load_above) * (1.0 - load_through));
}

ClosedFormResult query1_metrics(const ModelParams& p) {
  stability_guard(p);
  return make_result(PolicySpec::query_k(Threshold::finite(1)), p,
                     priority_system_time(p, PriorityOrder::QueriesFirst, 1),
                     priority_system_time(p, PriorityOrder::QueriesFirst, 2));
}

ClosedFormResult update1_metrics(const ModelParams& p) {
  stability_guard(p);
  return make_result(PolicySpec::update_k(Threshold::finite(1)), p,
                     priority_system_time(p, PriorityOrder::UpdatesFirst, 2),
                     priority_system_time(p, PriorityOrder::UpdatesFirst, 1));
}

double conservation_rhs(const ModelParams& p) {
  stability_guard(p);
  const double weighted = p.lambda_q() / (p.mu_q() * p.mu_q()) + p.lambda_u() / (p.mu_u() * p.mu_u());
  return weighted / (1.0 - p.rho());
}

double paoi_from_update_system_time(const ModelParams& p, double expected_update_system_time) {
  return 1.0 / p.lambda_u() + expected_update_system_time;
}

namespace {

// Conservation-law gap allowed between the derived and the direct occupancy.
double consistency_tolerance(const CtmcSolution& s, double scale) {
  return std::max(1e-6 * std::max(1.0, scale), 10.0 * (s.tail_mass() + s.residual) * scale);
}

CtmcDiagnostics diagnostics_of(const CtmcSolution& s, const QueueMoments& m) {
  CtmcDiagnostics d;
  d.bounds = s.bounds;
  d.states = s.states.size();
  d.tail_mass = s.tail_mass();
  d.residual = s.residual;
  d.nq_direct = m.nq;
  d.nu_direct = m.nu;
  return d;
}

}  // namespace

ClosedFormResult query_k_metrics(const ModelParams& p, std::uint32_t k,
                                 const TruncationPolicy& truncation) {
  stability_guard(p);
  const PolicySpec policy = PolicySpec::query_k(Threshold::finite(k));
  const CtmcSolution solution = solve_with_truncation(p, policy, truncation);
  const QueueMoments moments = expected_queue_lengths(solution);

  const double nq = moments.nq;
  const double nu = p.mu_u() * (conservation_rhs(p) - nq / p.mu_q());
  ClosedFormResult r = make_result(policy, p, nq / p.lambda_q(), nu / p.lambda_u());
  auto d = diagnostics_of(solution, moments);
  d.conservation_gap = std::abs(nu - moments.nu);
  d.consistent = d.conservation_gap <= consistency_tolerance(solution, std::max(nu, 1.0));
  r.ctmc = d;
  return r;
}

ClosedFormResult update_k_metrics(const ModelParams& p, std::uint32_t k,
                                  const TruncationPolicy& truncation) {
  stability_guard(p);
  const PolicySpec policy = PolicySpec::update_k(Threshold::finite(k));
  const CtmcSolution solution = solve_with_truncation(p, policy, truncation);
  const QueueMoments moments = expected_queue_lengths(solution);

  const double nu = moments.nu;
  const double nq = p.mu_q() * (conservation_rhs(p) - nu / p.mu_u());
  ClosedFormResult r = make_result(policy, p, nq / p.lambda_q(), nu / p.lambda_u());
  auto d = diagnostics_of(solution, moments);
  d.conservation_gap = std::abs(nq - moments.nq);
  d.consistent = d.conservation_gap <= consistency_tolerance(solution, std::max(nq, 1.0));
  r.ctmc = d;
  return r;
}

}  // namespace freshsched
