#include "freshsched/ctmc.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "freshsched/error.hpp"

namespace freshsched {

namespace {

std::vector<char> reachable(std::size_t n, const std::vector<std::vector<std::size_t>>& adjacency,
                            std::size_t start) {
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> stack{start};
  seen[start] = 1;
  while (!stack.empty()) {
    const std::size_t s = stack.back();
    stack.pop_back();
    for (std::size_t t : adjacency[s]) {
      if (!seen[t]) {
        seen[t] = 1;
        stack.push_back(t);
      }
    }
  }
  return seen;
}

}  // namespace

StationaryResult solve_stationary(const RateMatrix& rates, double residual_tolerance) {
  const std::size_t n = rates.size;
  if (n == 0) throw Error(ErrorCode::ValidationError, "empty state space");
  if (n == 1) return StationaryResult{{1.0}, 0.0};

  std::vector<double> out_rate(n, 0.0);
  std::vector<std::vector<std::size_t>> forward(n), backward(n);
  for (const auto& t : rates.transitions) {
    if (t.from >= n || t.to >= n || !(t.rate >= 0.0) || !std::isfinite(t.rate)) {
      throw Error(ErrorCode::ValidationError, "malformed transition");
    }
    if (t.from == t.to || t.rate == 0.0) continue;
    out_rate[t.from] += t.rate;
    forward[t.from].push_back(t.to);
    backward[t.to].push_back(t.from);
  }
  const auto fwd = reachable(n, forward, 0);
  const auto bwd = reachable(n, backward, 0);
  for (std::size_t s = 0; s < n; ++s) {
    if (!fwd[s] || !bwd[s]) {
      throw Error(ErrorCode::Reducible, "chain is not irreducible (state " + std::to_string(s) +
                                            " is not strongly connected to state 0)");
    }
  }

  // Fix pi_0 = 1 and solve the balance equations of the remaining states.
  const auto m = static_cast<Eigen::Index>(n - 1);
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(rates.transitions.size() + n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  for (const auto& t : rates.transitions) {
    if (t.from == t.to || t.rate == 0.0 || t.to == 0) continue;
    const auto row = static_cast<Eigen::Index>(t.to - 1);
    if (t.from == 0) {
      rhs[row] -= t.rate;
    } else {
      entries.emplace_back(row, static_cast<Eigen::Index>(t.from - 1), t.rate);
    }
  }
  for (std::size_t s = 1; s < n; ++s) {
    const auto i = static_cast<Eigen::Index>(s - 1);
    entries.emplace_back(i, i, -out_rate[s]);
  }
  Eigen::SparseMatrix<double> a(m, m);
  a.setFromTriplets(entries.begin(), entries.end());
  a.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) {
    throw Error(ErrorCode::NoConvergence, "sparse factorization failed: " + lu.lastErrorMessage());
  }

  const auto balance_residual = [&](const std::vector<double>& pi) {
    std::vector<double> flow(n, 0.0);
    for (const auto& t : rates.transitions) {
      if (t.from != t.to) flow[t.to] += pi[t.from] * t.rate;
    }
    double worst = 0.0;
    for (std::size_t s = 0; s < n; ++s) worst = std::max(worst, std::abs(flow[s] - pi[s] * out_rate[s]));
    return worst;
  };

  Eigen::VectorXd x = lu.solve(rhs);
  StationaryResult result;
  result.probability.assign(n, 0.0);
  constexpr int kMaxRefinements = 8;
  for (int round = 0;; ++round) {
    double total = 1.0;
    for (Eigen::Index i = 0; i < m; ++i) total += std::max(0.0, x[i]);
    result.probability[0] = 1.0 / total;
    for (Eigen::Index i = 0; i < m; ++i) {
      result.probability[static_cast<std::size_t>(i) + 1] = std::max(0.0, x[i]) / total;
    }
    result.residual = balance_residual(result.probability);
    if (result.residual <= residual_tolerance) break;
    if (round == kMaxRefinements) {
      std::ostringstream msg;
      msg << "balance residual " << result.residual << " above " << residual_tolerance;
      throw Error(ErrorCode::NoConvergence, msg.str());
    }
    const Eigen::VectorXd correction = lu.solve(rhs - a * x);
    x += correction;
  }
  return result;
}

void CtmcSpec::validate() const {
  const auto k = policy.single_threshold();
  if (!k || k->is_unbounded()) {
    throw Error(ErrorCode::UnsupportedEngine,
                "ctmc engine supports only query-k / update-k with a finite threshold (got " +
                    policy.label() + ")");
  }
  const bool query_side = std::holds_alternative<QueryK>(policy.variant());
  const std::uint32_t thresholded = query_side ? bounds.max_q : bounds.max_u;
  const std::uint32_t free_side = query_side ? bounds.max_u : bounds.max_q;
  if (thresholded < k->value() + 2 || free_side < 2) {
    std::ostringstream msg;
    msg << "truncation (" << bounds.max_q << ", " << bounds.max_u << ") too small for "
        << policy.label() << ": thresholded bound must be >= k + 2";
    throw Error(ErrorCode::TruncationTooSmall, msg.str());
  }
}

std::size_t CtmcModel::key(const SchedulerState& s) const {
  const std::size_t cell = static_cast<std::size_t>(s.n_q) * (spec_.bounds.max_u + 1u) + s.n_u;
  return (cell * 3 + static_cast<std::size_t>(s.position)) * 2 + (s.emptying ? 1 : 0);
}

std::optional<std::size_t> CtmcModel::index_of(const SchedulerState& s) const {
  if (s.n_q > spec_.bounds.max_q || s.n_u > spec_.bounds.max_u) return std::nullopt;
  const auto idx = lookup_[key(s)];
  if (idx < 0) return std::nullopt;
  return static_cast<std::size_t>(idx);
}

namespace {

std::vector<std::pair<SchedulerState, double>> successors(const CtmcSpec& spec,
                                                          const SchedulerState& s) {
  std::vector<std::pair<SchedulerState, double>> out;
  const auto& p = spec.params;
  if (s.n_q < spec.bounds.max_q) {
    out.emplace_back(decide(spec.policy, s, Trigger::ArrivalQuery), p.lambda_q());
  }
  if (s.n_u < spec.bounds.max_u) {
    out.emplace_back(decide(spec.policy, s, Trigger::ArrivalUpdate), p.lambda_u());
  }
  if (s.position == ServerPosition::ServingQuery) {
    out.emplace_back(decide(spec.policy, s, Trigger::DepartureQuery), p.mu_q());
  } else if (s.position == ServerPosition::ServingUpdate) {
    out.emplace_back(decide(spec.policy, s, Trigger::DepartureUpdate), p.mu_u());
  }
  return out;
}

}  // namespace

std::vector<std::pair<SchedulerState, double>> CtmcModel::transitions_from(
    const SchedulerState& s) const {
  return successors(spec_, s);
}

CtmcModel build_ctmc(const CtmcSpec& spec) {
  spec.validate();
  CtmcModel model(spec);
  const std::size_t cells = (static_cast<std::size_t>(spec.bounds.max_q) + 1) *
                            (static_cast<std::size_t>(spec.bounds.max_u) + 1);
  model.lookup_.assign(cells * 6, -1);

  const auto intern = [&](const SchedulerState& s) {
    auto& slot = model.lookup_[model.key(s)];
    if (slot < 0) {
      slot = static_cast<std::ptrdiff_t>(model.states_.size());
      model.states_.push_back(s);
    }
    return static_cast<std::size_t>(slot);
  };

  intern(initial_state());
  for (std::size_t next = 0; next < model.states_.size(); ++next) {
    const SchedulerState s = model.states_[next];
    for (const auto& [target, rate] : successors(spec, s)) {
      const std::size_t to = intern(target);
      model.rates_.transitions.push_back(RateTransition{next, to, rate});
    }
  }
  model.rates_.size = model.states_.size();
  return model;
}

double CtmcSolution::probability_of(const SchedulerState& s) const {
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] == s) return probability[i];
  }
  return 0.0;
}

double CtmcSolution::total() const {
  double sum = 0.0;
  for (double p : probability) sum += p;
  return sum;
}

CtmcSolution solve_ctmc(const CtmcModel& model, double residual_tolerance) {
  StationaryResult stationary = solve_stationary(model.rates(), residual_tolerance);
  CtmcSolution out;
  out.states = model.states();
  out.probability = std::move(stationary.probability);
  out.residual = stationary.residual;
  out.bounds = model.spec().bounds;
  for (std::size_t i = 0; i < out.states.size(); ++i) {
    const auto& s = out.states[i];
    if (s.n_q + 1 >= out.bounds.max_q) out.tail_mass_q += out.probability[i];
    if (s.n_u + 1 >= out.bounds.max_u) out.tail_mass_u += out.probability[i];
  }
  return out;
}

QueueMoments expected_queue_lengths(const CtmcSolution& solution) {
  QueueMoments m;
  for (std::size_t i = 0; i < solution.states.size(); ++i) {
    m.nq += solution.states[i].n_q * solution.probability[i];
    m.nu += solution.states[i].n_u * solution.probability[i];
  }
  return m;
}

CtmcSolution solve_with_truncation(const ModelParams& params, const PolicySpec& policy,
                                   const TruncationPolicy& truncation) {
  stability_guard(params);
  const auto k = policy.single_threshold();
  if (!k || k->is_unbounded()) {
    throw Error(ErrorCode::UnsupportedEngine,
                "ctmc engine supports only query-k / update-k with a finite threshold");
  }
  const bool query_side = std::holds_alternative<QueryK>(policy.variant());

  TruncationBounds bounds;
  if (truncation.initial_bound) {
    bounds = {*truncation.initial_bound, *truncation.initial_bound};
  } else {
    const auto start = static_cast<std::uint32_t>(
        std::max(64.0, std::ceil(8.0 / (1.0 - params.rho()))));
    bounds = {start, start};
    auto& thresholded = query_side ? bounds.max_q : bounds.max_u;
    thresholded = std::max(thresholded, k->value() + 2);
  }

  for (;;) {
    const CtmcModel model = build_ctmc(CtmcSpec{params, policy, bounds});
    CtmcSolution solution = solve_ctmc(model);
    if (!truncation.adaptive || solution.tail_mass() < truncation.tail_tolerance) return solution;

    const double half = 0.5 * truncation.tail_tolerance;
    if (solution.tail_mass_q >= half) bounds.max_q *= 2;
    if (solution.tail_mass_u >= half) bounds.max_u *= 2;
    const double cells = (bounds.max_q + 1.0) * (bounds.max_u + 1.0) * 2.0;
    if (bounds.max_q > truncation.max_bound || bounds.max_u > truncation.max_bound ||
        cells > static_cast<double>(truncation.max_states)) {
      std::ostringstream msg;
      msg << "tail mass " << solution.tail_mass() << " still above " << truncation.tail_tolerance
          << " at truncation (" << solution.bounds.max_q << ", " << solution.bounds.max_u << ")";
      throw Error(ErrorCode::TruncationTooSmall, msg.str());
    }
  }
}

}  // namespace freshsched
