#include "freshsched/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <limits>

#include "freshsched/analytic.hpp"
#include "freshsched/ctmc.hpp"
#include "freshsched/error.hpp"
#include "freshsched/experiment.hpp"
#include "freshsched/simulator.hpp"

namespace freshsched {

namespace {

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

struct Options {
  std::string config;
  std::string out;
  std::string policy = "fcfs";
  std::string k = "1";
  std::string m = "inf";
  std::string n = "inf";
  double lambda_u = kUnset;
  double lambda_q = kUnset;
  double mu_u = 1.0;
  double mu_q = 1.0;
  double horizon = 20000.0;
  double warmup = 0.0;
  std::uint32_t reps = 10;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> trunc;
  unsigned workers = 0;

  // plot
  std::string csv;
  std::string x_axis = "lambda_u";
  std::vector<std::string> metrics{"response_time", "paoi"};
};

void add_point_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--lambda-u", o.lambda_u, "update arrival rate");
  cmd->add_option("--lambda-q", o.lambda_q, "query arrival rate");
  cmd->add_option("--mu-u", o.mu_u, "update service rate")->capture_default_str();
  cmd->add_option("--mu-q", o.mu_q, "query service rate")->capture_default_str();
  cmd->add_option("--policy", o.policy, "fcfs | query-k | update-k | joint (or e.g. query-3, joint-3-5)")
      ->capture_default_str();
  cmd->add_option("--k", o.k, "threshold for query-k / update-k ('inf' allowed)")->capture_default_str();
  cmd->add_option("--m", o.m, "joint: update-queue threshold")->capture_default_str();
  cmd->add_option("--n", o.n, "joint: query-queue threshold")->capture_default_str();
  cmd->add_option("--out", o.out, "write result rows as CSV to this path");
}

void add_sim_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--horizon", o.horizon, "time units per replication")->capture_default_str();
  cmd->add_option("--warmup", o.warmup, "time units excluded from measurement")->capture_default_str();
  cmd->add_option("--reps", o.reps, "replications")->capture_default_str();
  cmd->add_option("--seed", o.seed, "base seed (overrides FRESHSCHED_SEED and config)");
  cmd->add_option("--workers", o.workers, "replication threads (0 = all cores)");
}

PolicySpec policy_from(const Options& o) {
  if (o.policy == "query-k") return PolicySpec::query_k(Threshold::parse(o.k));
  if (o.policy == "update-k") return PolicySpec::update_k(Threshold::parse(o.k));
  if (o.policy == "joint") return PolicySpec::joint(Threshold::parse(o.m), Threshold::parse(o.n));
  return PolicySpec::parse(o.policy);
}

RawRates rates_from(const Options& o) {
  if (std::isnan(o.lambda_u) || std::isnan(o.lambda_q)) {
    throw Error(ErrorCode::ValidationError, "--lambda-u and --lambda-q are required");
  }
  return RawRates{o.lambda_u, o.lambda_q, o.mu_u, o.mu_q};
}

ModelParams params_from(const RawRates& r) {
  return ModelParams::validate(*r.lambda_u, *r.mu_u, *r.lambda_q, *r.mu_q);
}

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("FRESHSCHED_SEED");
  if (!raw || !*raw) return std::nullopt;
  char* end = nullptr;
  const auto v = std::strtoull(raw, &end, 10);
  if (*end != '\0') throw Error(ErrorCode::ValidationError, "FRESHSCHED_SEED must be an integer");
  return v;
}

// flag > env > config/default
std::uint64_t resolve_seed(const Options& o, std::uint64_t fallback) {
  if (o.seed) return *o.seed;
  if (auto e = env_seed()) return *e;
  return fallback;
}

SimConfig sim_from(const Options& o) {
  SimConfig c;
  c.horizon = o.horizon;
  c.warmup = o.warmup;
  c.replications = o.reps;
  c.base_seed = resolve_seed(o, c.base_seed);
  c.validate();
  return c;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void print_result(std::ostream& out, const ClosedFormResult& r) {
  out << "policy = " << r.policy.label() << '\n'
      << "rho = " << num(r.params.rho()) << '\n'
      << "E[T_q] = " << num(r.expected_response_time) << '\n'
      << "E[T_u] = " << num(r.expected_update_system_time) << '\n'
      << "E[A] = " << num(r.expected_paoi) << '\n'
      << "E[N_q] = " << num(r.expected_nq) << '\n'
      << "E[N_u] = " << num(r.expected_nu) << '\n';
}

void maybe_write(const std::vector<ResultRow>& rows, const Options& o) {
  if (!o.out.empty()) emit_csv(rows, o.out);
}

int cmd_analyze(const Options& o, std::ostream& out) {
  const auto rates = rates_from(o);
  const auto params = params_from(rates);
  const auto policy = policy_from(o);
  if (!engine_supports(Engine::ClosedForm, policy)) {
    throw Error(ErrorCode::UnsupportedEngine,
                "closed forms exist for fcfs, query-1 and update-1 only (use 'solve' for " +
                    policy.label() + ")");
  }
  const ClosedFormResult r = std::holds_alternative<Fcfs>(policy.variant())   ? fcfs_metrics(params)
                             : std::holds_alternative<QueryK>(policy.variant()) ? query1_metrics(params)
                                                                                : update1_metrics(params);
  print_result(out, r);
  maybe_write(closed_form_rows(policy, rates, &r, "analytic", "ok"), o);
  return kExitOk;
}

int cmd_solve(const Options& o, std::ostream& out) {
  const auto rates = rates_from(o);
  const auto params = params_from(rates);
  const auto policy = policy_from(o);
  if (!engine_supports(Engine::Ctmc, policy)) {
    throw Error(ErrorCode::UnsupportedEngine,
                "ctmc engine supports query-k / update-k with finite k (got " + policy.label() + ")");
  }
  TruncationPolicy trunc;
  if (o.trunc) {
    trunc.initial_bound = *o.trunc;
    trunc.adaptive = false;
  }
  const auto k = policy.single_threshold()->value();
  const ClosedFormResult r = std::holds_alternative<QueryK>(policy.variant())
                                 ? query_k_metrics(params, k, trunc)
                                 : update_k_metrics(params, k, trunc);
  print_result(out, r);
  const auto& d = *r.ctmc;
  out << "truncation = " << d.bounds.max_q << " x " << d.bounds.max_u << '\n'
      << "states = " << d.states << '\n'
      << "tail_mass = " << num(d.tail_mass) << '\n'
      << "residual = " << num(d.residual) << '\n'
      << "conservation_gap = " << num(d.conservation_gap) << (d.consistent ? "" : " (INCONSISTENT)")
      << '\n';
  maybe_write(closed_form_rows(policy, rates, &r, "ctmc", d.consistent ? "ok" : "inconsistent"), o);
  return kExitOk;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const auto rates = rates_from(o);
  const auto params = params_from(rates);
  const auto policy = policy_from(o);
  const SimConfig config = sim_from(o);
  const auto runs = run_replications(params, policy, config, o.workers);
  const auto stats = aggregate(runs);

  const auto line = [&](const char* name, const SummaryStats& s) {
    out << name << " = " << (s.mean ? num(*s.mean) : "n/a");
    if (s.half_width) out << " +- " << num(*s.half_width);
    out << '\n';
  };
  out << "policy = " << policy.label() << '\n'
      << "rho = " << num(params.rho()) << '\n'
      << "replications = " << config.replications << ", horizon = " << num(config.horizon)
      << ", warmup = " << num(config.warmup) << ", seed = " << config.base_seed << '\n';
  line("E[T_q]", stats.response_time);
  line("E[T_u]", stats.update_system_time);
  line("E[A]", stats.paoi);
  line("AoI", stats.aoi);
  line("E[N_q]", stats.nq);
  line("E[N_u]", stats.nu);
  double worst = 0.0;
  for (const auto& m : runs) {
    const auto l = littles_law_residual(m, params);
    worst = std::max({worst, l.query, l.update});
  }
  out << "little_max_residual = " << num(worst) << (params.rho() < 1.0 ? "" : " (unreliable: rho >= 1)")
      << '\n';
  maybe_write(simulation_rows(policy, rates, &stats, config, params.rho() < 1.0 ? "ok" : "unstable"), o);
  return kExitOk;
}

ExperimentSpec spec_for_compare(const Options& o) {
  if (!o.config.empty()) {
    ExperimentSpec spec = parse_config(o.config);
    for (auto& entry : spec.policies) {
      entry.engines.clear();
      for (Engine e : {Engine::ClosedForm, Engine::Ctmc, Engine::Simulation}) {
        if (engine_supports(e, entry.policy)) entry.engines.push_back(e);
      }
    }
    spec.sim.base_seed = resolve_seed(o, spec.sim.base_seed);
    return spec;
  }
  ExperimentSpec spec;
  spec.rates = rates_from(o);
  const auto policy = policy_from(o);
  PolicyEntry entry{policy.label(), policy, {}, {}};
  for (Engine e : {Engine::ClosedForm, Engine::Ctmc, Engine::Simulation}) {
    if (engine_supports(e, policy)) entry.engines.push_back(e);
  }
  if (o.trunc) {
    entry.truncation.initial_bound = *o.trunc;
    entry.truncation.adaptive = false;
  }
  spec.policies.push_back(entry);
  spec.sim = sim_from(o);
  spec.workers = o.workers;
  return spec;
}

int cmd_compare(const Options& o, std::ostream& out) {
  const ExperimentSpec spec = spec_for_compare(o);
  const auto rows = run_experiment(spec);
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %-8s %-18s %-13s %-8s %12s %12s %12s  %s\n", "policy", "k/m,n",
                "point", "metric", "source", "mean", "sim", "2*ci", "agree");
  out << buf;
  std::size_t checked = 0, agreed = 0;
  for (const auto& r : rows) {
    if (r.source == "sim" || !r.mean) continue;
    const auto sim = std::find_if(rows.begin(), rows.end(), [&](const ResultRow& s) {
      return s.source == "sim" && s.metric == r.metric && s.policy == r.policy && s.k == r.k &&
             s.m == r.m && s.n == r.n && s.lambda_u == r.lambda_u && s.lambda_q == r.lambda_q &&
             s.mu_u == r.mu_u && s.mu_q == r.mu_q;
    });
    if (sim == rows.end() || !sim->mean || !sim->ci_half_width) continue;
    const bool agree = std::abs(*sim->mean - *r.mean) <= 2.0 * *sim->ci_half_width;
    ++checked;
    agreed += agree ? 1 : 0;
    const std::string thresholds = r.k.empty() ? (r.m.empty() ? "-" : r.m + "," + r.n) : r.k;
    const std::string point = format_number(r.lambda_u) + "/" + format_number(r.lambda_q);
    std::snprintf(buf, sizeof buf, "%-10s %-8s %-18s %-13s %-8s %12.6g %12.6g %12.6g  %s\n",
                  r.policy.c_str(), thresholds.c_str(), point.c_str(), r.metric.c_str(),
                  r.source.c_str(), *r.mean, *sim->mean, 2.0 * *sim->ci_half_width,
                  agree ? "yes" : "NO");
    out << buf;
  }
  out << "agreement = " << agreed << "/" << checked << '\n';
  maybe_write(rows, o);
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  ExperimentSpec spec = parse_config(o.config);
  spec.sim.base_seed = resolve_seed(o, spec.sim.base_seed);
  if (o.workers) spec.workers = o.workers;
  const auto rows = run_experiment(spec);
  const std::string csv_path = !o.out.empty() ? o.out : spec.output.csv.value_or("");
  if (csv_path.empty()) {
    write_csv(rows, out);
  } else {
    emit_csv(rows, csv_path);
    out << "wrote " << rows.size() << " rows to " << csv_path << '\n';
  }
  if (spec.output.plot) {
    emit_plot(rows, spec.output.plot_x, spec.output.plot_metrics, *spec.output.plot);
    if (!csv_path.empty()) out << "wrote plot " << *spec.output.plot << '\n';
  }
  return kExitOk;
}

int cmd_plot(const Options& o, std::ostream& out) {
  const auto rows = read_csv(o.csv);
  emit_plot(rows, o.x_axis, o.metrics, o.out);
  out << "wrote plot " << o.out << '\n';
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoConvergence:
    case ErrorCode::Reducible:
    case ErrorCode::TruncationTooSmall:
    case ErrorCode::InconsistentTrigger:
    case ErrorCode::OutOfOrderDeparture:
      return kExitNumerical;
    case ErrorCode::Io:
      return kExitIo;
    default:
      return kExitValidation;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Response time vs. information freshness: analytic, CTMC and simulation engines"};
  app.require_subcommand(1);
  Options o;

  auto* analyze = app.add_subcommand("analyze", "closed-form metrics (fcfs, query-1, update-1)");
  add_point_options(analyze, o);

  auto* solve = app.add_subcommand("solve", "truncated-CTMC metrics for query-k / update-k");
  add_point_options(solve, o);
  solve->add_option("--trunc", o.trunc, "fixed truncation bound per queue (disables growth)");

  auto* simulate = app.add_subcommand("simulate", "discrete-event simulation over replications");
  add_point_options(simulate, o);
  add_sim_options(simulate, o);

  auto* sweep = app.add_subcommand("sweep", "run a config-driven experiment grid");
  sweep->add_option("--config", o.config, "experiment config file")->required();
  sweep->add_option("--out", o.out, "CSV output path (overrides [output] csv)");
  sweep->add_option("--seed", o.seed, "base seed (overrides FRESHSCHED_SEED and config)");
  sweep->add_option("--workers", o.workers, "replication threads (0 = all cores)");

  auto* compare = app.add_subcommand("compare", "engine-agreement table (analytic/ctmc vs simulation)");
  compare->add_option("--config", o.config, "experiment config file (instead of point flags)");
  add_point_options(compare, o);
  add_sim_options(compare, o);
  compare->add_option("--trunc", o.trunc, "fixed truncation bound per queue");

  auto* plot = app.add_subcommand("plot", "render result CSV as an SVG line chart");
  plot->add_option("--csv", o.csv, "input CSV")->required();
  plot->add_option("--x", o.x_axis, "x axis: lambda_u, lambda_q, mu_u, mu_q, rho_u, rho_q, k, m, n")
      ->capture_default_str();
  plot->add_option("--metrics", o.metrics, "metrics to plot")->delimiter(',')->capture_default_str();
  plot->add_option("--out", o.out, "SVG output path")->required();

  std::vector<const char*> argv{"freshsched"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*analyze) return cmd_analyze(o, out);
    if (*solve) return cmd_solve(o, out);
    if (*simulate) return cmd_simulate(o, out);
    if (*sweep) return cmd_sweep(o, out);
    if (*compare) return cmd_compare(o, out);
    if (*plot) return cmd_plot(o, out);
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitValidation;
}

}  // namespace freshsched
