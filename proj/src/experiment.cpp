#include "freshsched/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "freshsched/error.hpp"

namespace freshsched {

std::string_view source_name(Engine e) {
  switch (e) {
    case Engine::ClosedForm: return "analytic";
    case Engine::Ctmc: return "ctmc";
    case Engine::Simulation: return "sim";
  }
  return "?";
}

bool engine_supports(Engine e, const PolicySpec& policy) {
  const auto k = policy.single_threshold();
  switch (e) {
    case Engine::ClosedForm:
      return std::holds_alternative<Fcfs>(policy.variant()) ||
             (k && !k->is_unbounded() && k->value() == 1);
    case Engine::Ctmc: return k && !k->is_unbounded();
    case Engine::Simulation: return true;
  }
  return false;
}

std::string_view to_string(RateAxis axis) {
  switch (axis) {
    case RateAxis::LambdaU: return "lambda_u";
    case RateAxis::LambdaQ: return "lambda_q";
    case RateAxis::MuU: return "mu_u";
    case RateAxis::MuQ: return "mu_q";
  }
  return "?";
}

namespace {

ModelParams to_params(const RawRates& r) {
  return ModelParams::validate(r.lambda_u.value_or(0.0), r.mu_u.value_or(1.0),
                               r.lambda_q.value_or(0.0), r.mu_q.value_or(1.0));
}

ResultRow row_skeleton(const PolicySpec& policy, const RawRates& rates) {
  ResultRow row;
  row.policy = policy.family();
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, QueryK> || std::is_same_v<T, UpdateK>) {
          row.k = p.k.to_string();
        } else if constexpr (std::is_same_v<T, JointMN>) {
          row.m = p.m.to_string();
          row.n = p.n.to_string();
        }
      },
      policy.variant());
  row.lambda_u = rates.lambda_u.value_or(0.0);
  row.lambda_q = rates.lambda_q.value_or(0.0);
  row.mu_u = rates.mu_u.value_or(1.0);
  row.mu_q = rates.mu_q.value_or(1.0);
  return row;
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

std::string error_status(const std::string& message) { return sanitize("error: " + message); }

}  // namespace

std::vector<ResultRow> closed_form_rows(const PolicySpec& policy, const RawRates& rates,
                                        const ClosedFormResult* result, std::string_view source,
                                        std::string_view status) {
  std::vector<ResultRow> rows;
  for (std::string_view metric : kRowMetrics) {
    ResultRow row = row_skeleton(policy, rates);
    row.metric = metric;
    row.source = source;
    row.status = status;
    if (result && status == "ok") {
      if (metric == "response_time") row.mean = result->expected_response_time;
      else if (metric == "paoi") row.mean = result->expected_paoi;
      else if (metric == "nq") row.mean = result->expected_nq;
      else if (metric == "nu") row.mean = result->expected_nu;
      else row.status = "n/a";  // no closed form for the time-average age
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ResultRow> simulation_rows(const PolicySpec& policy, const RawRates& rates,
                                       const AggregateStats* stats, const SimConfig& config,
                                       std::string_view status) {
  static constexpr Metric kMetrics[] = {Metric::ResponseTime, Metric::Paoi, Metric::Aoi,
                                        Metric::Nq, Metric::Nu};
  std::vector<ResultRow> rows;
  for (std::size_t i = 0; i < std::size(kMetrics); ++i) {
    ResultRow row = row_skeleton(policy, rates);
    row.metric = kRowMetrics[i];
    row.source = "sim";
    row.status = status;
    row.replications = config.replications;
    row.horizon = config.horizon;
    row.seed = config.base_seed;
    if (stats) {
      const auto& s = stats->get(kMetrics[i]);
      row.mean = s.mean;
      row.ci_half_width = s.half_width;
      if (!s.mean && status == "ok") row.status = "n/a";
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::vector<ResultRow> engine_rows(const PolicyEntry& entry, Engine engine, const RawRates& rates,
                                   const ExperimentSpec& spec) {
  const std::string_view source = source_name(engine);
  if (!engine_supports(engine, entry.policy)) {
    if (engine == Engine::Simulation) {
      return simulation_rows(entry.policy, rates, nullptr, spec.sim, "error: unsupported engine");
    }
    return closed_form_rows(entry.policy, rates, nullptr, source, "error: unsupported engine");
  }
  try {
    const ModelParams params = to_params(rates);
    if (engine == Engine::Simulation) {
      const auto runs = run_replications(params, entry.policy, spec.sim, spec.workers);
      const auto stats = aggregate(runs);
      return simulation_rows(entry.policy, rates, &stats, spec.sim,
                             params.rho() < 1.0 ? "ok" : "unstable");
    }
    if (!(params.rho() < 1.0)) return closed_form_rows(entry.policy, rates, nullptr, source, "unstable");

    ClosedFormResult result = [&] {
      if (engine == Engine::Ctmc) {
        const auto k = entry.policy.single_threshold()->value();
        return std::holds_alternative<QueryK>(entry.policy.variant())
                   ? query_k_metrics(params, k, entry.truncation)
                   : update_k_metrics(params, k, entry.truncation);
      }
      if (std::holds_alternative<Fcfs>(entry.policy.variant())) return fcfs_metrics(params);
      if (std::holds_alternative<QueryK>(entry.policy.variant())) return query1_metrics(params);
      return update1_metrics(params);
    }();
    return closed_form_rows(entry.policy, rates, &result, source, "ok");
  } catch (const Error& e) {
    const std::string status = e.code() == ErrorCode::Unstable ? "unstable" : error_status(e.what());
    if (engine == Engine::Simulation) return simulation_rows(entry.policy, rates, nullptr, spec.sim, status);
    return closed_form_rows(entry.policy, rates, nullptr, source, status);
  }
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<ResultRow> rows;
  for (const auto& rates : spec.points()) {
    for (const auto& entry : spec.policies) {
      std::vector<std::vector<ResultRow>> per_engine;
      for (Engine engine : entry.engines) per_engine.push_back(engine_rows(entry, engine, rates, spec));
      // metric-major, then source
      for (std::size_t m = 0; m < std::size(kRowMetrics); ++m) {
        for (const auto& block : per_engine) rows.push_back(block[m]);
      }
    }
  }
  return rows;
}

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%#.6g", value);
  return buf;
}

void write_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << kCsvHeader << '\n';
  const auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  for (const auto& r : rows) {
    out << r.policy << ',' << r.m << ',' << r.n << ',' << r.k << ',' << format_number(r.lambda_u)
        << ',' << format_number(r.lambda_q) << ',' << format_number(r.mu_u) << ','
        << format_number(r.mu_q) << ',' << r.metric << ',' << r.source << ',' << opt(r.mean) << ','
        << opt(r.ci_half_width) << ','
        << (r.replications ? std::to_string(*r.replications) : std::string()) << ','
        << opt(r.horizon) << ',' << (r.seed ? std::to_string(*r.seed) : std::string()) << ','
        << sanitize(r.status) << '\n';
  }
}

void emit_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_csv(rows, out);
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::optional<double> parse_optional_double(const std::string& s, std::size_t line) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "csv line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

}  // namespace

std::vector<ResultRow> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw Error(ErrorCode::ParseError, path.string() + ": unexpected csv header");
  }
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 16) {
      throw Error(ErrorCode::ParseError,
                  "csv line " + std::to_string(line_no) + ": expected 16 fields");
    }
    ResultRow r;
    r.policy = f[0];
    r.m = f[1];
    r.n = f[2];
    r.k = f[3];
    r.lambda_u = parse_optional_double(f[4], line_no).value_or(0.0);
    r.lambda_q = parse_optional_double(f[5], line_no).value_or(0.0);
    r.mu_u = parse_optional_double(f[6], line_no).value_or(0.0);
    r.mu_q = parse_optional_double(f[7], line_no).value_or(0.0);
    r.metric = f[8];
    r.source = f[9];
    r.mean = parse_optional_double(f[10], line_no);
    r.ci_half_width = parse_optional_double(f[11], line_no);
    if (auto v = parse_optional_double(f[12], line_no)) r.replications = static_cast<std::uint32_t>(*v);
    r.horizon = parse_optional_double(f[13], line_no);
    if (!f[14].empty()) r.seed = std::stoull(f[14]);
    r.status = f[15];
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace freshsched
