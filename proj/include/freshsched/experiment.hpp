#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "freshsched/analytic.hpp"
#include "freshsched/model.hpp"
#include "freshsched/simulator.hpp"

namespace freshsched {

enum class Engine : std::uint8_t { ClosedForm, Ctmc, Simulation };

std::string_view source_name(Engine e);
bool engine_supports(Engine e, const PolicySpec& policy);

enum class RateAxis : std::uint8_t { LambdaU, LambdaQ, MuU, MuQ };

std::string_view to_string(RateAxis axis);

struct SweepAxis {
  RateAxis axis = RateAxis::LambdaU;
  double start = 0.0;
  double stop = 0.0;
  double step = 0.0;

  std::vector<double> points() const;
};

struct PolicyEntry {
  std::string name;  // section suffix, e.g. "q3"
  PolicySpec policy;
  std::vector<Engine> engines;  // requested, in source order
  TruncationPolicy truncation;
};

/// Raw rates as given; the sweep axis (if any) overrides one of them per point.
struct RawRates {
  std::optional<double> lambda_u;
  std::optional<double> lambda_q;
  std::optional<double> mu_u;
  std::optional<double> mu_q;
};

struct OutputSpec {
  std::optional<std::string> csv;
  std::optional<std::string> plot;
  std::string plot_x = "lambda_u";
  std::vector<std::string> plot_metrics{"response_time", "paoi"};
};

struct ExperimentSpec {
  RawRates rates;
  std::optional<SweepAxis> sweep;
  std::vector<PolicyEntry> policies;
  SimConfig sim;
  unsigned workers = 0;  // 0: hardware concurrency
  OutputSpec output;

  /// Operating points in sweep order (a single point without a sweep).
  std::vector<RawRates> points() const;
  /// Throws Error{ValidationError}.
  void validate() const;
};

/// Parses the line-oriented `key = value` format with `[section]` headers.
/// Throws Error{ParseError} (with line number) or Error{ValidationError}.
ExperimentSpec parse_config_text(std::string_view text);
ExperimentSpec parse_config(const std::filesystem::path& path);

struct ResultRow {
  std::string policy;  // family: fcfs, query-k, update-k, joint
  std::string m;
  std::string n;
  std::string k;
  double lambda_u = 0.0;
  double lambda_q = 0.0;
  double mu_u = 0.0;
  double mu_q = 0.0;
  std::string metric;  // response_time, paoi, aoi, nq, nu
  std::string source;  // analytic, ctmc, sim
  std::optional<double> mean;
  std::optional<double> ci_half_width;
  std::optional<std::uint32_t> replications;
  std::optional<double> horizon;
  std::optional<std::uint64_t> seed;
  std::string status = "ok";  // ok, unstable, n/a, error: ...
};

inline constexpr std::string_view kCsvHeader =
    "policy,m,n,k,lambda_u,lambda_q,mu_u,mu_q,metric,source,mean,ci_half_width,replications,"
    "horizon,seed,status";

inline constexpr std::string_view kRowMetrics[] = {"response_time", "paoi", "aoi", "nq", "nu"};

// Row builders shared by the sweep runner and the single-shot CLI commands.
std::vector<ResultRow> closed_form_rows(const PolicySpec& policy, const RawRates& rates,
                                        const ClosedFormResult* result, std::string_view source,
                                        std::string_view status);
std::vector<ResultRow> simulation_rows(const PolicySpec& policy, const RawRates& rates,
                                       const AggregateStats* stats, const SimConfig& config,
                                       std::string_view status);

/// Runs every point x policy x engine; failures become status markers.
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec);

std::string format_number(double value);  // 6 significant digits

void write_csv(const std::vector<ResultRow>& rows, std::ostream& out);
/// Throws Error{Io}.
void emit_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path);
/// Throws Error{Io} or Error{ParseError}.
std::vector<ResultRow> read_csv(const std::filesystem::path& path);

/// Static SVG line chart: one series per (policy, thresholds, metric, source),
/// CI whiskers on simulation series. Throws Error{NoData}.
std::string render_plot(const std::vector<ResultRow>& rows, std::string_view x_axis,
                        const std::vector<std::string>& metrics);
void emit_plot(const std::vector<ResultRow>& rows, std::string_view x_axis,
               const std::vector<std::string>& metrics, const std::filesystem::path& path);

}  // namespace freshsched
