#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "freshsched/error.hpp"
#include "freshsched/experiment.hpp"

namespace freshsched {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

[[noreturn]] void validation_error(const std::string& what) {
  throw Error(ErrorCode::ValidationError, what);
}

struct Entry {
  std::string value;
  std::size_t line;
};

struct Section {
  std::string name;
  std::size_t line;
  std::map<std::string, Entry> entries;
};

class SectionReader {
 public:
  SectionReader(const Section& s, std::set<std::string> allowed) : section_(s) {
    for (const auto& [key, entry] : s.entries) {
      if (!allowed.contains(key)) {
        parse_error(entry.line, "unknown key '" + key + "' in [" + s.name + "]");
      }
    }
  }

  const Entry* find(const std::string& key) const {
    auto it = section_.entries.find(key);
    return it == section_.entries.end() ? nullptr : &it->second;
  }

  std::optional<std::string> text(const std::string& key) const {
    if (const auto* e = find(key)) return e->value;
    return std::nullopt;
  }

  std::optional<double> number(const std::string& key) const {
    const auto* e = find(key);
    if (!e) return std::nullopt;
    double v = 0.0;
    const auto& s = e->value;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      parse_error(e->line, "'" + key + "' expects a number, got '" + s + "'");
    }
    return v;
  }

  std::optional<std::uint64_t> integer(const std::string& key) const {
    const auto* e = find(key);
    if (!e) return std::nullopt;
    std::uint64_t v = 0;
    const auto& s = e->value;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      parse_error(e->line, "'" + key + "' expects a non-negative integer, got '" + s + "'");
    }
    return v;
  }

  template <typename F>
  auto with_line(const std::string& key, F&& f) const {
    try {
      return f();
    } catch (const Error& err) {
      const auto* e = find(key);
      parse_error(e ? e->line : section_.line, err.what());
    }
  }

 private:
  const Section& section_;
};

std::vector<Section> tokenize(std::string_view text) {
  std::vector<Section> sections;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') parse_error(line_no, "unterminated section header");
      const std::string name(trim(line.substr(1, line.size() - 2)));
      if (name.empty()) parse_error(line_no, "empty section name");
      for (const auto& s : sections) {
        if (s.name == name) parse_error(line_no, "duplicate section [" + name + "]");
      }
      sections.push_back(Section{name, line_no, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) parse_error(line_no, "expected 'key = value'");
    if (sections.empty()) parse_error(line_no, "key outside of any [section]");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) parse_error(line_no, "missing key");
    if (value.empty()) parse_error(line_no, "missing value for '" + key + "'");
    auto& entries = sections.back().entries;
    if (entries.contains(key)) parse_error(line_no, "duplicate key '" + key + "'");
    entries.emplace(key, Entry{value, line_no});
  }
  return sections;
}

RateAxis parse_axis(std::string_view name, std::size_t line) {
  if (name == "lambda_u") return RateAxis::LambdaU;
  if (name == "lambda_q") return RateAxis::LambdaQ;
  if (name == "mu_u") return RateAxis::MuU;
  if (name == "mu_q") return RateAxis::MuQ;
  parse_error(line, "sweep axis must be one of lambda_u, lambda_q, mu_u, mu_q");
}

std::vector<Engine> parse_engines(const std::string& list, const PolicySpec& policy,
                                  std::size_t line) {
  bool closed_form = false, ctmc = false, sim = false;
  for (const auto& item : split_list(list)) {
    if (item == "all") {
      closed_form = closed_form || engine_supports(Engine::ClosedForm, policy);
      ctmc = ctmc || engine_supports(Engine::Ctmc, policy);
      sim = true;
    } else if (item == "closed_form" || item == "analytic") {
      closed_form = true;
    } else if (item == "ctmc") {
      ctmc = true;
    } else if (item == "simulation" || item == "sim") {
      sim = true;
    } else {
      parse_error(line, "unknown engine '" + item + "' (closed_form, ctmc, simulation, all)");
    }
  }
  std::vector<Engine> engines;
  if (closed_form) engines.push_back(Engine::ClosedForm);
  if (ctmc) engines.push_back(Engine::Ctmc);
  if (sim) engines.push_back(Engine::Simulation);
  return engines;
}

PolicyEntry parse_policy(const Section& section) {
  SectionReader r(section, {"kind", "k", "m", "n", "engines", "trunc"});
  const std::string name = section.name.substr(std::string("policy.").size());
  if (name.empty()) parse_error(section.line, "policy section needs a name: [policy.<name>]");
  const auto kind = r.text("kind");
  if (!kind) parse_error(section.line, "[" + section.name + "] needs 'kind'");

  const auto threshold = [&](const std::string& key) {
    const auto t = r.text(key);
    if (!t) parse_error(section.line, "[" + section.name + "] needs '" + key + "'");
    return r.with_line(key, [&] { return Threshold::parse(*t); });
  };

  PolicyEntry entry{name, PolicySpec::fcfs(), {}, {}};
  if (*kind == "fcfs") {
    entry.policy = PolicySpec::fcfs();
  } else if (*kind == "query-k") {
    entry.policy = PolicySpec::query_k(threshold("k"));
  } else if (*kind == "update-k") {
    entry.policy = PolicySpec::update_k(threshold("k"));
  } else if (*kind == "joint") {
    const auto m = threshold("m");
    const auto n = threshold("n");
    entry.policy = r.with_line("kind", [&] { return PolicySpec::joint(m, n); });
  } else {
    parse_error(r.find("kind")->line, "unknown policy kind '" + *kind +
                                          "' (fcfs, query-k, update-k, joint)");
  }
  const auto engines = r.text("engines").value_or("all");
  entry.engines = parse_engines(engines, entry.policy,
                                r.find("engines") ? r.find("engines")->line : section.line);
  if (const auto trunc = r.integer("trunc")) {
    if (*trunc < 2) validation_error("[" + section.name + "] trunc must be >= 2");
    entry.truncation.initial_bound = static_cast<std::uint32_t>(*trunc);
    entry.truncation.adaptive = false;
  }
  return entry;
}

}  // namespace

ExperimentSpec parse_config_text(std::string_view text) {
  ExperimentSpec spec;
  for (const auto& section : tokenize(text)) {
    if (section.name == "model") {
      SectionReader r(section, {"lambda_u", "lambda_q", "mu_u", "mu_q"});
      spec.rates = RawRates{r.number("lambda_u"), r.number("lambda_q"), r.number("mu_u"),
                            r.number("mu_q")};
    } else if (section.name == "sim") {
      SectionReader r(section, {"horizon", "warmup", "replications", "seed", "workers"});
      if (auto v = r.number("horizon")) spec.sim.horizon = *v;
      if (auto v = r.number("warmup")) spec.sim.warmup = *v;
      if (auto v = r.integer("replications")) spec.sim.replications = static_cast<std::uint32_t>(*v);
      if (auto v = r.integer("seed")) spec.sim.base_seed = *v;
      if (auto v = r.integer("workers")) spec.workers = static_cast<unsigned>(*v);
    } else if (section.name == "sweep") {
      SectionReader r(section, {"axis", "start", "stop", "step"});
      const auto axis = r.text("axis");
      const auto start = r.number("start");
      const auto stop = r.number("stop");
      const auto step = r.number("step");
      if (!axis || !start || !stop || !step) {
        parse_error(section.line, "[sweep] needs axis, start, stop and step");
      }
      spec.sweep = SweepAxis{parse_axis(*axis, r.find("axis")->line), *start, *stop, *step};
    } else if (section.name == "output") {
      SectionReader r(section, {"csv", "plot", "plot_x", "plot_metrics"});
      spec.output.csv = r.text("csv");
      spec.output.plot = r.text("plot");
      if (auto v = r.text("plot_x")) spec.output.plot_x = *v;
      if (auto v = r.text("plot_metrics")) spec.output.plot_metrics = split_list(*v);
    } else if (section.name.starts_with("policy.")) {
      spec.policies.push_back(parse_policy(section));
    } else {
      parse_error(section.line, "unknown section [" + section.name + "]");
    }
  }
  spec.validate();
  return spec;
}

ExperimentSpec parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read config " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::vector<double> SweepAxis::points() const {
  std::vector<double> out;
  if (!(step > 0.0) || stop < start) return out;
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(start + static_cast<double>(i) * step);
  return out;
}

std::vector<RawRates> ExperimentSpec::points() const {
  if (!sweep) return {rates};
  std::vector<RawRates> out;
  for (double v : sweep->points()) {
    RawRates r = rates;
    switch (sweep->axis) {
      case RateAxis::LambdaU: r.lambda_u = v; break;
      case RateAxis::LambdaQ: r.lambda_q = v; break;
      case RateAxis::MuU: r.mu_u = v; break;
      case RateAxis::MuQ: r.mu_q = v; break;
    }
    out.push_back(r);
  }
  return out;
}

void ExperimentSpec::validate() const {
  if (sweep) {
    if (!std::isfinite(sweep->step) || !(sweep->step > 0.0)) {
      validation_error("sweep step must be > 0 (axis must be strictly increasing)");
    }
    if (!std::isfinite(sweep->start) || !std::isfinite(sweep->stop) || sweep->stop < sweep->start) {
      validation_error("sweep needs finite start <= stop");
    }
  }
  for (const auto& point : points()) {
    if (!point.lambda_u || !point.lambda_q) {
      validation_error("[model] needs lambda_u and lambda_q unless swept");
    }
    try {
      ModelParams::validate(*point.lambda_u, point.mu_u.value_or(1.0), *point.lambda_q,
                            point.mu_q.value_or(1.0));
    } catch (const Error& e) {
      validation_error(std::string("invalid operating point: ") + e.what());
    }
  }
  if (policies.empty()) validation_error("at least one [policy.<name>] section is required");
  try {
    sim.validate();
  } catch (const Error& e) {
    validation_error(e.what());
  }
}

}  // namespace freshsched
