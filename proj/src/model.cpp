#include "freshsched/model.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "freshsched/error.hpp"

namespace freshsched {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveRate: return "NonPositiveRate";
    case ErrorCode::NonFiniteRate: return "NonFiniteRate";
    case ErrorCode::Unstable: return "Unstable";
    case ErrorCode::InvalidPolicy: return "InvalidPolicy";
    case ErrorCode::InconsistentTrigger: return "InconsistentTrigger";
    case ErrorCode::OutOfOrderDeparture: return "OutOfOrderDeparture";
    case ErrorCode::TruncationTooSmall: return "TruncationTooSmall";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::Reducible: return "Reducible";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::UnsupportedEngine: return "UnsupportedEngine";
    case ErrorCode::NoData: return "NoData";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::string_view to_string(JobClass c) { return c == JobClass::Update ? "update" : "query"; }

namespace {

void check_rate(const char* name, double value) {
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::NonFiniteRate, std::string(name) + " must be finite");
  }
  if (value <= 0.0) {
    std::ostringstream msg;
    msg << name << " must be > 0 (got " << value << ")";
    throw Error(ErrorCode::NonPositiveRate, msg.str());
  }
}

}  // namespace

ModelParams ModelParams::validate(double lambda_u, double mu_u, double lambda_q, double mu_q) {
  check_rate("lambda_u", lambda_u);
  check_rate("mu_u", mu_u);
  check_rate("lambda_q", lambda_q);
  check_rate("mu_q", mu_q);
  return ModelParams{lambda_u, mu_u, lambda_q, mu_q};
}

ModelParams validate_params(double lambda_u, double mu_u, double lambda_q, double mu_q) {
  return ModelParams::validate(lambda_u, mu_u, lambda_q, mu_q);
}

void stability_guard(const ModelParams& params) {
  const double rho = params.rho();
  if (!(rho < 1.0)) {
    std::ostringstream msg;
    msg << "unstable system: rho = " << rho << " >= 1";
    throw Error(ErrorCode::Unstable, msg.str());
  }
}

Threshold Threshold::finite(std::int64_t k) {
  if (k < 1 || k > std::int64_t{UINT32_MAX}) {
    throw Error(ErrorCode::InvalidPolicy, "threshold must be a positive integer (got " +
                                              std::to_string(k) + ")");
  }
  return Threshold{static_cast<std::uint32_t>(k)};
}

Threshold Threshold::parse(std::string_view text) {
  if (text == "inf" || text == "unbounded") return unbounded();
  std::int64_t k = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), k);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::InvalidPolicy, "bad threshold '" + std::string(text) + "'");
  }
  return finite(k);
}

std::string Threshold::to_string() const {
  return value_ ? std::to_string(*value_) : std::string("inf");
}

PolicySpec PolicySpec::joint(Threshold m, Threshold n) {
  if (m.is_unbounded() && n.is_unbounded()) {
    throw Error(ErrorCode::InvalidPolicy, "joint policy needs at least one finite threshold");
  }
  return PolicySpec{JointMN{m, n}};
}

PolicySpec PolicySpec::parse(std::string_view text) {
  auto rest_after = [&](std::string_view prefix) -> std::optional<std::string_view> {
    if (text.substr(0, prefix.size()) == prefix) return text.substr(prefix.size());
    return std::nullopt;
  };
  if (text == "fcfs") return fcfs();
  if (auto rest = rest_after("query-")) return query_k(Threshold::parse(*rest));
  if (auto rest = rest_after("update-")) return update_k(Threshold::parse(*rest));
  if (auto rest = rest_after("joint-")) {
    const auto dash = rest->find('-');
    if (dash == std::string_view::npos) {
      throw Error(ErrorCode::InvalidPolicy, "joint policy needs two thresholds: joint-M-N");
    }
    return joint(Threshold::parse(rest->substr(0, dash)), Threshold::parse(rest->substr(dash + 1)));
  }
  throw Error(ErrorCode::InvalidPolicy, "unknown policy '" + std::string(text) + "'");
}

std::string PolicySpec::family() const {
  return std::visit(
      [](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Fcfs>) return "fcfs";
        else if constexpr (std::is_same_v<T, QueryK>) return "query-k";
        else if constexpr (std::is_same_v<T, UpdateK>) return "update-k";
        else return "joint";
      },
      v_);
}

std::string PolicySpec::label() const {
  return std::visit(
      [](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Fcfs>) return "fcfs";
        else if constexpr (std::is_same_v<T, QueryK>) return "query-" + p.k.to_string();
        else if constexpr (std::is_same_v<T, UpdateK>) return "update-" + p.k.to_string();
        else return "joint-" + p.m.to_string() + "-" + p.n.to_string();
      },
      v_);
}

std::optional<Threshold> PolicySpec::single_threshold() const {
  if (const auto* q = std::get_if<QueryK>(&v_)) return q->k;
  if (const auto* u = std::get_if<UpdateK>(&v_)) return u->k;
  return std::nullopt;
}

PolicySpec PolicySpec::mirrored() const {
  return std::visit(
      [](const auto& p) -> PolicySpec {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Fcfs>) return PolicySpec{Fcfs{}};
        else if constexpr (std::is_same_v<T, QueryK>) return PolicySpec{UpdateK{p.k}};
        else if constexpr (std::is_same_v<T, UpdateK>) return PolicySpec{QueryK{p.k}};
        else return PolicySpec{JointMN{p.n, p.m}};
      },
      v_);
}

}  // namespace freshsched
