#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "freshsched/error.hpp"
#include "freshsched/experiment.hpp"

namespace freshsched {

namespace {

constexpr double kWidth = 960.0;
constexpr double kHeight = 520.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 330.0;  // legend column
constexpr double kTop = 30.0;
constexpr double kBottom = 60.0;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::optional<double> x_value(const ResultRow& r, std::string_view axis) {
  if (axis == "lambda_u") return r.lambda_u;
  if (axis == "lambda_q") return r.lambda_q;
  if (axis == "mu_u") return r.mu_u;
  if (axis == "mu_q") return r.mu_q;
  if (axis == "rho_u") return r.lambda_u / r.mu_u;
  if (axis == "rho_q") return r.lambda_q / r.mu_q;
  const std::string* field = axis == "k" ? &r.k : axis == "m" ? &r.m : axis == "n" ? &r.n : nullptr;
  if (!field) throw Error(ErrorCode::ValidationError, "unknown plot axis '" + std::string(axis) + "'");
  if (field->empty() || *field == "inf") return std::nullopt;
  return std::stod(*field);
}

std::string series_label(const ResultRow& r, std::string_view axis) {
  std::string label = r.policy;
  if (!r.k.empty() && axis != "k") label += " k=" + r.k;
  if (!r.m.empty() && axis != "m") label += " M=" + r.m;
  if (!r.n.empty() && axis != "n") label += " N=" + r.n;
  return label + " " + r.metric + " [" + r.source + "]";
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<double> nice_ticks(double lo, double hi, bool integral = false) {
  const double span = hi - lo;
  const double raw = integral ? std::max(1.0, span / 5.0) : span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (integral && m == 2.5 && mag < 10.0) continue;
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step - 1e-9) * step; t <= hi + 1e-9 * step; t += step) {
    ticks.push_back(t);
  }
  return ticks;
}

std::string axis_unit(const std::vector<std::string>& metrics) {
  bool time = false, count = false;
  for (const auto& m : metrics) {
    if (m == "nq" || m == "nu") count = true;
    else time = true;
  }
  if (time && count) return " (time units / jobs)";
  return count ? " (jobs)" : " (time units)";
}

struct Point {
  double x;
  double y;
  std::optional<double> half_width;
};

}  // namespace

std::string render_plot(const std::vector<ResultRow>& rows, std::string_view x_axis,
                        const std::vector<std::string>& metrics) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<Point>> series;
  for (const auto& r : rows) {
    if (!r.mean || std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end()) continue;
    const auto x = x_value(r, x_axis);
    if (!x || !std::isfinite(*r.mean)) continue;
    const std::string label = series_label(r, x_axis);
    auto [it, inserted] = series.try_emplace(label);
    if (inserted) order.push_back(label);
    it->second.push_back(Point{*x, *r.mean, r.source == "sim" ? r.ci_half_width : std::nullopt});
  }
  if (series.empty()) throw Error(ErrorCode::NoData, "no plottable rows for the requested axis/metrics");

  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (auto& [label, points] : series) {
    std::stable_sort(points.begin(), points.end(), [](const Point& a, const Point& b) { return a.x < b.x; });
    for (const auto& p : points) {
      const double hw = p.half_width.value_or(0.0);
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y - hw);
      ymax = std::max(ymax, p.y + hw);
    }
  }
  const auto pad = [](double& lo, double& hi) {
    if (hi - lo < 1e-12) {
      const double d = std::max(std::abs(lo) * 0.1, 0.5);
      lo -= d;
      hi += d;
    } else {
      const double d = 0.05 * (hi - lo);
      lo -= d;
      hi += d;
    }
  };
  pad(xmin, xmax);
  pad(ymin, ymax);
  if (ymin < 0.0 && ymin > -0.1 * (ymax - ymin)) ymin = 0.0;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const auto sx = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * plot_w; };
  const auto sy = [&](double y) { return kTop + (ymax - y) / (ymax - ymin) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\"" << fmt(plot_w)
      << "\" height=\"" << fmt(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";

  const bool integral_x = x_axis == "k" || x_axis == "m" || x_axis == "n";
  for (double t : nice_ticks(xmin, xmax, integral_x)) {
    svg << "<line x1=\"" << fmt(sx(t)) << "\" y1=\"" << fmt(kTop + plot_h) << "\" x2=\"" << fmt(sx(t))
        << "\" y2=\"" << fmt(kTop + plot_h + 5) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fmt(sx(t)) << "\" y=\"" << fmt(kTop + plot_h + 18)
        << "\" text-anchor=\"middle\">" << tick_label(t) << "</text>\n";
  }
  for (double t : nice_ticks(ymin, ymax)) {
    svg << "<line x1=\"" << fmt(kLeft - 5) << "\" y1=\"" << fmt(sy(t)) << "\" x2=\"" << fmt(kLeft + plot_w)
        << "\" y2=\"" << fmt(sy(t)) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << fmt(kLeft - 8) << "\" y=\"" << fmt(sy(t) + 4)
        << "\" text-anchor=\"end\">" << tick_label(t) << "</text>\n";
  }
  svg << "<text x=\"" << fmt(kLeft + plot_w / 2) << "\" y=\"" << fmt(kHeight - 15)
      << "\" text-anchor=\"middle\">" << escape(x_axis) << "</text>\n";
  std::string y_label;
  for (const auto& m : metrics) y_label += (y_label.empty() ? "" : ", ") + m;
  svg << "<text transform=\"translate(18 " << fmt(kTop + plot_h / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(y_label + axis_unit(metrics)) << "</text>\n";

  std::size_t index = 0;
  for (const auto& label : order) {
    const auto& points = series.at(label);
    const char* color = kPalette[index % std::size(kPalette)];
    const bool dashed = label.find("[sim]") == std::string::npos;
    svg << "<g stroke=\"" << color << "\" fill=\"" << color << "\">\n";
    if (points.size() > 1) {
      svg << "<polyline fill=\"none\" stroke-width=\"1.5\"" << (dashed ? " stroke-dasharray=\"6 3\"" : "")
          << " points=\"";
      for (std::size_t i = 0; i < points.size(); ++i) {
        svg << (i ? " " : "") << fmt(sx(points[i].x)) << ',' << fmt(sy(points[i].y));
      }
      svg << "\"/>\n";
    }
    for (const auto& p : points) {
      if (p.half_width && *p.half_width > 0.0) {
        const double x = sx(p.x);
        const double y0 = sy(p.y - *p.half_width);
        const double y1 = sy(p.y + *p.half_width);
        svg << "<path fill=\"none\" d=\"M" << fmt(x) << ' ' << fmt(y0) << " V" << fmt(y1) << " M"
            << fmt(x - 3) << ' ' << fmt(y0) << " H" << fmt(x + 3) << " M" << fmt(x - 3) << ' '
            << fmt(y1) << " H" << fmt(x + 3) << "\"/>\n";
      }
      svg << "<circle cx=\"" << fmt(sx(p.x)) << "\" cy=\"" << fmt(sy(p.y)) << "\" r=\"3\"/>\n";
    }
    const double ly = kTop + 10 + 18.0 * static_cast<double>(index);
    const double lx = kLeft + plot_w + 15;
    svg << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(lx + 20) << "\" y2=\""
        << fmt(ly) << "\" stroke-width=\"2\"" << (dashed ? " stroke-dasharray=\"6 3\"" : "") << "/>\n";
    svg << "<text x=\"" << fmt(lx + 26) << "\" y=\"" << fmt(ly + 4) << "\" stroke=\"none\" fill=\"black\">"
        << escape(label) << "</text>\n";
    svg << "</g>\n";
    ++index;
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_plot(const std::vector<ResultRow>& rows, std::string_view x_axis,
               const std::vector<std::string>& metrics, const std::filesystem::path& path) {
  const std::string svg = render_plot(rows, x_axis, metrics);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << svg;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace freshsched
