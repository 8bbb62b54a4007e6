#include "dynnet/eval/plot.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "dynnet/errors.hpp"

namespace dynnet::eval {
namespace {

constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  double lo = 0.0, hi = 1.0;
  bool log = false;
  double map(double v) const {
    const double t = log ? std::log10(v) : v;
    return (t - lo) / (hi - lo);
  }
};

Axis fit_axis(const std::vector<PlotSeries>& series, bool use_x, bool log) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : series) {
    for (double v : use_x ? s.x : s.y) {
      if (!std::isfinite(v) || (log && v <= 0.0)) continue;
      const double t = log ? std::log10(v) : v;
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-300) {
    const double pad = std::max(std::abs(lo) * 0.05, 1e-12);
    lo -= pad;
    hi += pad;
  }
  return {lo, hi, log};
}

}  // namespace

std::string render_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
  const Axis ax = fit_axis(series, true, spec.log_x);
  const Axis ay = fit_axis(series, false, spec.log_y);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + ax.map(x) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - ay.map(y)) * ph; };
  auto ok = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!ax.log || x > 0.0) && (!ay.log || y > 0.0);
  };

  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n"
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
      kWidth, kHeight, kWidth / 2, escape(spec.title), kLeft, kTop, pw, ph);
  for (int i = 0; i <= 4; ++i) {
    const double t = i / 4.0;
    const double xv = ax.lo + t * (ax.hi - ax.lo), yv = ay.lo + t * (ay.hi - ay.lo);
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.3g}</text>\n",
                     kLeft + t * pw, kTop + ph + 16, ax.log ? std::pow(10.0, xv) : xv);
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n",
                     kLeft - 6, kTop + (1.0 - t) * ph + 4, ay.log ? std::pow(10.0, yv) : yv);
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                   kLeft + pw / 2, kHeight - 10, escape(spec.x_label));
  s += fmt::format(
      "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
      kTop + ph / 2, kTop + ph / 2, escape(spec.y_label));

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& ser = series[k];
    if (ser.x.size() != ser.y.size()) throw DomainError("render_svg: x/y length mismatch");
    const char* color = kColors[k % std::size(kColors)];
    if (ser.scatter) {
      for (std::size_t i = 0; i < ser.x.size(); ++i) {
        if (!ok(ser.x[i], ser.y[i])) continue;
        s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"1.5\" fill=\"{}\"/>\n",
                         px(ser.x[i]), py(ser.y[i]), color);
      }
    } else {
      std::string pts;
      for (std::size_t i = 0; i < ser.x.size(); ++i) {
        if (!ok(ser.x[i], ser.y[i])) continue;
        pts += fmt::format("{:.2f},{:.2f} ", px(ser.x[i]), py(ser.y[i]));
      }
      s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1\" points=\"{}\"/>\n",
                       color, pts);
    }
    s += fmt::format("<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n", kLeft + 8,
                     kTop + 16 + 14 * static_cast<double>(k), color, escape(ser.name));
  }
  s += "</svg>\n";
  return s;
}

void write_svg(const std::filesystem::path& path, const PlotSpec& spec,
               const std::vector<PlotSeries>& series) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << render_svg(spec, series);
}

}  // namespace dynnet::eval
