#include "hedgebench/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace hedgebench {

namespace {

constexpr double kWidth = 640.0, kHeight = 420.0;
constexpr double kLeft = 70.0, kRight = 24.0, kTop = 42.0, kBottom = 58.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
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

// linear value -> pixel map over one axis
struct AxisMap {
  double v0 = 0.0, v1 = 1.0;  // value range
  double p0 = 0.0, p1 = 1.0;  // pixel range
  double operator()(double v) const { return p0 + (v - v0) / (v1 - v0) * (p1 - p0); }
};

// round the raw span to 1/2/5 * 10^k tick steps
std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
  if (!(hi > lo)) hi = lo + 1.0;
  double raw = (hi - lo) / target;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> ticks;
  double t = std::ceil(lo / step) * step;
  for (; t <= hi + 0.5 * step; t += step) ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return ticks;
}

void open_svg(std::ostringstream& s, const std::string& title) {
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
    << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  s << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << kWidth / 2 << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\""
    << " text-anchor=\"middle\">" << escape(title) << "</text>\n";
}

void axis_labels(std::ostringstream& s, const std::string& x_label,
                 const std::string& y_label) {
  if (!x_label.empty())
    s << "<text x=\"" << (kLeft + (kWidth - kLeft - kRight) / 2) << "\" y=\"" << kHeight - 10
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
      << escape(x_label) << "</text>\n";
  if (!y_label.empty())
    s << "<text x=\"16\" y=\"" << (kTop + (kHeight - kTop - kBottom) / 2)
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\""
      << " transform=\"rotate(-90 16 " << (kTop + (kHeight - kTop - kBottom) / 2) << ")\">"
      << escape(y_label) << "</text>\n";
}

void y_axis(std::ostringstream& s, const AxisMap& ym) {
  for (double t : nice_ticks(ym.v0, ym.v1)) {
    double py = ym(t);
    s << "<line x1=\"" << kLeft << "\" y1=\"" << fmt(py) << "\" x2=\"" << kWidth - kRight
      << "\" y2=\"" << fmt(py) << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    s << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt(py + 4)
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << fmt(t)
      << "</text>\n";
  }
}

void frame(std::ostringstream& s) {
  s << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight
    << "\" height=\"" << kHeight - kTop - kBottom
    << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
}

// five-stop viridis-like ramp for heatmap cells
std::string ramp_color(double u) {
  static const double stops[5][3] = {{0.267, 0.005, 0.329},
                                     {0.229, 0.322, 0.545},
                                     {0.128, 0.567, 0.551},
                                     {0.369, 0.789, 0.383},
                                     {0.993, 0.906, 0.144}};
  u = std::clamp(u, 0.0, 1.0);
  double pos = u * 4.0;
  int i = std::min(3, static_cast<int>(pos));
  double f = pos - i;
  char buf[10];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(std::lround(255 * (stops[i][0] + f * (stops[i + 1][0] - stops[i][0])))),
                static_cast<int>(std::lround(255 * (stops[i][1] + f * (stops[i + 1][1] - stops[i][1])))),
                static_cast<int>(std::lround(255 * (stops[i][2] + f * (stops[i + 1][2] - stops[i][2])))));
  return buf;
}

}  // namespace

std::string svg_histogram(const std::vector<double>& counts,
                          const std::vector<std::string>& labels, const std::string& title,
                          const std::string& x_label, const std::string& y_label) {
  std::ostringstream s;
  open_svg(s, title);
  int n = static_cast<int>(counts.size());
  double top = 1.0;
  for (double c : counts) top = std::max(top, c);
  AxisMap ym{0.0, top * 1.05, kHeight - kBottom, kTop};
  y_axis(s, ym);

  double plot_w = kWidth - kLeft - kRight;
  double slot = n > 0 ? plot_w / n : plot_w;
  double bar = slot * 0.82;
  for (int i = 0; i < n; ++i) {
    double x = kLeft + i * slot + (slot - bar) / 2;
    double y = ym(counts[i]);
    s << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(bar)
      << "\" height=\"" << fmt(ym(0.0) - y) << "\" fill=\"" << kPalette[0] << "\"/>\n";
  }
  // label every bar when they fit, otherwise thin them out
  int stride = n > 24 ? (n + 23) / 24 : 1;
  for (int i = 0; i < n && i < static_cast<int>(labels.size()); i += stride) {
    double x = kLeft + i * slot + slot / 2;
    s << "<text x=\"" << fmt(x) << "\" y=\"" << kHeight - kBottom + 16
      << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">"
      << escape(labels[i]) << "</text>\n";
  }
  frame(s);
  axis_labels(s, x_label, y_label);
  s << "</svg>\n";
  return s.str();
}

std::string svg_line_plot(const std::vector<SvgSeries>& series, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          bool log_x) {
  std::ostringstream s;
  open_svg(s, title);

  auto tx = [log_x](double v) { return log_x ? std::log10(v) : v; };
  bool any = false;
  double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  for (const auto& sr : series)
    for (std::size_t i = 0; i < sr.x.size(); ++i) {
      double xv = tx(sr.x[i]);
      auto take = [&](double yv) {
        if (std::isnan(yv)) return;
        if (!any) {
          xlo = xhi = xv;
          ylo = yhi = yv;
          any = true;
        } else {
          xlo = std::min(xlo, xv), xhi = std::max(xhi, xv);
          ylo = std::min(ylo, yv), yhi = std::max(yhi, yv);
        }
      };
      take(i < sr.y.size() ? sr.y[i] : NAN);
      take(i < sr.band_lo.size() ? sr.band_lo[i] : NAN);
      take(i < sr.band_hi.size() ? sr.band_hi[i] : NAN);
    }
  if (xhi <= xlo) xhi = xlo + 1.0;
  if (yhi <= ylo) yhi = ylo + 1.0;
  double pad = (yhi - ylo) * 0.05;
  AxisMap xm{xlo, xhi, kLeft, kWidth - kRight};
  AxisMap ym{ylo - pad, yhi + pad, kHeight - kBottom, kTop};
  y_axis(s, ym);
  for (double t : nice_ticks(xm.v0, xm.v1, 6)) {
    double px = xm(t);
    s << "<text x=\"" << fmt(px) << "\" y=\"" << kHeight - kBottom + 16
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
      << fmt(log_x ? std::pow(10.0, t) : t) << "</text>\n";
  }

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& sr = series[k];
    const char* color = kPalette[k % kPaletteSize];
    if (sr.band_lo.size() == sr.x.size() && sr.band_hi.size() == sr.x.size() &&
        !sr.x.empty()) {
      std::string pts;
      for (std::size_t i = 0; i < sr.x.size(); ++i)
        pts += fmt(xm(tx(sr.x[i]))) + "," + fmt(ym(sr.band_lo[i])) + " ";
      for (std::size_t i = sr.x.size(); i-- > 0;)
        pts += fmt(xm(tx(sr.x[i]))) + "," + fmt(ym(sr.band_hi[i])) + " ";
      s << "<polygon points=\"" << pts << "\" fill=\"" << color
        << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }
    // polyline per contiguous non-NaN run
    std::string pts;
    int run = 0;
    auto flush = [&] {
      if (run >= 2)
        s << "<polyline points=\"" << pts << "\" fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1.8\"/>\n";
      pts.clear();
      run = 0;
    };
    for (std::size_t i = 0; i < sr.x.size(); ++i) {
      if (i < sr.y.size() && !std::isnan(sr.y[i])) {
        pts += fmt(xm(tx(sr.x[i]))) + "," + fmt(ym(sr.y[i])) + " ";
        ++run;
      } else {
        flush();
      }
    }
    flush();
    if (sr.x.size() <= 60)
      for (std::size_t i = 0; i < sr.x.size() && i < sr.y.size(); ++i)
        if (!std::isnan(sr.y[i]))
          s << "<circle cx=\"" << fmt(xm(tx(sr.x[i]))) << "\" cy=\"" << fmt(ym(sr.y[i]))
            << "\" r=\"2.4\" fill=\"" << color << "\"/>\n";
    if (!sr.label.empty()) {
      double lx = kWidth - kRight - 150, ly = kTop + 16 + 16 * static_cast<double>(k);
      s << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\"" << lx + 22 << "\" y2=\""
        << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      s << "<text x=\"" << lx + 28 << "\" y=\"" << ly
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(sr.label)
        << "</text>\n";
    }
  }
  frame(s);
  axis_labels(s, x_label, y_label);
  s << "</svg>\n";
  return s.str();
}

std::string svg_heatmap(const std::vector<std::vector<double>>& values,
                        const std::vector<std::string>& x_labels,
                        const std::vector<std::string>& y_labels, const std::string& title,
                        const std::string& x_label, const std::string& y_label) {
  std::ostringstream s;
  open_svg(s, title);
  int rows = static_cast<int>(values.size());
  int cols = 0;
  for (const auto& r : values) cols = std::max(cols, static_cast<int>(r.size()));

  bool any = false;
  double lo = 0, hi = 1;
  for (const auto& r : values)
    for (double v : r) {
      if (std::isnan(v)) continue;
      if (!any) lo = hi = v, any = true;
      else lo = std::min(lo, v), hi = std::max(hi, v);
    }
  if (hi <= lo) hi = lo + 1.0;

  double plot_w = kWidth - kLeft - kRight - 40;  // room for the color bar
  double plot_h = kHeight - kTop - kBottom;
  double cw = cols > 0 ? plot_w / cols : plot_w;
  double ch = rows > 0 ? plot_h / rows : plot_h;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < static_cast<int>(values[r].size()); ++c) {
      double v = values[r][c];
      double x = kLeft + c * cw, y = kTop + r * ch;
      if (std::isnan(v)) {
        s << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(cw)
          << "\" height=\"" << fmt(ch) << "\" fill=\"#eeeeee\"/>\n";
      } else {
        s << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(cw)
          << "\" height=\"" << fmt(ch) << "\" fill=\"" << ramp_color((v - lo) / (hi - lo))
          << "\"/>\n";
      }
    }

  int xs = cols > 20 ? (cols + 19) / 20 : 1;
  for (int c = 0; c < static_cast<int>(x_labels.size()) && c < cols; c += xs)
    s << "<text x=\"" << fmt(kLeft + (c + 0.5) * cw) << "\" y=\"" << kHeight - kBottom + 16
      << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">"
      << escape(x_labels[c]) << "</text>\n";
  int ys = rows > 20 ? (rows + 19) / 20 : 1;
  for (int r = 0; r < static_cast<int>(y_labels.size()) && r < rows; r += ys)
    s << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt(kTop + (r + 0.5) * ch + 4)
      << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">"
      << escape(y_labels[r]) << "</text>\n";

  // color bar with min/max annotations
  double bx = kWidth - kRight - 28;
  for (int i = 0; i < 64; ++i) {
    double u = 1.0 - i / 63.0;
    s << "<rect x=\"" << bx << "\" y=\"" << fmt(kTop + i * plot_h / 64) << "\" width=\"14\""
      << " height=\"" << fmt(plot_h / 64 + 0.5) << "\" fill=\"" << ramp_color(u) << "\"/>\n";
  }
  s << "<text x=\"" << bx - 4 << "\" y=\"" << kTop + 10
    << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << fmt(hi)
    << "</text>\n";
  s << "<text x=\"" << bx - 4 << "\" y=\"" << kTop + plot_h
    << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << fmt(lo)
    << "</text>\n";

  s << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << fmt(plot_w)
    << "\" height=\"" << fmt(plot_h)
    << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  axis_labels(s, x_label, y_label);
  s << "</svg>\n";
  return s.str();
}

}  // namespace hedgebench
