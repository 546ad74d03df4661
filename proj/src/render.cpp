#include <eitias/render.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace eitias {

namespace {

std::string hex(double r, double g, double b) {
  auto c = [](double x) { return static_cast<int>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0)); };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c(r), c(g), c(b));
  return buf;
}

// Piecewise-linear interpolation between control colours.
template <std::size_t K>
std::string interpolate(const std::array<std::array<double, 3>, K>& stops, double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  const double x = t * (K - 1);
  const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(x), K - 2);
  const double f = x - static_cast<double>(i);
  return hex(stops[i][0] + f * (stops[i + 1][0] - stops[i][0]), stops[i][1] + f * (stops[i + 1][1] - stops[i][1]),
             stops[i][2] + f * (stops[i + 1][2] - stops[i][2]));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

std::string sequential_color(double t) {
  static const std::array<std::array<double, 3>, 5> stops{{{0.267, 0.005, 0.329},
                                                           {0.229, 0.322, 0.546},
                                                           {0.128, 0.567, 0.551},
                                                           {0.369, 0.789, 0.383},
                                                           {0.993, 0.906, 0.144}}};
  return interpolate(stops, t);
}

std::string diverging_color(double t) {
  static const std::array<std::array<double, 3>, 3> stops{{{0.230, 0.299, 0.754}, {0.97, 0.97, 0.97}, {0.706, 0.016, 0.150}}};
  return interpolate(stops, t);
}

std::string render_svg(const Mesh& mesh, const Vector& values, const RenderOptions& options,
                       const std::vector<Arc>& electrodes) {
  require(values.size() == mesh.num_elements(), "render needs one value per element");
  require(options.size >= 100, "image size must be at least 100 pixels");
  double lo = options.vmin.value_or(values.size() ? values.minCoeff() : 0.0);
  double hi = options.vmax.value_or(values.size() ? values.maxCoeff() : 1.0);
  if (options.diverging && !options.vmin && !options.vmax) {
    const double a = std::max(std::abs(lo), std::abs(hi));
    lo = -a;
    hi = a;
  }
  if (!(hi > lo)) {
    const double pad = std::max(1e-12, std::abs(lo) * 1e-6);
    lo -= pad;
    hi += pad;
  }
  auto color = [&](double v) {
    const double t = (v - lo) / (hi - lo);
    return options.diverging ? diverging_color(t) : sequential_color(t);
  };

  const int S = options.size;
  const int legend_w = 90;
  const double half = 0.46 * S;
  const double cx = 0.5 * S, cy = 0.5 * S;
  auto px = [&](const Vec2& p) { return std::array<double, 2>{cx + half * p.x(), cy - half * p.y()}; };

  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << S + legend_w << "\" height=\"" << S
      << "\" viewBox=\"0 0 " << S + legend_w << " " << S << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!options.title.empty()) out << "<title>" << options.title << "</title>\n";
  out << "<g id=\"mesh\" stroke-width=\"0.3\">\n";
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto& t = mesh.triangles[e];
    const std::string c = color(values[e]);
    out << "<polygon points=\"";
    for (int i = 0; i < 3; ++i) {
      const auto p = px(mesh.vertices[t[i]]);
      out << p[0] << "," << p[1] << (i < 2 ? " " : "");
    }
    out << "\" fill=\"" << c << "\" stroke=\"" << c << "\"/>\n";
  }
  out << "</g>\n";
  if (options.draw_electrodes && !electrodes.empty()) {
    out << "<g id=\"electrodes\" stroke=\"#d62728\" stroke-width=\"4\" fill=\"none\">\n";
    for (const Arc& a : electrodes) {
      const double r = half * 1.015;
      out << "<path d=\"M " << cx + r * std::cos(a.start) << " " << cy - r * std::sin(a.start) << " A " << r << " "
          << r << " 0 " << (a.length() > kPi ? 1 : 0) << " 0 " << cx + r * std::cos(a.end) << " "
          << cy - r * std::sin(a.end) << "\"/>\n";
    }
    out << "</g>\n";
  }
  // Legend: vertical colour bar with min, mid and max labels.
  const int bar_x = S + 15, bar_w = 20, bar_top = 40, bar_h = S - 80, steps = 64;
  out << "<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (int k = 0; k < steps; ++k) {
    const double t = 1.0 - (k + 0.5) / steps;
    out << "<rect x=\"" << bar_x << "\" y=\"" << bar_top + bar_h * k / static_cast<double>(steps) << "\" width=\""
        << bar_w << "\" height=\"" << bar_h / static_cast<double>(steps) + 0.5 << "\" fill=\""
        << (options.diverging ? diverging_color(t) : sequential_color(t)) << "\"/>\n";
  }
  out << "<rect x=\"" << bar_x << "\" y=\"" << bar_top << "\" width=\"" << bar_w << "\" height=\"" << bar_h
      << "\" fill=\"none\" stroke=\"black\" stroke-width=\"0.5\"/>\n";
  out << "<text x=\"" << bar_x + bar_w + 4 << "\" y=\"" << bar_top + 4 << "\">" << fmt(hi) << "</text>\n";
  out << "<text x=\"" << bar_x + bar_w + 4 << "\" y=\"" << bar_top + bar_h / 2.0 + 4 << "\">" << fmt(0.5 * (lo + hi))
      << "</text>\n";
  out << "<text x=\"" << bar_x + bar_w + 4 << "\" y=\"" << bar_top + bar_h + 4 << "\">" << fmt(lo) << "</text>\n";
  out << "</g>\n</svg>\n";
  return out.str();
}

}  // namespace eitias
