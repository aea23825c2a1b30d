#ifndef NCA_RENDER_HPP
#define NCA_RENDER_HPP

// SVG 1.1 and CSV output for a FactorPlane. Both renderers are pure functions
// of their inputs; identical planes give byte-identical files.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nca/error.hpp"
#include "nca/factor_plane.hpp"
#include "nca/format.hpp"
#include "nca/ingest.hpp"

namespace nca {

struct PlotStyle {
  double width = 960.0;
  double height = 720.0;
  double margin = 60.0;
  double legend_width = 260.0;
  double member_radius = 2.5;
  double investigation_radius = 3.0;  // times sqrt(count + 1)
  double trace_width = 2.0;
  int font_size = 12;
  std::vector<std::string> palette = {"#e377c2", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                      "#8c564b", "#17becf", "#bcbd22", "#7f7f7f", "#aec7e8", "#ffbb78",
                                      "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2", "#dbdb8d",
                                      "#9edae5", "#393b79"};
};

inline std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string axis_label(Index factor, double ratio) {
  return "Factor " + std::to_string(factor) + " (" + format_fixed(100.0 * ratio, 1) + "%)";
}

inline std::string render_svg(const FactorPlane& plane, const PlotStyle& style = {}) {
  // Data bounds, always including the origin.
  double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
  auto grow = [&](const PlanePoint& p) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  };
  for (const auto& t : plane.traces)
    for (const auto& p : t.points) grow(p);
  for (const auto& m : plane.members) grow(m.point);
  if (xmax - xmin <= 0.0) { xmin -= 1.0; xmax += 1.0; }
  if (ymax - ymin <= 0.0) { ymin -= 1.0; ymax += 1.0; }
  const double padx = 0.05 * (xmax - xmin), pady = 0.05 * (ymax - ymin);
  xmin -= padx; xmax += padx; ymin -= pady; ymax += pady;

  const double plot_w = style.width - style.legend_width - 2.0 * style.margin;
  const double plot_h = style.height - 2.0 * style.margin;
  const double scale = std::min(plot_w / (xmax - xmin), plot_h / (ymax - ymin));
  const double cx = style.margin + 0.5 * (plot_w - scale * (xmax - xmin)) - scale * xmin;
  const double cy = style.margin + 0.5 * (plot_h - scale * (ymax - ymin)) + scale * ymax;
  auto sx = [&](double x) { return format_fixed(cx + scale * x, 2); };
  auto sy = [&](double y) { return format_fixed(cy - scale * y, 2); };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" version=\"1.1\""
     << " width=\"" << format_fixed(style.width, 0) << "\" height=\"" << format_fixed(style.height, 0)
     << "\" viewBox=\"0 0 " << format_fixed(style.width, 0) << ' ' << format_fixed(style.height, 0) << "\">\n"
     << "<title>Factor plane</title>\n"
     << "<defs>\n"
     << "<g id=\"origin-cross\" stroke=\"#000000\" stroke-width=\"1.5\">"
     << "<line x1=\"-8\" y1=\"0\" x2=\"8\" y2=\"0\"/><line x1=\"0\" y1=\"-8\" x2=\"0\" y2=\"8\"/></g>\n"
     << "</defs>\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << format_fixed(style.width, 0) << "\" height=\""
     << format_fixed(style.height, 0) << "\" fill=\"#ffffff\"/>\n";

  const double left = style.margin, right = style.margin + plot_w;
  const double top = style.margin, bottom = style.margin + plot_h;
  os << "<g id=\"axes\" stroke=\"#999999\" stroke-width=\"1\">\n"
     << "<line x1=\"" << format_fixed(left, 2) << "\" y1=\"" << sy(0.0) << "\" x2=\"" << format_fixed(right, 2)
     << "\" y2=\"" << sy(0.0) << "\"/>\n"
     << "<line x1=\"" << sx(0.0) << "\" y1=\"" << format_fixed(top, 2) << "\" x2=\"" << sx(0.0) << "\" y2=\""
     << format_fixed(bottom, 2) << "\"/>\n"
     << "</g>\n";
  os << "<g id=\"axis-labels\" font-family=\"sans-serif\" font-size=\"" << style.font_size << "\" fill=\"#000000\">\n"
     << "<text x=\"" << format_fixed(right, 2) << "\" y=\"" << format_fixed(bottom + 2.0 * style.font_size, 2)
     << "\" text-anchor=\"end\">" << xml_escape(axis_label(plane.axes.first, plane.axis_ratios.first)) << "</text>\n"
     << "<text x=\"" << format_fixed(left - 1.5 * style.font_size, 2) << "\" y=\"" << format_fixed(top, 2)
     << "\" text-anchor=\"start\" transform=\"rotate(-90 " << format_fixed(left - 1.5 * style.font_size, 2) << ' '
     << format_fixed(top, 2) << ")\">" << xml_escape(axis_label(plane.axes.second, plane.axis_ratios.second))
     << "</text>\n"
     << "</g>\n";

  os << "<g id=\"traces\" fill=\"none\" stroke-width=\"" << format_fixed(style.trace_width, 1)
     << "\" stroke-linejoin=\"round\">\n";
  for (std::size_t i = 0; i < plane.traces.size(); ++i) {
    const auto& t = plane.traces[i];
    const std::string& color = style.palette[i % style.palette.size()];
    if (t.points.size() == 1 || std::all_of(t.points.begin(), t.points.end(),
                                            [&](const PlanePoint& p) { return p == t.points.front(); })) {
      if (t.points.empty()) continue;
      os << "<circle cx=\"" << sx(t.points[0].x) << "\" cy=\"" << sy(t.points[0].y) << "\" r=\"4\" fill=\"" << color
         << "\" stroke=\"none\"><title>" << xml_escape(t.label) << "</title></circle>\n";
      continue;
    }
    os << "<polyline stroke=\"" << color << "\" points=\"";
    for (std::size_t k = 0; k < t.points.size(); ++k)
      os << (k ? " " : "") << sx(t.points[k].x) << ',' << sy(t.points[k].y);
    os << "\"><title>" << xml_escape(t.label) << "</title></polyline>\n";
  }
  os << "</g>\n";

  os << "<g id=\"members\" fill=\"#9e9e9e\" fill-opacity=\"0.8\">\n";
  for (const auto& m : plane.members) {
    if (m.investigations && *m.investigations > 0) continue;
    os << "<circle cx=\"" << sx(m.point.x) << "\" cy=\"" << sy(m.point.y) << "\" r=\""
       << format_fixed(style.member_radius, 2) << "\"/>\n";
  }
  os << "</g>\n";
  os << "<g id=\"investigated\" fill=\"#d62728\" fill-opacity=\"0.7\">\n";
  for (const auto& m : plane.members) {
    if (!m.investigations || *m.investigations == 0) continue;
    const double r = style.investigation_radius * std::sqrt(static_cast<double>(*m.investigations) + 1.0);
    os << "<circle cx=\"" << sx(m.point.x) << "\" cy=\"" << sy(m.point.y) << "\" r=\"" << format_fixed(r, 2)
       << "\"/>\n";
  }
  os << "</g>\n";

  os << "<use xlink:href=\"#origin-cross\" x=\"" << sx(0.0) << "\" y=\"" << sy(0.0) << "\"/>\n";

  const double lx = style.width - style.legend_width + 10.0;
  os << "<g id=\"legend\" font-family=\"sans-serif\" font-size=\"" << style.font_size << "\">\n";
  for (std::size_t i = 0; i < plane.traces.size(); ++i) {
    const double ly = style.margin + static_cast<double>(i) * 1.6 * style.font_size;
    os << "<rect x=\"" << format_fixed(lx, 2) << "\" y=\"" << format_fixed(ly - 0.8 * style.font_size, 2)
       << "\" width=\"18\" height=\"" << format_fixed(0.8 * style.font_size, 2) << "\" fill=\""
       << style.palette[i % style.palette.size()] << "\"/>\n"
       << "<text x=\"" << format_fixed(lx + 24.0, 2) << "\" y=\"" << format_fixed(ly, 2) << "\">"
       << xml_escape(plane.traces[i].label) << "</text>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

/// Rows `kind,label,x,y,extra`: the origin, one row per trace point (extra =
/// quantile) and one per member (extra = investigation count, empty if none).
inline std::string render_csv(const FactorPlane& plane) {
  std::ostringstream os;
  os << "kind,label,x,y,extra\n";
  os << "origin,origin,0,0,\n";
  for (const auto& t : plane.traces)
    for (std::size_t k = 0; k < t.points.size(); ++k)
      os << "trace," << csv_escape(t.label) << ',' << format_double(t.points[k].x) << ','
         << format_double(t.points[k].y) << ',' << (k < t.quantiles.size() ? format_double(t.quantiles[k]) : "")
         << '\n';
  for (const auto& m : plane.members)
    os << "member," << csv_escape(m.member_id) << ',' << format_double(m.point.x) << ',' << format_double(m.point.y)
       << ',' << (m.investigations ? std::to_string(*m.investigations) : "") << '\n';
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(Errc::IoFailure, "cannot write " + path.string());
  os << text;
  if (!os) throw Error(Errc::IoFailure, "write failed: " + path.string());
}

inline void emit_svg(const FactorPlane& plane, const PlotStyle& style, const std::filesystem::path& path) {
  write_text(path, render_svg(plane, style));
}

inline void emit_csv(const FactorPlane& plane, const std::filesystem::path& path) {
  write_text(path, render_csv(plane));
}

struct PlaneCsvRow {
  std::string kind;
  std::string label;
  double x = 0.0;
  double y = 0.0;
  std::string extra;
};

inline std::vector<PlaneCsvRow> read_plane_csv(std::istream& in) {
  std::vector<std::string> f;
  if (!detail::read_csv_record(in, f) || f != std::vector<std::string>{"kind", "label", "x", "y", "extra"})
    throw Error(Errc::IoFailure, "plane csv: bad header");
  std::vector<PlaneCsvRow> rows;
  while (detail::read_csv_record(in, f)) {
    if (f.size() != 5) throw Error(Errc::IoFailure, "plane csv: expected 5 fields");
    rows.push_back({f[0], f[1], std::stod(f[2]), std::stod(f[3]), f[4]});
  }
  return rows;
}

}  // namespace nca

#endif  // NCA_RENDER_HPP
