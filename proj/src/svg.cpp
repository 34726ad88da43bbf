#include "homing/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "homing/error.hpp"

namespace homing {
namespace {

constexpr double kCanvas = 800.0;
constexpr double kMargin = 20.0;

// World meters to SVG pixels, north up.
class Canvas {
 public:
  Canvas(const Box& box, const std::filesystem::path& path) : box_(box), out_(path) {
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
    const double span = std::max(box.max_x - box.min_x, box.max_y - box.min_y);
    scale_ = (kCanvas - 2 * kMargin) / std::max(span, 1e-9);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n"
                  "<rect width=\"100%%\" height=\"100%%\" fill=\"white\"/>\n",
                  kCanvas, kCanvas, kCanvas, kCanvas);
    out_ << buf;
  }
  ~Canvas() { out_ << "</svg>\n"; }

  double px(double x) const { return kMargin + (x - box_.min_x) * scale_; }
  double py(double y) const { return kCanvas - kMargin - (y - box_.min_y) * scale_; }
  double len(double m) const { return m * scale_; }

  void circle(Position2D c, double r_m, const char* fill, const char* stroke = "none") {
    char buf[256];
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"%s\" stroke=\"%s\"/>\n", px(c.x),
                  py(c.y), std::max(len(r_m), 1.5), fill, stroke);
    out_ << buf;
  }
  void line(Position2D a, Position2D b, const std::string& color, double width) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\" stroke-width=\"%.2f\"/>\n", px(a.x),
                  py(a.y), px(b.x), py(b.y), color.c_str(), width);
    out_ << buf;
  }
  void rect(Position2D center, double side_m, const std::string& fill) {
    char buf[256];
    const double s = len(side_m);
    std::snprintf(buf, sizeof buf, "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"%s\"/>\n",
                  px(center.x) - s / 2, py(center.y) - s / 2, s, s, fill.c_str());
    out_ << buf;
  }
  void polyline(std::span<const Position2D> pts, const std::string& color, double width) {
    out_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << "\" points=\"";
    char buf[64];
    for (const auto& p : pts) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(p.x), py(p.y));
      out_ << buf;
    }
    out_ << "\"/>\n";
  }
  void text(Position2D at, const std::string& s) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" font-family=\"sans-serif\">", px(at.x),
                  py(at.y));
    out_ << buf << s << "</text>\n";
  }

 private:
  Box box_;
  std::ofstream out_;
  double scale_ = 1.0;
};

// 0 deg -> green, 90 deg and above -> red.
std::string error_color(double err_deg) {
  if (!std::isfinite(err_deg)) return "#808080";
  const double t = std::clamp(err_deg / 90.0, 0.0, 1.0);
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x30", int(40 + 200 * t), int(200 - 160 * t));
  return buf;
}

Box bounds_of(std::span<const Position2D> pts, Position2D nest, double margin) {
  Box b{nest.x, nest.y, nest.x, nest.y};
  for (const auto& p : pts) {
    b.min_x = std::min(b.min_x, p.x);
    b.min_y = std::min(b.min_y, p.y);
    b.max_x = std::max(b.max_x, p.x);
    b.max_y = std::max(b.max_y, p.y);
  }
  return {b.min_x - margin, b.min_y - margin, b.max_x + margin, b.max_y + margin};
}

void draw_scene(Canvas& c, const LandmarkWorld& world, const Box& box) {
  for (const auto& t : world.landmarks) {
    const Position2D p = t.position;
    if (!box.contains(p)) continue;
    c.circle(p, t.canopy_radius, "#cfe8cf", "#7a9a7a");
    c.circle(p, t.trunk_radius, "#6b4f2a");
  }
  c.circle(world.nest, 0.12, "#1f4fbf");
}

std::vector<Position2D> report_positions(const EvalReport& report) {
  std::vector<Position2D> out;
  for (const auto& r : report.records) out.push_back(r.position);
  return out;
}

}  // namespace

void write_quiver_svg(const EvalReport& report, const LandmarkWorld& world, const std::filesystem::path& path) {
  const auto pts = report_positions(report);
  const Box box = bounds_of(pts, world.nest, 1.0);
  Canvas c(box, path);
  draw_scene(c, world, box);
  double spacing = 1.0;
  if (pts.size() > 1) {
    spacing = 1e9;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double d = distance(pts[i], pts[i - 1]);
      if (d > 1e-9) spacing = std::min(spacing, d);
    }
  }
  for (const auto& r : report.records) {
    if (!r.defined) {
      c.circle(r.position, 0.03, "#808080");
      continue;
    }
    const Vec2 d = egocentric_to_world(r.predicted, report.gaze);
    const Vec2 u = (0.8 * spacing / d.norm()) * d;
    const Position2D tip = r.position + u;
    const std::string col = error_color(r.error_deg);
    c.line(r.position, tip, col, 1.2);
    const Vec2 back = -0.3 * u;
    const Vec2 side{-0.15 * u.y, 0.15 * u.x};
    c.line(tip, tip + back + side, col, 1.2);
    c.line(tip, tip + (back - side), col, 1.2);
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "mean error %.2f deg, std %.2f deg", report.mean_error_deg, report.std_error_deg);
  c.text({box.min_x + 0.2, box.max_y - 0.4}, buf);
}

void write_error_heatmap_svg(const EvalReport& report, const LandmarkWorld& world, double cell,
                             const std::filesystem::path& path) {
  if (!(cell > 0.0)) throw InvalidArgument("heatmap cell must be > 0");
  const auto pts = report_positions(report);
  const Box box = bounds_of(pts, world.nest, cell);
  Canvas c(box, path);
  for (const auto& r : report.records) c.rect(r.position, cell, error_color(r.error_deg));
  draw_scene(c, world, box);
}

void write_stream_svg(std::span<const StreamTrace> traces, const LandmarkWorld& world, const Box& domain,
                      const std::filesystem::path& path) {
  Canvas c(domain, path);
  draw_scene(c, world, domain);
  for (const auto& t : traces) {
    c.polyline(t.points, "#303030", 1.0);
    c.circle(t.points.front(), 0.04, "#303030");
    c.circle(t.endpoint, 0.06, t.reason == StreamTermination::kConverged ? "#d02020" : "#e0a000");
  }
}

void write_runs_svg(std::span<const HomingRun> runs, const LandmarkWorld& world, const std::filesystem::path& path) {
  std::vector<Position2D> pts;
  for (const auto& r : runs)
    for (const auto& p : r.points) pts.push_back(p.position);
  const Box box = bounds_of(pts, world.nest, 2.0);
  Canvas c(box, path);
  draw_scene(c, world, box);
  static const char* colors[] = {"#9a9a9a", "#2f7fd0", "#e08020", "#c02020"};
  for (const auto& r : runs) {
    for (int ph = 0; ph < 4; ++ph) {
      std::vector<Position2D> seg;
      for (const auto& p : r.points)
        if (static_cast<int>(p.phase) == ph) seg.push_back(p.position);
      if (seg.empty()) continue;
      if (ph == 0) {
        for (const auto& q : seg) c.circle(q, 0.02, colors[0]);
      } else {
        c.polyline(seg, colors[ph], ph == 3 ? 1.6 : 1.0);
      }
    }
  }
}

}  // namespace homing
