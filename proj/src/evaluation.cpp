#include "homing/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>

#include "homing/error.hpp"
#include "homing/parallel.hpp"

namespace homing {

void EvalReport::summarize() {
  double sum = 0.0;
  int n = 0;
  undefined_count = 0;
  for (const auto& r : records) {
    if (!r.defined) {
      ++undefined_count;
      continue;
    }
    sum += r.error_deg;
    ++n;
  }
  if (n == 0) {
    mean_error_deg = std::numeric_limits<double>::quiet_NaN();
    std_error_deg = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  mean_error_deg = sum / n;
  double var = 0.0;
  for (const auto& r : records) {
    if (r.defined) var += (r.error_deg - mean_error_deg) * (r.error_deg - mean_error_deg);
  }
  std_error_deg = std::sqrt(var / n);
}

EvalRecord make_record(Position2D position, Position2D nest, HeadingAngle gaze, HomeVector predicted) {
  EvalRecord r;
  r.position = position;
  r.predicted = predicted;
  r.truth = relative_home_vector(position, nest, gaze);
  r.confidence = predicted.norm();
  r.defined = r.confidence > 0.0 && std::isfinite(r.confidence);
  r.error_deg = r.defined ? angular_error_deg(predicted, r.truth) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

std::vector<EvalReport> bearing_maps(std::span<const Params* const> networks, const LandmarkWorld& world,
                                     const ImagingPipeline& imaging, std::span<const Position2D> locations,
                                     HeadingAngle gaze) {
  std::vector<EvalReport> reports(networks.size());
  for (auto& r : reports) {
    r.gaze = gaze;
    r.records.resize(locations.size());
  }
  parallel_for(locations.size(), [&](std::size_t begin, std::size_t end) {
    ActivationCache<double> cache;
    for (std::size_t i = begin; i < end; ++i) {
      const PanoramaImage view = imaging.capture(world, locations[i], gaze);
      for (std::size_t k = 0; k < networks.size(); ++k) {
        const HomeVector pred = forward(*networks[k], view, cache);
        reports[k].records[i] = make_record(locations[i], world.nest, gaze, pred);
      }
    }
  });
  for (auto& r : reports) r.summarize();
  return reports;
}

EvalReport bearing_map(const Params& params, const LandmarkWorld& world, const ImagingPipeline& imaging,
                       std::span<const Position2D> locations, HeadingAngle gaze) {
  const Params* one[] = {&params};
  return std::move(bearing_maps(one, world, imaging, locations, gaze).front());
}

Box evaluation_domain(const TrajectoryPattern& pattern, Position2D nest, double margin) {
  Box b{nest.x, nest.y, nest.x, nest.y};
  for (const auto& p : pattern_locations(pattern, nest)) {
    b.min_x = std::min(b.min_x, p.x);
    b.min_y = std::min(b.min_y, p.y);
    b.max_x = std::max(b.max_x, p.x);
    b.max_y = std::max(b.max_y, p.y);
  }
  return {b.min_x - margin, b.min_y - margin, b.max_x + margin, b.max_y + margin};
}

const char* to_string(StreamTermination t) {
  switch (t) {
    case StreamTermination::kConverged: return "converged";
    case StreamTermination::kMaxSteps: return "max_steps";
    case StreamTermination::kLeftDomain: return "left_domain";
    case StreamTermination::kUndefinedDirection: return "undefined_direction";
  }
  return "unknown";
}

namespace {

Position2D centroid_of(std::span<const Position2D> pts) {
  Position2D c{0.0, 0.0};
  for (const auto& p : pts) {
    c.x += p.x;
    c.y += p.y;
  }
  c.x /= static_cast<double>(pts.size());
  c.y /= static_cast<double>(pts.size());
  return c;
}

}  // namespace

StreamTrace stream_integrate(const Params& params, const LandmarkWorld& world, const ImagingPipeline& imaging,
                             Position2D start, const StreamConfig& config) {
  if (!(config.step > 0.0)) throw InvalidArgument("stream_integrate: step must be > 0");
  StreamTrace trace;
  trace.points.push_back(start);
  trace.reason = StreamTermination::kMaxSteps;
  ActivationCache<double> cache;
  Position2D pos = start;
  for (int k = 0; k < config.max_steps; ++k) {
    if (config.stop_at_nest && distance(pos, world.nest) <= config.convergence_radius) {
      trace.reason = StreamTermination::kConverged;
      break;
    }
    const auto window = static_cast<std::size_t>(std::max(2, config.stall_window));
    if (trace.points.size() >= window) {
      const std::span<const Position2D> tail(trace.points.data() + trace.points.size() - window, window);
      const Position2D c = centroid_of(tail);
      const bool stalled = std::all_of(tail.begin(), tail.end(),
                                       [&](const Position2D& p) { return distance(p, c) <= config.convergence_radius; });
      if (stalled) {
        trace.reason = StreamTermination::kConverged;
        trace.endpoint = c;
        return trace;
      }
    }
    const PanoramaImage view = imaging.capture(world, pos, HeadingAngle{});
    const HomeVector pred = forward(params, view, cache);
    const Vec2 dir = egocentric_to_world(pred, view.gaze);
    const double n = dir.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      trace.reason = StreamTermination::kUndefinedDirection;
      break;
    }
    const Position2D next = pos + (config.step / n) * dir;
    trace.points.push_back(next);
    pos = next;
    if (!config.domain.contains(pos)) {
      trace.reason = StreamTermination::kLeftDomain;
      break;
    }
  }
  trace.endpoint = trace.points.back();
  return trace;
}

std::vector<Position2D> perimeter_starts(Position2D center, double radius, int count) {
  std::vector<Position2D> out;
  for (int i = 0; i < count; ++i) {
    const HeadingAngle h(kTwoPi * i / count);
    out.push_back(center + radius * h.direction());
  }
  return out;
}

ConvergenceSummary convergence_analysis(std::span<const StreamTrace> traces, Position2D nest) {
  if (traces.empty()) throw InvalidArgument("convergence_analysis: no traces");
  ConvergenceSummary s;
  std::vector<Position2D> ends;
  for (const auto& t : traces) {
    ends.push_back(t.endpoint);
    s.endpoint_distances.push_back(distance(t.endpoint, nest));
    if (t.reason == StreamTermination::kConverged) ++s.converged;
  }
  s.centroid = centroid_of(ends);
  s.centroid_to_nest = distance(s.centroid, nest);
  return s;
}

Position2D implied_convergence_point(const EvalReport& report) {
  // Minimize sum of squared distances to the lines x_i + t d_i: (sum P_i) p = sum P_i x_i, P = I - d d^T.
  double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
  for (const auto& r : report.records) {
    if (!r.defined) continue;
    const Vec2 d = egocentric_to_world(r.predicted, report.gaze);
    const double n = d.norm();
    const double dx = d.x / n, dy = d.y / n;
    const double p11 = 1 - dx * dx, p12 = -dx * dy, p22 = 1 - dy * dy;
    a11 += p11;
    a12 += p12;
    a22 += p22;
    b1 += p11 * r.position.x + p12 * r.position.y;
    b2 += p12 * r.position.x + p22 * r.position.y;
  }
  const double det = a11 * a22 - a12 * a12;
  if (!(std::abs(det) > 1e-12)) throw UndefinedDirection("implied_convergence_point: bearing lines are parallel");
  return {(a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det};
}

RotationStudy rotate_landmarks_experiment(const LandmarkWorld& world, const Params& params,
                                          const ImagingPipeline& imaging, std::span<const Position2D> locations,
                                          double rotation_deg, HeadingAngle gaze) {
  RotationStudy s;
  s.before = bearing_map(params, world, imaging, locations, gaze);
  const LandmarkWorld rotated = rotate_landmark_array(world, rotation_deg);
  s.after = bearing_map(params, rotated, imaging, locations, gaze);
  s.implied_before = implied_convergence_point(s.before);
  s.implied_after = implied_convergence_point(s.after);
  return s;
}

SaliencySummary saliency_analysis(const Params& params, const PanoramaImage& view) {
  SaliencySummary s;
  s.gradient_x = output_gradients_wrt_conv2(params, view, 0);
  s.gradient_y = output_gradients_wrt_conv2(params, view, 1);
  ActivationCache<double> cache;
  forward(params, view, cache);
  const NetworkShape& shape = params.shape();
  const int rows = shape.conv2_rows();
  s.row_energy_x.assign(rows, 0.0);
  s.row_energy_y.assign(rows, 0.0);
  for (int c = 0; c < shape.conv2_channels; ++c) {
    for (int r = 0; r < rows; ++r) {
      for (int w = 0; w < shape.conv2_cols(); ++w) {
        const double a = cache.conv2_post.at(c, r, w);
        s.row_energy_x[r] += std::abs(s.gradient_x.at(c, r, w) * a);
        s.row_energy_y[r] += std::abs(s.gradient_y.at(c, r, w) * a);
      }
    }
  }
  // conv2 row r sees input rows [r*s*s, r*s*s + (k-1)*s + k - 1].
  const int field = (shape.kernel - 1) * shape.stride + shape.kernel;
  for (int r = 0; r < rows; ++r) {
    const double center_row = r * shape.stride * shape.stride + 0.5 * (field - 1);
    const double hi = view.elevation.hi_deg, lo = view.elevation.lo_deg;
    s.row_elevation_deg.push_back(hi - center_row * (hi - lo) / (view.rows() - 1));
  }
  s.dominant_row_x = static_cast<int>(std::max_element(s.row_energy_x.begin(), s.row_energy_x.end()) -
                                      s.row_energy_x.begin());
  s.dominant_row_y = static_cast<int>(std::max_element(s.row_energy_y.begin(), s.row_energy_y.end()) -
                                      s.row_energy_y.begin());
  return s;
}

void write_eval_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "x,y,pred_x,pred_y,err_deg,confidence\n";
  char buf[256];
  for (const auto& r : report.records) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.9f,%.9f,%.6f,%.9f\n", r.position.x, r.position.y, r.predicted.x,
                  r.predicted.y, r.error_deg, r.confidence);
    out << buf;
  }
}

void write_stream_csv(const StreamTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "step,x,y\n";
  char buf[128];
  for (std::size_t i = 0; i < trace.points.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f\n", i, trace.points[i].x, trace.points[i].y);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "# termination=%s endpoint=%.6f,%.6f\n", to_string(trace.reason), trace.endpoint.x,
                trace.endpoint.y);
  out << buf;
}

}  // namespace homing
