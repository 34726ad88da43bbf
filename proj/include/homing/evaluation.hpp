#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "homing/dataset.hpp"
#include "homing/network.hpp"
#include "homing/omni.hpp"

namespace homing {

struct EvalRecord {
  Position2D position;
  HomeVector predicted;
  HomeVector truth;
  double error_deg = 0.0;   ///< NaN when the prediction has no direction
  double confidence = 0.0;  ///< norm of the raw prediction
  bool defined = true;
};

/// Per-location predictions with aggregate error statistics (population std).
struct EvalReport {
  HeadingAngle gaze;
  std::vector<EvalRecord> records;
  double mean_error_deg = 0.0;
  double std_error_deg = 0.0;
  int undefined_count = 0;

  /// Recomputes the aggregates from the records.
  void summarize();
};

/// Builds a record for one prediction; zero or non-finite predictions are flagged undefined.
EvalRecord make_record(Position2D position, Position2D nest, HeadingAngle gaze, HomeVector predicted);

/// Renders every location with the training pipeline and evaluates the network at one gaze.
EvalReport bearing_map(const Params& params, const LandmarkWorld& world, const ImagingPipeline& imaging,
                       std::span<const Position2D> locations, HeadingAngle gaze = HeadingAngle{});

/// Same as bearing_map for several networks, rendering each location once.
std::vector<EvalReport> bearing_maps(std::span<const Params* const> networks, const LandmarkWorld& world,
                                     const ImagingPipeline& imaging, std::span<const Position2D> locations,
                                     HeadingAngle gaze = HeadingAngle{});

/// Axis-aligned evaluation domain.
struct Box {
  double min_x = 0, min_y = 0, max_x = 0, max_y = 0;
  bool contains(Position2D p) const { return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y; }
};

/// Bounding box of the pattern's locations and the nest, grown by `margin` meters.
Box evaluation_domain(const TrajectoryPattern& pattern, Position2D nest, double margin = 1.0);

enum class StreamTermination { kConverged, kMaxSteps, kLeftDomain, kUndefinedDirection };
const char* to_string(StreamTermination t);

struct StreamConfig {
  double step = 0.25;
  int max_steps = 200;
  double convergence_radius = 0.25;
  /// A trace has converged once its last `stall_window` points all lie within
  /// convergence_radius of their centroid.
  int stall_window = 8;
  /// Also stop as soon as the trace is within convergence_radius of the nest.
  bool stop_at_nest = false;
  Box domain;
};

struct StreamTrace {
  std::vector<Position2D> points;
  StreamTermination reason = StreamTermination::kMaxSteps;
  /// Convergence point: centroid of the stall window when stalled, else the last point.
  Position2D endpoint;
};

/// Follows the network's north-gaze home vectors as a unit-speed field from `start`.
StreamTrace stream_integrate(const Params& params, const LandmarkWorld& world, const ImagingPipeline& imaging,
                             Position2D start, const StreamConfig& config);

/// `count` starts equally spaced on a circle around `center`, first one due north.
std::vector<Position2D> perimeter_starts(Position2D center, double radius, int count);

struct ConvergenceSummary {
  Position2D centroid;
  double centroid_to_nest = 0.0;
  std::vector<double> endpoint_distances;
  int converged = 0;
};

ConvergenceSummary convergence_analysis(std::span<const StreamTrace> traces, Position2D nest);

/// Least-squares intersection of the predicted bearing lines of a report (world frame).
Position2D implied_convergence_point(const EvalReport& report);

struct RotationStudy {
  EvalReport before;
  EvalReport after;
  Position2D implied_before;
  Position2D implied_after;
};

/// Rotates the landmark array (counterclockwise, degrees) and re-evaluates with frozen parameters.
RotationStudy rotate_landmarks_experiment(const LandmarkWorld& world, const Params& params,
                                          const ImagingPipeline& imaging, std::span<const Position2D> locations,
                                          double rotation_deg, HeadingAngle gaze = HeadingAngle{});

/// Output-gradient saliency of the second convolution, summarized per feature row.
struct SaliencySummary {
  FeatureMap<double> gradient_x;
  FeatureMap<double> gradient_y;
  /// Sum of |gradient * activation| per conv2 row, for x and y outputs.
  std::vector<double> row_energy_x, row_energy_y;
  /// Elevation (degrees) at the center of each conv2 row's receptive field.
  std::vector<double> row_elevation_deg;
  int dominant_row_x = 0;
  int dominant_row_y = 0;
};

SaliencySummary saliency_analysis(const Params& params, const PanoramaImage& view);

void write_eval_csv(const EvalReport& report, const std::filesystem::path& path);
void write_stream_csv(const StreamTrace& trace, const std::filesystem::path& path);

}  // namespace homing
