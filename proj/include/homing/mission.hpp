#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "homing/dataset.hpp"
#include "homing/network.hpp"
#include "homing/omni.hpp"

namespace homing {

enum class Phase { kLearning, kOutbound, kInbound, kHoming };
const char* to_string(Phase p);

/// One straight outbound leg; heading counterclockwise from north.
struct OutboundLeg {
  double heading_deg = 0.0;
  double distance = 30.0;
};

enum class DriftRule {
  kStopAtLearningBoundary,  ///< inbound ends where the straight path enters the learning region
  kFixedOffset,             ///< believed position is true - drift_offset; the believed path to the region is flown
  kGaussian,                ///< isotropic odometry noise per inbound step, then truncates at the region
};
const char* to_string(DriftRule r);

struct MissionSpec {
  TrajectoryPattern pattern;
  std::vector<OutboundLeg> outbound{OutboundLeg{}};
  DriftRule drift_rule = DriftRule::kStopAtLearningBoundary;
  Vec2 drift_offset{0.0, 0.0};
  double drift_sigma = 0.05;  ///< meters per sqrt(meter) flown
  double inbound_step = 1.0;
  double homing_step = 0.25;
  double success_radius = 0.25;
  int max_homing_steps = 200;

  /// Throws InvalidArgument for non-positive steps or radii, or an empty outbound plan.
  void validate() const;
};

struct RunPoint {
  Phase phase = Phase::kLearning;
  int step = 0;
  Position2D position;
  double heading_deg = 0.0;
  HomeVector predicted;      ///< zero outside the homing phase
  double view_gaze_deg = 0;  ///< gaze annotation of the view used at this homing step
};

struct HomingRun {
  std::vector<RunPoint> points;
  bool success = false;
  int homing_steps = 0;
  std::string failure_reason;
  Position2D homing_start;
  std::uint64_t seed = 0;

  std::vector<Position2D> homing_path() const;
};

/// Smallest possible number of homing steps from `start`: ceil((d - success_radius) / step), at least 0.
int straight_line_step_bound(Position2D start, Position2D nest, double step, double success_radius);

/// Where the inbound flight from `from` toward the nest enters the learning region.
Position2D learning_region_entry(const TrajectoryPattern& pattern, Position2D nest, Position2D from);

/// Learning, outbound and inbound phases with the visual homing loop flown by a given network.
HomingRun fly_mission(const LandmarkWorld& world, const MissionSpec& spec, const ImagingPipeline& imaging,
                      const Params& params, std::uint64_t seed = 0);

/// Visual homing only, from `start` with initial heading `heading`.
HomingRun home_from(const LandmarkWorld& world, const MissionSpec& spec, const ImagingPipeline& imaging,
                    const Params& params, Position2D start, HeadingAngle heading);

/// Trains a fresh network (init and shuffle seeded by `seed`) and flies the mission.
HomingRun run_mission(const LandmarkWorld& world, const MissionSpec& spec, const TrainConfig& train_config,
                      const ImagingPipeline& imaging, std::uint64_t seed);

enum class BatchPairing { kCross, kZip };

struct BatchSummary {
  int runs = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_steps_successful = 0.0;  ///< NaN when no run succeeded
  double mean_steps_all = 0.0;
  /// Per start: homing positions averaged over seeds, shorter runs held at their last point.
  std::vector<std::vector<Position2D>> mean_trajectories;
};

struct BatchResult {
  std::vector<HomingRun> runs;
  std::vector<int> start_index;  ///< start of each run
  BatchSummary summary;
};

/// One network per seed, trained on a dataset rendered once. `starts` are outbound plans.
/// kCross flies every start with every seed; kZip pairs start i with seed i.
BatchResult run_batch(const LandmarkWorld& world, const MissionSpec& spec,
                      std::span<const std::vector<OutboundLeg>> starts, std::span<const std::uint64_t> seeds,
                      const TrainConfig& train_config, const ImagingPipeline& imaging,
                      BatchPairing pairing = BatchPairing::kCross, const Dataset* prebuilt = nullptr);

/// Same as run_batch with already trained networks, one per seed.
BatchResult fly_batch(const LandmarkWorld& world, const MissionSpec& spec,
                      std::span<const std::vector<OutboundLeg>> starts, std::span<const Params> networks,
                      std::span<const std::uint64_t> seeds, const ImagingPipeline& imaging,
                      BatchPairing pairing = BatchPairing::kCross);

BatchSummary summarize_batch(std::span<const HomingRun> runs, std::span<const int> start_index, int start_count);

/// `count` single-leg outbound plans with headings 0, 360/count, ... degrees.
std::vector<std::vector<OutboundLeg>> perimeter_outbound(int count, double distance);

/// Columns: phase,step,x,y,heading_deg,pred_x,pred_y,gaze_deg
void write_run_csv(const HomingRun& run, const std::filesystem::path& path);
/// key = value report.
void write_batch_report(const BatchResult& batch, const std::filesystem::path& path);

}  // namespace homing
