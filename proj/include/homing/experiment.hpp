#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "homing/dataset.hpp"
#include "homing/error.hpp"
#include "homing/keyvalue.hpp"
#include "homing/mission.hpp"
#include "homing/network.hpp"
#include "homing/omni.hpp"

namespace homing {

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A stage input (model file, world file) does not exist.
class MissingInputError : public Error {
 public:
  using Error::Error;
};

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitMissingInput = 3,
  kExitNumeric = 4,
};

/// Everything one experiment needs, read from a flat `key = value` file.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";

  std::string world_preset = "three-tree";
  std::filesystem::path world_file;
  std::string imaging = "full";  ///< full | reduced

  std::string pattern = "spiral";  ///< spiral | grid
  double grid_side = 9.0;
  double grid_spacing = 1.0;
  Vec2 grid_offset{0.5, 0.5};
  double spiral_a = 0.25;
  double spiral_turns = 4.0;
  double spiral_step_deg = 14.4;

  int gaze_count = 360;
  double label_noise_deg = 0.0;
  bool dataset_images = false;

  TrainConfig train;
  std::filesystem::path model;  ///< empty: <out>/model.bin

  std::string eval_locations = "grid";  ///< grid | training
  double eval_side = 10.0;
  double eval_spacing = 0.25;
  double eval_gaze_deg = 0.0;

  int stream_starts = 12;
  double stream_radius = 5.0;
  double stream_step = 0.25;
  int stream_max_steps = 200;
  double stream_margin = 1.0;
  bool stream_stop_at_nest = false;

  Vec2 gradcam_offset{2.0, 2.0};
  double gradcam_gaze_deg = 0.0;

  double rotate_deg = 90.0;

  int mission_starts = 12;
  double mission_outbound = 30.0;
  std::vector<std::uint64_t> mission_seeds;  ///< empty: {seed}
  BatchPairing mission_pairing = BatchPairing::kCross;
  DriftRule mission_drift = DriftRule::kStopAtLearningBoundary;
  Vec2 mission_drift_offset{0.0, 0.0};
  double mission_drift_sigma = 0.05;
  double mission_inbound_step = 1.0;
  double mission_homing_step = 0.25;
  double mission_success_radius = 0.25;
  int mission_max_steps = 200;

  std::vector<double> noise_sigmas{0.0, 10.0};
  std::vector<std::string> noise_patterns{"grid", "spiral"};

  std::vector<std::string> commands;  ///< for `run`
  std::string source = "<config>";
  std::vector<std::string> overrides;

  /// Throws ConfigError naming the line and key for unknown keys or bad values.
  static ExperimentConfig from_document(const KeyValueDocument& doc);

  LandmarkWorld make_world() const;
  ImagingConfig imaging_config() const;
  TrajectoryPattern training_pattern(const std::string& kind, Position2D nest) const;
  TrajectoryPattern training_pattern(Position2D nest) const { return training_pattern(pattern, nest); }
  DatasetSpec dataset_spec(Position2D nest) const;
  MissionSpec mission_spec(Position2D nest) const;
  std::vector<std::uint64_t> seeds() const;
  std::filesystem::path model_path() const;
};

std::vector<std::string> preset_names();
/// Config text of an embedded preset; throws ConfigError for unknown names.
std::string preset_text(const std::string& name);

/// Parses `text`, applies `key=value` overrides (later wins) and builds the config.
ExperimentConfig load_experiment(const std::string& text, const std::string& source,
                                 const std::vector<std::string>& overrides);

std::vector<std::string> command_names();

/// Runs one command (or `run` for the config's command list), writing artifacts and a
/// manifest under config.out. Returns an ExitCode; diagnostics go to `log`.
int run_command(const std::string& command, const ExperimentConfig& config, std::ostream& log);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace homing
