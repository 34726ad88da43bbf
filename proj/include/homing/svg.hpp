#pragma once

#include <filesystem>
#include <span>

#include "homing/evaluation.hpp"
#include "homing/mission.hpp"

namespace homing {

/// Predicted world-frame home directions as arrows, colored by angular error.
void write_quiver_svg(const EvalReport& report, const LandmarkWorld& world, const std::filesystem::path& path);

/// Per-location angular error as filled cells of side `cell` meters.
void write_error_heatmap_svg(const EvalReport& report, const LandmarkWorld& world, double cell,
                             const std::filesystem::path& path);

void write_stream_svg(std::span<const StreamTrace> traces, const LandmarkWorld& world, const Box& domain,
                      const std::filesystem::path& path);

/// Phase-colored mission trajectories.
void write_runs_svg(std::span<const HomingRun> runs, const LandmarkWorld& world, const std::filesystem::path& path);

}  // namespace homing
