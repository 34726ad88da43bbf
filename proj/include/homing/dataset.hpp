#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "homing/geometry.hpp"
#include "homing/omni.hpp"
#include "homing/world.hpp"

namespace homing {

/// Square lattice spanning `side` meters per axis (side / spacing + 1 points per axis).
struct GridPattern {
  Position2D center;
  double side = 9.0;
  double spacing = 1.0;
};

/// Archimedean spiral r = a * theta sampled at theta = 0, step, ..., theta_max.
struct SpiralPattern {
  Position2D center;
  double a = 0.25;
  double theta_max = 8.0 * kPi;
  double theta_step = 0.08 * kPi;
};

using TrajectoryPattern = std::variant<GridPattern, SpiralPattern>;

/// 10 x 10 points at 1 m spacing, shifted so the nest is a lattice point.
GridPattern learning_grid(Position2D nest);
/// 41 x 41 points at 0.25 m spacing centered on the nest.
GridPattern evaluation_grid(Position2D nest, double side = 10.0, double spacing = 0.25);
SpiralPattern learning_spiral(Position2D nest);

/// Lattice points in row-major order (south to north, west to east), nest removed.
std::vector<Position2D> grid_locations(const GridPattern& pattern, Position2D nest);
std::vector<Position2D> spiral_locations(const SpiralPattern& pattern, Position2D nest);
std::vector<Position2D> pattern_locations(const TrajectoryPattern& pattern, Position2D nest);

/// Distance from the nest to the farthest sample location.
double pattern_extent(const TrajectoryPattern& pattern, Position2D nest);

struct DatasetSpec {
  TrajectoryPattern pattern;
  int gaze_count = 360;
  double label_noise_sigma_deg = 0.0;
  std::uint64_t shuffle_seed = 1;
};

struct TrainingExample {
  PanoramaImage view;
  HomeVector label;
  Position2D location;
  HeadingAngle gaze;
};

/// Training set stored as one base view per location plus (location, gaze) references.
/// Views for other gazes are column rolls of the base view.
class Dataset {
 public:
  struct Entry {
    int location = 0;
    int gaze_index = 0;
    HomeVector label;        ///< training target (noisy when label noise is on)
    HomeVector clean_label;  ///< geometric ground truth
  };

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Entry& entry(std::size_t i) const { return entries_[i]; }
  const std::vector<Entry>& entries() const { return entries_; }

  const std::vector<Position2D>& locations() const { return locations_; }
  const std::vector<PanoramaImage>& base_views() const { return *base_views_; }
  Position2D nest() const { return nest_; }
  int gaze_count() const { return gaze_count_; }
  int rows() const { return base_views().empty() ? 0 : base_views().front().rows(); }
  int cols() const { return base_views().empty() ? 0 : base_views().front().cols(); }

  /// Number of cubemap renders performed to build the set (one per location).
  int render_count() const { return render_count_; }

  int shift_columns_of(std::size_t i) const;
  HeadingAngle gaze_of(std::size_t i) const;
  Position2D location_of(std::size_t i) const { return locations_[entries_[i].location]; }

  /// Writes the rolled view of example i into `out` (rows * cols pixels).
  void fill_view(std::size_t i, std::span<float> out) const;
  TrainingExample example(std::size_t i) const;

  /// Assembles a dataset from already-rendered base views (gaze north).
  static Dataset assemble(std::vector<Position2D> locations, std::vector<PanoramaImage> base_views, Position2D nest,
                          int gaze_count, double label_noise_sigma_deg, std::uint64_t shuffle_seed, int render_count);

  /// Same views with a fresh order and label noise; the base views are shared, not copied.
  Dataset reshuffled(std::uint64_t shuffle_seed, double label_noise_sigma_deg) const;

 private:
  std::vector<Position2D> locations_;
  std::shared_ptr<const std::vector<PanoramaImage>> base_views_ = std::make_shared<std::vector<PanoramaImage>>();
  std::vector<Entry> entries_;
  Position2D nest_;
  int gaze_count_ = 0;
  int render_count_ = 0;

  void order_entries(double label_noise_sigma_deg, std::uint64_t shuffle_seed);
};

/// Renders every pattern location once, expands each to gaze_count gazes and shuffles.
Dataset build_dataset(const LandmarkWorld& world, const DatasetSpec& spec, const ImagingPipeline& imaging);

/// Perturbs the label angle by a N(0, sigma) draw (degrees) and re-encodes it on the unit circle.
HomeVector add_label_noise(HomeVector label, double sigma_deg, std::mt19937_64& rng);

/// CSV manifest: index,x,y,gaze_deg,label_x,label_y,image_path
void write_dataset_manifest(const Dataset& dataset, const std::filesystem::path& path,
                            const std::vector<std::string>& image_paths = {});

}  // namespace homing
