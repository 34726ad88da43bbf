#include "homing/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "homing/error.hpp"
#include "homing/parallel.hpp"

namespace homing {

GridPattern learning_grid(Position2D nest) { return GridPattern{{nest.x + 0.5, nest.y + 0.5}, 9.0, 1.0}; }

GridPattern evaluation_grid(Position2D nest, double side, double spacing) { return GridPattern{nest, side, spacing}; }

SpiralPattern learning_spiral(Position2D nest) { return SpiralPattern{nest, 0.25, 8.0 * kPi, 0.08 * kPi}; }

std::vector<Position2D> grid_locations(const GridPattern& p, Position2D nest) {
  if (!(p.spacing > 0.0)) throw InvalidArgument("grid: spacing must be > 0");
  if (p.side < 0.0) throw InvalidArgument("grid: side must be >= 0");
  const double cells = p.side / p.spacing;
  const double whole = std::round(cells);
  if (std::abs(cells - whole) > 1e-9 * std::max(1.0, cells)) {
    throw InvalidArgument("grid: side / spacing must be a whole number");
  }
  const int n = static_cast<int>(whole) + 1;
  const double half = 0.5 * p.side;
  std::vector<Position2D> out;
  out.reserve(static_cast<std::size_t>(n) * n);
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      const Position2D q{p.center.x - half + ix * p.spacing, p.center.y - half + iy * p.spacing};
      if (distance(q, nest) <= kNestExclusionRadius) continue;
      out.push_back(q);
    }
  }
  return out;
}

std::vector<Position2D> spiral_locations(const SpiralPattern& p, Position2D nest) {
  if (!(p.a > 0.0) || !(p.theta_step > 0.0)) throw InvalidArgument("spiral: a and theta_step must be > 0");
  if (p.theta_max < 0.0) throw InvalidArgument("spiral: theta_max must be >= 0");
  const long steps = static_cast<long>(std::floor(p.theta_max / p.theta_step + 1e-9));
  std::vector<Position2D> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  for (long k = 0; k <= steps; ++k) {
    const double theta = k * p.theta_step;
    const double r = p.a * theta;
    const Position2D q{p.center.x + r * std::cos(theta), p.center.y + r * std::sin(theta)};
    if (distance(q, nest) <= kNestExclusionRadius) continue;
    out.push_back(q);
  }
  return out;
}

std::vector<Position2D> pattern_locations(const TrajectoryPattern& pattern, Position2D nest) {
  return std::visit(
      [&](const auto& p) {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, GridPattern>) {
          return grid_locations(p, nest);
        } else {
          return spiral_locations(p, nest);
        }
      },
      pattern);
}

double pattern_extent(const TrajectoryPattern& pattern, Position2D nest) {
  double r = 0.0;
  for (const auto& q : pattern_locations(pattern, nest)) r = std::max(r, distance(q, nest));
  return r;
}

int Dataset::shift_columns_of(std::size_t i) const { return entries_[i].gaze_index * (cols() / gaze_count_); }

HeadingAngle Dataset::gaze_of(std::size_t i) const { return HeadingAngle(shift_columns_of(i) * (kTwoPi / cols())); }

void Dataset::fill_view(std::size_t i, std::span<float> out) const {
  const PanoramaImage& base = base_views()[entries_[i].location];
  const int rows = base.rows();
  const int cols = base.cols();
  if (out.size() != static_cast<std::size_t>(rows) * cols) throw ShapeError("fill_view: output size mismatch");
  const int k = shift_columns_of(i) % cols;
  for (int r = 0; r < rows; ++r) {
    const float* src = base.image.pixels().data() + static_cast<std::size_t>(r) * cols;
    float* dst = out.data() + static_cast<std::size_t>(r) * cols;
    std::copy(src + k, src + cols, dst);
    std::copy(src, src + k, dst + (cols - k));
  }
}

TrainingExample Dataset::example(std::size_t i) const {
  const Entry& e = entries_[i];
  PanoramaImage view = shift_columns(base_views()[e.location], shift_columns_of(i));
  return TrainingExample{std::move(view), e.label, locations_[e.location], gaze_of(i)};
}

HomeVector add_label_noise(HomeVector label, double sigma_deg, std::mt19937_64& rng) {
  if (sigma_deg < 0.0) throw InvalidArgument("add_label_noise: sigma must be >= 0");
  if (sigma_deg == 0.0) return label;
  std::normal_distribution<double> noise(0.0, deg2rad(sigma_deg));
  const double angle = std::atan2(label.y, label.x) + noise(rng);
  return {std::cos(angle), std::sin(angle)};
}

Dataset Dataset::assemble(std::vector<Position2D> locations, std::vector<PanoramaImage> base_views, Position2D nest,
                          int gaze_count, double label_noise_sigma_deg, std::uint64_t shuffle_seed,
                          int render_count) {
  if (locations.size() != base_views.size()) throw InvalidArgument("dataset: one base view per location required");
  if (gaze_count < 1) throw InvalidArgument("dataset: gaze_count must be >= 1");
  Dataset d;
  d.nest_ = nest;
  d.gaze_count_ = gaze_count;
  d.render_count_ = render_count;
  d.locations_ = std::move(locations);
  d.base_views_ = std::make_shared<const std::vector<PanoramaImage>>(std::move(base_views));
  if (!d.base_views().empty() && d.cols() % gaze_count != 0) {
    throw InvalidArgument("dataset: gaze_count must divide the panorama width");
  }
  d.order_entries(label_noise_sigma_deg, shuffle_seed);
  return d;
}

Dataset Dataset::reshuffled(std::uint64_t shuffle_seed, double label_noise_sigma_deg) const {
  Dataset d;
  d.nest_ = nest_;
  d.gaze_count_ = gaze_count_;
  d.render_count_ = render_count_;
  d.locations_ = locations_;
  d.base_views_ = base_views_;
  d.order_entries(label_noise_sigma_deg, shuffle_seed);
  return d;
}

void Dataset::order_entries(double label_noise_sigma_deg, std::uint64_t shuffle_seed) {
  entries_.clear();
  entries_.reserve(locations_.size() * gaze_count_);
  for (std::size_t l = 0; l < locations_.size(); ++l) {
    for (int g = 0; g < gaze_count_; ++g) {
      Entry e;
      e.location = static_cast<int>(l);
      e.gaze_index = g;
      entries_.push_back(e);
    }
  }
  std::mt19937_64 rng(shuffle_seed);
  std::shuffle(entries_.begin(), entries_.end(), rng);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    Entry& e = entries_[i];
    e.clean_label = relative_home_vector(locations_[e.location], nest_, gaze_of(i));
    e.label = add_label_noise(e.clean_label, label_noise_sigma_deg, rng);
  }
}

Dataset build_dataset(const LandmarkWorld& world, const DatasetSpec& spec, const ImagingPipeline& imaging) {
  if (spec.gaze_count < 1 || imaging.config().panorama.cols % spec.gaze_count != 0) {
    throw InvalidArgument("dataset: gaze_count must divide the panorama width");
  }
  std::vector<Position2D> locations = pattern_locations(spec.pattern, world.nest);
  std::vector<PanoramaImage> views(locations.size());
  parallel_for(locations.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        views[i] = imaging.capture(world, locations[i], HeadingAngle{});
      } catch (const std::exception& err) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "rendering failed at location %zu (%.3f, %.3f): ", i, locations[i].x,
                      locations[i].y);
        throw Error(buf + std::string(err.what()));
      }
    }
  });
  const int renders = static_cast<int>(locations.size());
  return Dataset::assemble(std::move(locations), std::move(views), world.nest, spec.gaze_count,
                           spec.label_noise_sigma_deg, spec.shuffle_seed, renders);
}

void write_dataset_manifest(const Dataset& dataset, const std::filesystem::path& path,
                            const std::vector<std::string>& image_paths) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "index,x,y,gaze_deg,label_x,label_y,image_path\n";
  char buf[256];
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& e = dataset.entry(i);
    const Position2D p = dataset.locations()[e.location];
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.12f,%.12f,", i, p.x, p.y, dataset.gaze_of(i).degrees(),
                  e.label.x, e.label.y);
    out << buf;
    if (static_cast<std::size_t>(e.location) < image_paths.size()) out << image_paths[e.location];
    out << "\n";
  }
}

}  // namespace homing
