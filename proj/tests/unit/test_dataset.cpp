#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "homing/dataset.hpp"
#include "homing/error.hpp"

using namespace homing;

namespace {

const Position2D kFar{-1000.0, -1000.0};

}  // namespace

TEST_CASE("grid lattice counts") {
  const Position2D nest{538, 573};
  CHECK(grid_locations(learning_grid(nest), kFar).size() == 100);
  CHECK(grid_locations(learning_grid(nest), nest).size() == 99);
  CHECK(grid_locations(evaluation_grid(nest), kFar).size() == 1681);
  CHECK(grid_locations(evaluation_grid(nest), nest).size() == 1680);
  const auto single = grid_locations(GridPattern{{3, 4}, 0.0, 1.0}, kFar);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == Position2D{3, 4});
  CHECK_THROWS_AS(grid_locations(GridPattern{{0, 0}, 10.0, 0.3}, kFar), InvalidArgument);
  CHECK_THROWS_AS(grid_locations(GridPattern{{0, 0}, 10.0, 0.0}, kFar), InvalidArgument);
}

TEST_CASE("training grid puts the nest on a lattice point") {
  const Position2D nest{538, 573};
  const auto pts = grid_locations(learning_grid(nest), kFar);
  const bool on_lattice = std::any_of(pts.begin(), pts.end(), [&](const Position2D& p) { return distance(p, nest) < 1e-9; });
  CHECK(on_lattice);
  for (const auto& p : pts) {
    CHECK(std::abs(p.x - std::round(p.x)) < 1e-9);
    CHECK(std::abs(p.y - std::round(p.y)) < 1e-9);
  }
}

TEST_CASE("spiral sampling") {
  const Position2D nest{538, 573};
  const SpiralPattern sp = learning_spiral(nest);
  const auto raw = spiral_locations(sp, kFar);
  CHECK(raw.size() == 101);
  CHECK(raw.front() == nest);
  CHECK(distance(raw.back(), nest) == doctest::Approx(0.25 * 8 * kPi).epsilon(1e-12));
  CHECK(distance(raw.back(), nest) == doctest::Approx(6.2832).epsilon(1e-4));
  const auto pts = spiral_locations(sp, nest);
  CHECK(pts.size() == 100);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double theta = (k + 1) * 0.08 * kPi;
    CHECK(distance(pts[k], nest) == doctest::Approx(0.25 * theta).epsilon(1e-12));
  }
  CHECK(pattern_extent(sp, nest) == doctest::Approx(2 * kPi));
}

TEST_CASE("label noise") {
  std::mt19937_64 rng(4);
  const HomeVector label{0.6, 0.8};
  CHECK(add_label_noise(label, 0.0, rng) == label);
  double sum = 0, sum2 = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const HomeVector noisy = add_label_noise(label, 10.0, rng);
    CHECK(std::abs(noisy.norm() - 1.0) < 1e-12);
    const double d = rad2deg(wrap_angle(std::atan2(noisy.y, noisy.x) - std::atan2(label.y, label.x)));
    sum += d;
    sum2 += d * d;
  }
  const double mean = sum / n;
  const double sd = std::sqrt((sum2 - n * mean * mean) / (n - 1));
  CHECK(sd > 9.5);
  CHECK(sd < 10.5);
}

TEST_CASE("grid dataset has 35640 examples with exact labels") {
  const LandmarkWorld w = make_three_tree_world();
  const ImagingPipeline img(ImagingConfig::reduced());
  DatasetSpec spec;
  spec.pattern = learning_grid(w.nest);
  const Dataset d = build_dataset(w, spec, img);
  CHECK(d.size() == 35640);
  CHECK(d.render_count() == 99);
  CHECK(d.locations().size() == 99);

  std::set<std::pair<int, int>> seen;
  double worst = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& e = d.entry(i);
    seen.emplace(e.location, e.gaze_index);
    const HomeVector truth = relative_home_vector(d.location_of(i), w.nest, HeadingAngle::from_degrees(e.gaze_index));
    worst = std::max({worst, std::abs(truth.x - e.label.x), std::abs(truth.y - e.label.y)});
    CHECK(e.label == e.clean_label);
  }
  CHECK(seen.size() == d.size());
  CHECK(worst < 1e-10);

  // A gaze-shifted example is the base view rolled, and its gaze annotation matches its label.
  for (std::size_t i : {std::size_t{0}, std::size_t{1234}, d.size() - 1}) {
    const TrainingExample ex = d.example(i);
    CHECK(ex.view.image == shift_columns(d.base_views()[d.entry(i).location], d.shift_columns_of(i)).image);
    CHECK(ex.gaze.degrees() == doctest::Approx(HeadingAngle::from_degrees(d.entry(i).gaze_index).degrees()));
    CHECK(ex.view.gaze.radians() == doctest::Approx(ex.gaze.radians()));
  }
}

TEST_CASE("dataset order and noise are seeded") {
  const LandmarkWorld w = make_three_tree_world();
  const ImagingPipeline img(ImagingConfig::reduced());
  DatasetSpec spec;
  spec.pattern = SpiralPattern{w.nest, 0.25, 2 * kPi, 0.25 * kPi};
  spec.gaze_count = 36;
  spec.label_noise_sigma_deg = 10.0;
  spec.shuffle_seed = 77;
  const Dataset a = build_dataset(w, spec, img);
  const Dataset b = build_dataset(w, spec, img);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.entry(i).location == b.entry(i).location);
    CHECK(a.entry(i).gaze_index == b.entry(i).gaze_index);
    CHECK(a.entry(i).label == b.entry(i).label);
  }
  const Dataset c = a.reshuffled(78, 10.0);
  CHECK(&c.base_views() == &a.base_views());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a.entry(i).location != c.entry(i).location;
  CHECK(differs);
  const Dataset again = a.reshuffled(77, 10.0);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(again.entry(i).label == a.entry(i).label);
}

TEST_CASE("one gaze per location") {
  const LandmarkWorld w = make_three_tree_world();
  const ImagingPipeline img(ImagingConfig::reduced());
  DatasetSpec spec;
  spec.pattern = GridPattern{w.nest + Vec2{0.5, 0.5}, 2.0, 1.0};
  spec.gaze_count = 1;
  const Dataset d = build_dataset(w, spec, img);
  CHECK(d.size() == 9);
  spec.gaze_count = 7;
  CHECK_THROWS_AS(build_dataset(w, spec, img), InvalidArgument);
}

TEST_CASE("dataset manifest lists every example") {
  const LandmarkWorld w = make_three_tree_world();
  const ImagingPipeline img(ImagingConfig::reduced());
  DatasetSpec spec;
  spec.pattern = GridPattern{w.nest + Vec2{0.5, 0.5}, 1.0, 1.0};
  spec.gaze_count = 4;
  const Dataset d = build_dataset(w, spec, img);
  const auto path = std::filesystem::temp_directory_path() / "homing_manifest_test.csv";
  write_dataset_manifest(d, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "index,x,y,gaze_deg,label_x,label_y,image_path");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == static_cast<int>(d.size()));
  std::filesystem::remove(path);
}
