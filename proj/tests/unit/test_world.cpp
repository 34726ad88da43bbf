#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "homing/error.hpp"
#include "homing/world.hpp"

using namespace homing;

namespace {

LandmarkWorld one_tree_world(Position2D offset) {
  LandmarkWorld w = make_empty_world();
  Tree t;
  t.position = w.nest + Vec2{offset.x, offset.y};
  w.landmarks.push_back(t);
  return w;
}

}  // namespace

TEST_CASE("ray_cast straight up and straight down in an empty world") {
  const LandmarkWorld w = make_empty_world();
  const Vec3 cam{w.nest.x, w.nest.y, 1.89};
  CHECK(ray_cast(w, cam, {0, 0, 1}) == doctest::Approx(w.sky.zenith));
  CHECK(ray_cast(w, cam, {0, 0, -1}) == doctest::Approx(w.ground.albedo * lambert(w.lighting, {0, 0, 1})));
  CHECK(ray_cast(w, cam, {1, 0, 0}) == doctest::Approx(w.sky.horizon));
}

TEST_CASE("ray_cast against a canopy follows the closed-form sphere intersection") {
  const LandmarkWorld w = one_tree_world({0, 10});
  const Tree& t = w.landmarks.front();
  const Vec3 center{t.position.x, t.position.y, t.canopy_center_height};
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0), h(6.0, 9.0);
  int checked = 0;
  for (int i = 0; i < 400; ++i) {
    const Vec3 o{w.nest.x + 3 * u(rng), w.nest.y + 3 * u(rng), h(rng)};
    const Vec3 aim = center + Vec3{1.5 * u(rng), 1.5 * u(rng), 1.5 * u(rng)};
    const Vec3 d = (aim - o).normalized();
    const Vec3 oc = o - center;
    const double b = oc.dot(d);
    const double disc = b * b - (oc.dot(oc) - t.canopy_radius * t.canopy_radius);
    if (disc <= 0.0) continue;
    const double tt = -b - std::sqrt(disc);
    const Vec3 p = o + tt * d;
    if (p.z < t.trunk_height + 0.5) continue;
    const Vec3 n = (p - center).normalized();
    CHECK(ray_cast(w, o, d) == doctest::Approx(t.canopy_albedo * lambert(w.lighting, n)).epsilon(1e-9));
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("every cubemap pixel equals its own ray_cast") {
  const LandmarkWorld w = make_three_tree_world();
  const Position2D pos = w.nest + Vec2{1.3, -0.7};
  const CubemapView view = render_cubemap(w, pos, kDefaultCameraHeight, 64);
  for (int f = 0; f < kCubeFaceCount; ++f) {
    for (int r = 0; r < 64; ++r) {
      for (int c = 0; c < 64; ++c) {
        const Vec3 dir = cube_pixel_ray(static_cast<CubeFace>(f), r, c, 64).normalized();
        REQUIRE(view.faces[f].at(r, c) == static_cast<float>(ray_cast(w, view.camera, dir)));
      }
    }
  }
}

TEST_CASE("cube faces point where they should and lookups invert pixel rays") {
  const Vec3 front = cube_pixel_ray(CubeFace::kFront, 31, 31, 64);
  CHECK(front.y > 0.9);
  const Vec3 right = cube_pixel_ray(CubeFace::kRight, 31, 31, 64);
  CHECK(right.x > 0.9);
  const Vec3 up = cube_pixel_ray(CubeFace::kDorsal, 31, 31, 64);
  CHECK(up.z > 0.9);
  for (int f = 0; f < kCubeFaceCount; ++f) {
    for (int r = 0; r < 64; r += 7) {
      for (int c = 0; c < 64; c += 5) {
        const CubeSample s = cube_lookup(cube_pixel_ray(static_cast<CubeFace>(f), r, c, 64), 64);
        CHECK(static_cast<int>(s.face) == f);
        CHECK(s.row == r);
        CHECK(s.col == c);
      }
    }
  }
}

TEST_CASE("empty flat world: dorsal face is sky, ventral face is ground, panorama rows are constant") {
  const LandmarkWorld w = make_empty_world();
  const CubemapView view = render_cubemap(w, w.nest, kDefaultCameraHeight, 64);
  const auto& dorsal = view.face(CubeFace::kDorsal);
  const auto& ventral = view.face(CubeFace::kVentral);
  for (float v : ventral.pixels()) CHECK(v == ventral.at(0, 0));
  for (float v : dorsal.pixels()) {
    CHECK(v >= static_cast<float>(w.sky.zenith) - 1e-6f);
    CHECK(v <= static_cast<float>(w.sky.horizon) + 1e-6f);
  }
  const PanoramaImage p = render_panorama_direct(w, w.nest, kDefaultCameraHeight, 51, 360, {});
  for (int r = 0; r < p.rows(); ++r) {
    for (int c = 1; c < p.cols(); ++c) REQUIRE(p.image.at(r, c) == p.image.at(r, 0));
  }
}

TEST_CASE("a tree due north only shows up in the front face") {
  const LandmarkWorld empty = make_empty_world();
  const LandmarkWorld w = one_tree_world({0, 10});
  const CubemapView a = render_cubemap(empty, empty.nest, kDefaultCameraHeight, 64);
  const CubemapView b = render_cubemap(w, w.nest, kDefaultCameraHeight, 64);
  int front_diff = 0;
  for (int f = 0; f < kCubeFaceCount; ++f) {
    int diff = 0;
    for (std::size_t i = 0; i < a.faces[f].size(); ++i) diff += a.faces[f].pixels()[i] != b.faces[f].pixels()[i];
    if (f == static_cast<int>(CubeFace::kFront)) front_diff = diff;
    else CHECK(diff == 0);
  }
  CHECK(front_diff > 50);
}

TEST_CASE("a tree appears at the column of its azimuth") {
  const int cols = 360;
  for (double az_deg : {0.0, 37.0, 90.0, -120.0, 175.0}) {
    const HeadingAngle az = HeadingAngle::from_degrees(az_deg);
    const LandmarkWorld w = one_tree_world({10 * az.direction().x, 10 * az.direction().y});
    for (double gaze_deg : {0.0, 45.0, -100.0}) {
      const HeadingAngle gaze = HeadingAngle::from_degrees(gaze_deg);
      const PanoramaImage p = render_panorama_direct(w, w.nest, kDefaultCameraHeight, 51, cols, {}, gaze);
      // Row through the canopy, which is darker than sky and ground.
      const int row = 30;
      double sx = 0, sy = 0;
      int n = 0;
      for (int c = 0; c < cols; ++c) {
        if (p.image.at(row, c) < 0.3f) {
          const double a = (c + 0.5) * kTwoPi / cols;
          sx += std::cos(a);
          sy += std::sin(a);
          ++n;
        }
      }
      REQUIRE(n > 0);
      double mean_col = std::atan2(sy, sx) / kTwoPi * cols - 0.5;
      if (mean_col < 0) mean_col += cols;
      double expected = cols / 2.0 - 0.5 + rad2deg(wrap_angle(az.radians() - gaze.radians())) * cols / 360.0;
      double diff = std::remainder(mean_col - expected, cols);
      CHECK(std::abs(diff) <= 1.0);
    }
  }
}

TEST_CASE("rotating the landmarks about the camera shifts the panorama") {
  LandmarkWorld w = make_three_tree_world();
  w.lighting.shadows = false;
  w.lighting.sun = {0, 0, 1};  // overhead sun keeps shading rotation invariant
  w.array_pivot = w.nest;
  const int cols = 360;
  const PanoramaImage p0 = render_panorama_direct(w, w.nest, kDefaultCameraHeight, 51, cols, {});
  for (int k : {7, -23, 90}) {
    const LandmarkWorld r = rotate_landmark_array(w, k * 360.0 / cols);
    const PanoramaImage p1 = render_panorama_direct(r, r.nest, kDefaultCameraHeight, 51, cols, {});
    // Each pixel must match the unrotated panorama within one column of the expected shift.
    int bad = 0;
    for (int row = 0; row < p0.rows(); ++row) {
      for (int c = 0; c < cols; ++c) {
        const float v = p1.image.at(row, c);
        bool ok = false;
        for (int j = -1; j <= 1 && !ok; ++j) {
          const int src = ((c - k + j) % cols + cols) % cols;
          ok = std::abs(p0.image.at(row, src) - v) < 1e-5f;
        }
        bad += !ok;
      }
    }
    CHECK(bad == 0);
  }
}

TEST_CASE("rendering is deterministic") {
  const LandmarkWorld w = make_world_preset("forest", 7);
  const PanoramaImage a = render_panorama_direct(w, w.nest, kDefaultCameraHeight, 51, 360, {});
  const PanoramaImage b = render_panorama_direct(w, w.nest, kDefaultCameraHeight, 51, 360, {});
  CHECK(a.image == b.image);
}

TEST_CASE("landmark rotation by zero and a full turn") {
  const LandmarkWorld w = make_three_tree_world();
  CHECK(rotate_landmark_array(w, 0.0) == w);
  CHECK(rotate_landmark_array(w, 360.0) == w);
  const LandmarkWorld q = rotate_landmark_array(w, 90.0);
  const Position2D pivot = *w.array_pivot;
  for (std::size_t i = 0; i < w.landmarks.size(); ++i) {
    const Vec2 a = w.landmarks[i].position - pivot;
    const Vec2 b = q.landmarks[i].position - pivot;
    CHECK(b.x == doctest::Approx(-a.y));
    CHECK(b.y == doctest::Approx(a.x));
  }
}

TEST_CASE("world files round-trip and report bad lines") {
  for (const char* name : {"three-tree", "forest", "empty"}) {
    const LandmarkWorld w = make_world_preset(name, 5);
    CHECK(parse_world(serialize_world(w)) == w);
  }
  const auto path = std::filesystem::temp_directory_path() / "homing_world_roundtrip.txt";
  save_world(make_three_tree_world(), path);
  CHECK(load_world(path) == make_three_tree_world());
  std::filesystem::remove(path);

  try {
    parse_world("seed = 1\ntree = 1 2 3\n", "w.txt");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("w.txt:2") != std::string::npos);
  }
  CHECK_THROWS(make_world_preset("nowhere", 1));
}

TEST_CASE("world validation rejects broken trees") {
  LandmarkWorld w = one_tree_world({0, 5});
  w.landmarks[0].canopy_radius = 0.1;
  CHECK_THROWS_AS(w.validate(), InvalidArgument);
  w = one_tree_world({0, 5});
  w.landmarks[0].trunk_radius = -1;
  CHECK_THROWS_AS(w.validate(), InvalidArgument);
}
