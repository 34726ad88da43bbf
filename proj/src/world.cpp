#include "homing/world.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "homing/error.hpp"
#include "homing/keyvalue.hpp"
#include "homing/parallel.hpp"

namespace homing {

namespace {

constexpr double kHitEpsilon = 1e-9;
constexpr double kMarchMaxDistance = 400.0;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Pseudo-random value in [-1, 1] attached to an integer lattice point.
double lattice_value(std::int64_t ix, std::int64_t iy, std::uint64_t seed) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(ix));
  h = splitmix64(h ^ static_cast<std::uint64_t>(iy));
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

double value_noise(double x, double y, std::uint64_t seed) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double tx = x - fx;
  const double ty = y - fy;
  const double sx = tx * tx * (3.0 - 2.0 * tx);
  const double sy = ty * ty * (3.0 - 2.0 * ty);
  const double v00 = lattice_value(ix, iy, seed);
  const double v10 = lattice_value(ix + 1, iy, seed);
  const double v01 = lattice_value(ix, iy + 1, seed);
  const double v11 = lattice_value(ix + 1, iy + 1, seed);
  const double a = v00 + (v10 - v00) * sx;
  const double b = v01 + (v11 - v01) * sx;
  return a + (b - a) * sy;
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Vec3 normal;
  double albedo = 0.0;
  bool found = false;
};

// Smallest t > epsilon where the ray meets the trunk side or the canopy sphere.
void intersect_tree(const Tree& tree, double base, Vec3 o, Vec3 d, Hit& hit) {
  const double dx = o.x - tree.position.x;
  const double dy = o.y - tree.position.y;
  const double a = d.x * d.x + d.y * d.y;
  if (a > 1e-18) {
    const double b = 2.0 * (dx * d.x + dy * d.y);
    const double c = dx * dx + dy * dy - tree.trunk_radius * tree.trunk_radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
        if (t <= kHitEpsilon || t >= hit.t) continue;
        const double z = o.z + t * d.z;
        if (z < base || z > base + tree.trunk_height) continue;
        const double px = dx + t * d.x;
        const double py = dy + t * d.y;
        hit = {t, Vec3{px, py, 0.0}.normalized(), tree.trunk_albedo, true};
        break;
      }
    }
  }
  const Vec3 center{tree.position.x, tree.position.y, base + tree.canopy_center_height};
  const Vec3 oc = o - center;
  const double b = oc.dot(d);
  const double c = oc.dot(oc) - tree.canopy_radius * tree.canopy_radius;
  const double disc = b * b - c;
  if (disc >= 0.0) {
    const double sq = std::sqrt(disc);
    for (double t : {-b - sq, -b + sq}) {
      if (t <= kHitEpsilon || t >= hit.t) continue;
      const Vec3 p = o + t * d;
      hit = {t, (p - center).normalized(), tree.canopy_albedo, true};
      break;
    }
  }
}

bool tree_occludes(const LandmarkWorld& world, Vec3 o, Vec3 d) {
  Hit h;
  for (const auto& tree : world.landmarks) {
    intersect_tree(tree, world.terrain_height(tree.position), o, d, h);
    if (h.found) return true;
  }
  return false;
}

void intersect_terrain(const LandmarkWorld& world, Vec3 o, Vec3 d, Hit& hit) {
  const Terrain& terrain = world.terrain;
  if (terrain.kind == TerrainKind::kFlat) {
    if (d.z >= 0.0) return;
    const double t = (terrain.base_height - o.z) / d.z;
    if (t > kHitEpsilon && t < hit.t) {
      const Vec3 p = o + t * d;
      hit = {t, Vec3{0.0, 0.0, 1.0}, world.ground_albedo_at(p.x, p.y), true};
    }
    return;
  }
  // Height-field march with bisection refinement.
  const double top = terrain.max_height();
  auto above = [&](double t) {
    const Vec3 p = o + t * d;
    return p.z - terrain.height(p.x, p.y, world.seed);
  };
  const double t_end = std::min(hit.t, kMarchMaxDistance);
  double t_prev = 0.0;
  double f_prev = above(0.0);
  if (f_prev <= 0.0) {
    hit = {kHitEpsilon, terrain.normal(o.x, o.y, world.seed), world.ground_albedo_at(o.x, o.y), true};
    return;
  }
  double t = 0.0;
  while (t < t_end) {
    t = std::min(t_end, t + 0.1 + 0.02 * t);
    const Vec3 p = o + t * d;
    if (p.z > top && d.z >= 0.0) return;
    const double f = above(t);
    if (f <= 0.0) {
      double lo = t_prev, hi = t;
      for (int i = 0; i < 30; ++i) {
        const double mid = 0.5 * (lo + hi);
        (above(mid) > 0.0 ? lo : hi) = mid;
      }
      const Vec3 q = o + hi * d;
      hit = {hi, terrain.normal(q.x, q.y, world.seed), world.ground_albedo_at(q.x, q.y), true};
      return;
    }
    t_prev = t;
    f_prev = f;
  }
}

}  // namespace

double Terrain::height(double x, double y, std::uint64_t seed) const {
  if (kind == TerrainKind::kFlat) return base_height;
  const double u = x / wavelength;
  const double v = y / wavelength;
  const double n = value_noise(u, v, seed) + 0.5 * value_noise(2.0 * u + 17.3, 2.0 * v - 4.1, seed + 1);
  return base_height + amplitude * n / 1.5;
}

Vec3 Terrain::normal(double x, double y, std::uint64_t seed) const {
  if (kind == TerrainKind::kFlat) return {0.0, 0.0, 1.0};
  const double e = 0.05;
  const double dhdx = (height(x + e, y, seed) - height(x - e, y, seed)) / (2.0 * e);
  const double dhdy = (height(x, y + e, seed) - height(x, y - e, seed)) / (2.0 * e);
  return Vec3{-dhdx, -dhdy, 1.0}.normalized();
}

void LandmarkWorld::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(nest.x) || !finite(nest.y)) throw InvalidArgument("world: nest position must be finite");
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    const Tree& t = landmarks[i];
    const std::string where = "world: tree " + std::to_string(i) + ": ";
    if (!finite(t.position.x) || !finite(t.position.y)) throw InvalidArgument(where + "position must be finite");
    if (!(t.trunk_radius > 0.0) || !(t.canopy_radius > 0.0)) throw InvalidArgument(where + "radii must be > 0");
    if (t.canopy_radius < t.trunk_radius) throw InvalidArgument(where + "canopy radius below trunk radius");
    if (!(t.trunk_height > 0.0) || !(t.canopy_center_height > 0.0)) {
      throw InvalidArgument(where + "heights must be > 0");
    }
  }
  if (!(sky.horizon >= 0.0 && sky.horizon <= 1.0 && sky.zenith >= 0.0 && sky.zenith <= 1.0)) {
    throw InvalidArgument("world: sky luminance must lie in [0,1]");
  }
  if (!(ground.albedo >= 0.0 && ground.albedo <= 1.0)) throw InvalidArgument("world: ground albedo must lie in [0,1]");
  if (terrain.kind == TerrainKind::kValueNoise && !(terrain.wavelength > 0.0)) {
    throw InvalidArgument("world: terrain wavelength must be > 0");
  }
  if (!(lighting.sun.norm() > 0.0)) throw InvalidArgument("world: sun direction must be nonzero");
}

double LandmarkWorld::ground_albedo_at(double x, double y) const {
  if (ground.texture_amplitude == 0.0) return ground.albedo;
  const double n = value_noise(x / ground.texture_wavelength, y / ground.texture_wavelength, seed + 101);
  return std::clamp(ground.albedo * (1.0 + ground.texture_amplitude * n), 0.0, 1.0);
}

double lambert(const Lighting& lighting, Vec3 normal) {
  return std::clamp(normal.dot(lighting.sun.normalized()), lighting.min_lambert, lighting.max_lambert);
}

double ray_cast(const LandmarkWorld& world, Vec3 origin, Vec3 direction) {
  Hit hit;
  for (const auto& tree : world.landmarks) {
    intersect_tree(tree, world.terrain_height(tree.position), origin, direction, hit);
  }
  intersect_terrain(world, origin, direction, hit);
  if (!hit.found) return world.sky.shade(direction.z);

  Vec3 n = hit.normal;
  if (n.dot(direction) > 0.0) n = -1.0 * n;
  double light = lambert(world.lighting, n);
  if (world.lighting.shadows) {
    const Vec3 p = origin + hit.t * direction + 1e-6 * n;
    if (tree_occludes(world, p, world.lighting.sun.normalized())) light = world.lighting.min_lambert;
  }
  return hit.albedo * light;
}

namespace {

struct FaceBasis {
  Vec3 forward, right, up;
};

FaceBasis face_basis(CubeFace face) {
  switch (face) {
    case CubeFace::kFront: return {{0, 1, 0}, {1, 0, 0}, {0, 0, 1}};
    case CubeFace::kBack: return {{0, -1, 0}, {-1, 0, 0}, {0, 0, 1}};
    case CubeFace::kLeft: return {{-1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    case CubeFace::kRight: return {{1, 0, 0}, {0, -1, 0}, {0, 0, 1}};
    case CubeFace::kDorsal: return {{0, 0, 1}, {-1, 0, 0}, {0, 1, 0}};
    case CubeFace::kVentral: return {{0, 0, -1}, {1, 0, 0}, {0, 1, 0}};
  }
  throw InvalidArgument("unknown cube face");
}

}  // namespace

Vec3 cube_pixel_ray(CubeFace face, int row, int col, int face_size) {
  const FaceBasis b = face_basis(face);
  const double a = 2.0 * (col + 0.5) / face_size - 1.0;
  const double v = 1.0 - 2.0 * (row + 0.5) / face_size;
  return b.forward + a * b.right + v * b.up;
}

CubeSample cube_lookup(Vec3 d, int face_size) {
  const double ax = std::abs(d.x), ay = std::abs(d.y), az = std::abs(d.z);
  CubeFace face;
  if (az >= ax && az >= ay) {
    face = d.z > 0 ? CubeFace::kDorsal : CubeFace::kVentral;
  } else if (ay >= ax) {
    face = d.y > 0 ? CubeFace::kFront : CubeFace::kBack;
  } else {
    face = d.x > 0 ? CubeFace::kRight : CubeFace::kLeft;
  }
  const FaceBasis b = face_basis(face);
  const double depth = d.dot(b.forward);
  const double a = d.dot(b.right) / depth;
  const double v = d.dot(b.up) / depth;
  const int col = std::clamp(static_cast<int>(std::floor((a + 1.0) * 0.5 * face_size)), 0, face_size - 1);
  const int row = std::clamp(static_cast<int>(std::floor((1.0 - v) * 0.5 * face_size)), 0, face_size - 1);
  return {face, row, col};
}

Vec3 camera_at(const LandmarkWorld& world, Position2D pos, double height) {
  return {pos.x, pos.y, world.terrain_height(pos) + height};
}

CubemapView render_cubemap(const LandmarkWorld& world, Position2D pos, double height, int face_size) {
  if (face_size < 64) throw InvalidArgument("render_cubemap: face size must be >= 64");
  CubemapView view;
  view.face_size = face_size;
  view.camera = camera_at(world, pos, height);
  for (auto& f : view.faces) f = GrayImage(face_size, face_size);
  const std::size_t rows_total = static_cast<std::size_t>(kCubeFaceCount) * face_size;
  parallel_for(rows_total, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const int f = static_cast<int>(k / face_size);
      const int r = static_cast<int>(k % face_size);
      GrayImage& img = view.faces[f];
      for (int c = 0; c < face_size; ++c) {
        const Vec3 dir = cube_pixel_ray(static_cast<CubeFace>(f), r, c, face_size).normalized();
        img.at(r, c) = static_cast<float>(ray_cast(world, view.camera, dir));
      }
    }
  });
  return view;
}

double panorama_row_elevation(const ElevationRange& range, int rows, int r) {
  if (rows < 2) return deg2rad(0.5 * (range.lo_deg + range.hi_deg));
  return deg2rad(range.hi_deg - r * (range.hi_deg - range.lo_deg) / (rows - 1));
}

double azimuth_of(Vec2 dir) { return std::atan2(-dir.x, dir.y); }

PanoramaImage render_panorama_direct(const LandmarkWorld& world, Position2D pos, double height, int rows, int cols,
                                     ElevationRange range, HeadingAngle gaze) {
  if (rows < 2 || cols < 1) throw InvalidArgument("render_panorama_direct: need rows >= 2 and cols >= 1");
  PanoramaImage pano{GrayImage(rows, cols), gaze, range, PanoramaSource::kDirect};
  const Vec3 cam = camera_at(world, pos, height);
  const double pitch = kTwoPi / cols;
  parallel_for(static_cast<std::size_t>(rows), [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const double e = panorama_row_elevation(range, rows, static_cast<int>(r));
      const double ce = std::cos(e), se = std::sin(e);
      for (int c = 0; c < cols; ++c) {
        const double az = gaze.radians() - kPi + (c + 0.5) * pitch;
        const Vec3 dir{-std::sin(az) * ce, std::cos(az) * ce, se};
        pano.image.at(static_cast<int>(r), c) = static_cast<float>(ray_cast(world, cam, dir));
      }
    }
  });
  return pano;
}

LandmarkWorld make_empty_world() {
  LandmarkWorld w;
  w.seed = 1;
  return w;
}

LandmarkWorld make_three_tree_world() {
  LandmarkWorld w;
  w.seed = 3;
  w.lighting.shadows = true;
  const Position2D n = w.nest;
  const std::array<Vec2, 3> offsets{{{-4.5, 6.0}, {1.0, 7.5}, {6.5, 3.5}}};
  Position2D pivot{0.0, 0.0};
  for (const auto& off : offsets) {
    Tree t;
    t.position = n + off;
    t.in_array = true;
    w.landmarks.push_back(t);
    pivot.x += t.position.x / offsets.size();
    pivot.y += t.position.y / offsets.size();
  }
  w.array_pivot = pivot;
  return w;
}

LandmarkWorld make_forest_world(std::uint64_t seed) {
  LandmarkWorld w;
  w.seed = seed;
  w.terrain = Terrain{TerrainKind::kValueNoise, 0.0, 0.5, 30.0};
  w.ground.texture_amplitude = 0.25;
  w.ground.texture_wavelength = 0.5;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-30.0, 30.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (w.landmarks.size() < 30) {
    const Vec2 off{coord(rng), coord(rng)};
    if (off.norm() < 1.5) continue;
    Tree t;
    t.position = w.nest + off;
    t.trunk_radius = 0.15 + 0.2 * unit(rng);
    t.trunk_height = 2.5 + 3.0 * unit(rng);
    t.canopy_radius = 1.2 + 1.8 * unit(rng);
    t.canopy_center_height = t.trunk_height + 0.5 * t.canopy_radius;
    t.trunk_albedo = 0.25 + 0.15 * unit(rng);
    t.canopy_albedo = 0.12 + 0.2 * unit(rng);
    w.landmarks.push_back(t);
  }
  return w;
}

LandmarkWorld make_world_preset(const std::string& name, std::uint64_t seed) {
  if (name == "empty") return make_empty_world();
  if (name == "three-tree") return make_three_tree_world();
  if (name == "forest") return make_forest_world(seed);
  throw InvalidArgument("unknown world preset '" + name + "' (expected empty, three-tree or forest)");
}

LandmarkWorld rotate_landmark_array(const LandmarkWorld& world, double rotation_deg) {
  if (!world.array_pivot) throw InvalidArgument("rotate_landmark_array: world has no landmark-array pivot");
  LandmarkWorld out = world;
  if (std::fmod(rotation_deg, 360.0) == 0.0) return out;
  const Position2D pivot = *world.array_pivot;
  for (auto& t : out.landmarks) {
    if (!t.in_array) continue;
    t.position = pivot + rotate2(t.position - pivot, deg2rad(rotation_deg));
  }
  return out;
}

namespace {

std::vector<double> expect_numbers(const KeyValueEntry& e, const std::string& source, std::size_t min_n,
                                   std::size_t max_n) {
  std::vector<double> v;
  try {
    v = parse_numbers(e.value);
  } catch (const FormatError& err) {
    throw FormatError(source + ":" + std::to_string(e.line) + ": " + e.key + ": " + err.what());
  }
  if (v.size() < min_n || v.size() > max_n) {
    throw FormatError(source + ":" + std::to_string(e.line) + ": " + e.key + ": expected " + std::to_string(min_n) +
                      (max_n != min_n ? ".." + std::to_string(max_n) : "") + " numbers");
  }
  return v;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

LandmarkWorld parse_world(const std::string& text, const std::string& source) {
  const KeyValueDocument doc = KeyValueDocument::parse(text, source);
  LandmarkWorld w;
  for (const auto& e : doc.entries()) {
    const std::string where = source + ":" + std::to_string(e.line) + ": ";
    if (e.key == "seed") {
      w.seed = static_cast<std::uint64_t>(expect_numbers(e, source, 1, 1)[0]);
    } else if (e.key == "nest") {
      const auto v = expect_numbers(e, source, 2, 2);
      w.nest = {v[0], v[1]};
    } else if (e.key == "terrain") {
      std::istringstream in(e.value);
      std::string kind;
      in >> kind;
      std::string rest;
      std::getline(in, rest);
      KeyValueEntry sub{e.key, rest, e.line};
      if (kind == "flat") {
        const auto v = expect_numbers(sub, source, 0, 1);
        w.terrain = Terrain{};
        w.terrain.base_height = v.empty() ? 0.0 : v[0];
      } else if (kind == "noise") {
        const auto v = expect_numbers(sub, source, 3, 3);
        w.terrain = Terrain{TerrainKind::kValueNoise, v[0], v[1], v[2]};
      } else {
        throw FormatError(where + "terrain: expected 'flat' or 'noise'");
      }
    } else if (e.key == "ground") {
      const auto v = expect_numbers(e, source, 1, 3);
      w.ground.albedo = v[0];
      if (v.size() > 1) w.ground.texture_amplitude = v[1];
      if (v.size() > 2) w.ground.texture_wavelength = v[2];
    } else if (e.key == "sky") {
      const auto v = expect_numbers(e, source, 2, 2);
      w.sky = {v[0], v[1]};
    } else if (e.key == "sun") {
      const auto v = expect_numbers(e, source, 3, 3);
      w.lighting.sun = {v[0], v[1], v[2]};
    } else if (e.key == "lambert") {
      const auto v = expect_numbers(e, source, 2, 2);
      w.lighting.min_lambert = v[0];
      w.lighting.max_lambert = v[1];
    } else if (e.key == "shadows") {
      w.lighting.shadows = expect_numbers(e, source, 1, 1)[0] != 0.0;
    } else if (e.key == "pivot") {
      const auto v = expect_numbers(e, source, 2, 2);
      w.array_pivot = Position2D{v[0], v[1]};
    } else if (e.key == "tree") {
      const auto v = expect_numbers(e, source, 8, 9);
      Tree t{{v[0], v[1]}, v[2], v[3], v[4], v[5], v[6], v[7], v.size() > 8 && v[8] != 0.0};
      w.landmarks.push_back(t);
    } else {
      throw FormatError(where + "unknown key '" + e.key + "'");
    }
  }
  try {
    w.validate();
  } catch (const InvalidArgument& err) {
    throw FormatError(source + ": " + err.what());
  }
  return w;
}

LandmarkWorld load_world(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open world file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_world(buf.str(), path.string());
}

std::string serialize_world(const LandmarkWorld& w) {
  std::ostringstream out;
  out << "# landmark world\n";
  out << "seed = " << w.seed << "\n";
  out << "nest = " << fmt(w.nest.x) << ' ' << fmt(w.nest.y) << "\n";
  if (w.terrain.kind == TerrainKind::kFlat) {
    out << "terrain = flat " << fmt(w.terrain.base_height) << "\n";
  } else {
    out << "terrain = noise " << fmt(w.terrain.base_height) << ' ' << fmt(w.terrain.amplitude) << ' '
        << fmt(w.terrain.wavelength) << "\n";
  }
  out << "ground = " << fmt(w.ground.albedo) << ' ' << fmt(w.ground.texture_amplitude) << ' '
      << fmt(w.ground.texture_wavelength) << "\n";
  out << "sky = " << fmt(w.sky.horizon) << ' ' << fmt(w.sky.zenith) << "\n";
  out << "sun = " << fmt(w.lighting.sun.x) << ' ' << fmt(w.lighting.sun.y) << ' ' << fmt(w.lighting.sun.z) << "\n";
  out << "lambert = " << fmt(w.lighting.min_lambert) << ' ' << fmt(w.lighting.max_lambert) << "\n";
  out << "shadows = " << (w.lighting.shadows ? 1 : 0) << "\n";
  if (w.array_pivot) out << "pivot = " << fmt(w.array_pivot->x) << ' ' << fmt(w.array_pivot->y) << "\n";
  out << "# tree = x y trunk_radius trunk_height canopy_radius canopy_center_height trunk_albedo canopy_albedo array\n";
  for (const auto& t : w.landmarks) {
    out << "tree = " << fmt(t.position.x) << ' ' << fmt(t.position.y) << ' ' << fmt(t.trunk_radius) << ' '
        << fmt(t.trunk_height) << ' ' << fmt(t.canopy_radius) << ' ' << fmt(t.canopy_center_height) << ' '
        << fmt(t.trunk_albedo) << ' ' << fmt(t.canopy_albedo) << ' ' << (t.in_array ? 1 : 0) << "\n";
  }
  return out.str();
}

void save_world(const LandmarkWorld& world, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << serialize_world(world);
}

}  // namespace homing
