#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "homing/geometry.hpp"
#include "homing/image.hpp"

namespace homing {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    const double n = norm();
    return {x / n, y / n, z / n};
  }
  Vec3 cross(const Vec3& o) const { return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x}; }

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 v) { return {s * v.x, s * v.y, s * v.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

/// Vertical trunk cylinder topped by a spherical canopy. Heights are above local terrain.
struct Tree {
  Position2D position;
  double trunk_radius = 0.25;
  double trunk_height = 4.0;
  double canopy_radius = 2.0;
  double canopy_center_height = 5.0;
  double trunk_albedo = 0.3;
  double canopy_albedo = 0.2;
  bool in_array = false;  ///< member of the rotatable landmark array

  friend bool operator==(const Tree&, const Tree&) = default;
};

enum class TerrainKind { kFlat, kValueNoise };

/// Flat plane or two-octave value-noise height field.
struct Terrain {
  TerrainKind kind = TerrainKind::kFlat;
  double base_height = 0.0;
  double amplitude = 0.5;
  double wavelength = 30.0;

  double height(double x, double y, std::uint64_t seed) const;
  Vec3 normal(double x, double y, std::uint64_t seed) const;
  double max_height() const { return kind == TerrainKind::kFlat ? base_height : base_height + amplitude; }

  friend bool operator==(const Terrain&, const Terrain&) = default;
};

/// Ground albedo, optionally modulated by a fine value-noise texture.
struct GroundModel {
  double albedo = 0.45;
  double texture_amplitude = 0.0;  ///< relative modulation, 0 disables the texture
  double texture_wavelength = 0.5;

  friend bool operator==(const GroundModel&, const GroundModel&) = default;
};

/// Sky luminance varies linearly with the sine of elevation between horizon and zenith.
struct SkyModel {
  double horizon = 0.9;
  double zenith = 0.65;

  double shade(double sin_elevation) const {
    const double s = sin_elevation > 0.0 ? sin_elevation : 0.0;
    return horizon + (zenith - horizon) * s;
  }

  friend bool operator==(const SkyModel&, const SkyModel&) = default;
};

struct Lighting {
  Vec3 sun{0.4, 0.3, 0.866};  ///< normalized on use
  double min_lambert = 0.2;
  double max_lambert = 1.0;
  bool shadows = false;

  friend bool operator==(const Lighting&, const Lighting&) = default;
};

/// Immutable procedural scene. Build it, validate it, then share it read-only.
struct LandmarkWorld {
  Terrain terrain;
  std::vector<Tree> landmarks;
  Position2D nest{538.0, 573.0};
  GroundModel ground;
  SkyModel sky;
  Lighting lighting;
  std::uint64_t seed = 1;
  std::optional<Position2D> array_pivot;

  /// Throws InvalidArgument when an invariant is broken.
  void validate() const;

  double terrain_height(Position2D p) const { return terrain.height(p.x, p.y, seed); }
  double ground_albedo_at(double x, double y) const;

  friend bool operator==(const LandmarkWorld&, const LandmarkWorld&) = default;
};

/// Shade seen along a ray: nearest hit among terrain, trunks and canopies, else sky.
double ray_cast(const LandmarkWorld& world, Vec3 origin, Vec3 direction);

/// Lambert factor used for a surface normal (facing the viewer), clamped.
double lambert(const Lighting& lighting, Vec3 normal);

enum class CubeFace : int { kFront = 0, kBack, kLeft, kRight, kDorsal, kVentral };
inline constexpr int kCubeFaceCount = 6;

/// Six 90-degree pinhole faces around one camera center.
/// Front looks north, right looks east, dorsal looks up.
struct CubemapView {
  std::array<GrayImage, kCubeFaceCount> faces;
  Vec3 camera;
  int face_size = 0;

  const GrayImage& face(CubeFace f) const { return faces[static_cast<int>(f)]; }
};

/// World-frame ray through the center of pixel (row, col) of a face (not normalized).
Vec3 cube_pixel_ray(CubeFace face, int row, int col, int face_size);

/// Face and pixel a direction falls into (nearest neighbor).
struct CubeSample {
  CubeFace face;
  int row;
  int col;
};
CubeSample cube_lookup(Vec3 direction, int face_size);

inline constexpr double kDefaultCameraHeight = 1.89;

/// Camera position at `height` above the terrain under `pos`.
Vec3 camera_at(const LandmarkWorld& world, Position2D pos, double height);

CubemapView render_cubemap(const LandmarkWorld& world, Position2D pos, double height, int face_size);

struct ElevationRange {
  double lo_deg = -15.0;
  double hi_deg = 75.0;

  friend bool operator==(const ElevationRange&, const ElevationRange&) = default;
};

enum class PanoramaSource { kDirect, kCatadioptric };

/// Rectified omnidirectional view. Column c is centered on azimuth
/// gaze - 180deg + (c + 0.5) * 360deg / W (azimuth counterclockwise from north),
/// so the gaze sits at the center column. Row 0 is the top (elevation hi).
struct PanoramaImage {
  GrayImage image;
  HeadingAngle gaze;
  ElevationRange elevation;
  PanoramaSource source = PanoramaSource::kDirect;

  int rows() const { return image.rows(); }
  int cols() const { return image.cols(); }
};

/// Elevation (radians) of the center of panorama row r.
double panorama_row_elevation(const ElevationRange& range, int rows, int r);

/// Reference panorama cast ray-by-ray, bypassing the mirror.
PanoramaImage render_panorama_direct(const LandmarkWorld& world, Position2D pos, double height, int rows, int cols,
                                     ElevationRange range, HeadingAngle gaze = HeadingAngle{});

/// Azimuth (counterclockwise from north) of a world-frame direction.
double azimuth_of(Vec2 dir);

// Presets.
LandmarkWorld make_empty_world();
/// Flat terrain with three identical trees forming the landmark array.
LandmarkWorld make_three_tree_world();
/// Value-noise terrain with 30 trees scattered over 60 x 60 m around the nest.
LandmarkWorld make_forest_world(std::uint64_t seed = 7);
LandmarkWorld make_world_preset(const std::string& name, std::uint64_t seed);

/// Copy of the world with its landmark array rotated counterclockwise about the pivot.
LandmarkWorld rotate_landmark_array(const LandmarkWorld& world, double rotation_deg);

/// Structured text world description (see README for the schema).
LandmarkWorld load_world(const std::filesystem::path& path);
LandmarkWorld parse_world(const std::string& text, const std::string& source = "<string>");
std::string serialize_world(const LandmarkWorld& world);
void save_world(const LandmarkWorld& world, const std::filesystem::path& path);

}  // namespace homing
