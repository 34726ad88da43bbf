#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "homing/image.hpp"
#include "homing/world.hpp"

namespace homing {

/// Para-catadioptric camera: convex paraboloid mirror (axis vertical, vertex up)
/// viewed orthographically from above.
///
/// A world direction at polar angle psi from the zenith reflects through the
/// mirror focus and lands at metric image radius
///
///     r = (l / 2) * tan(psi / 2),        l = latus rectum,
///
/// so the zenith maps to the image center, the horizon to r = l/2, and the
/// radius grows monotonically toward the nadir. The sensor spans [-d, d] in
/// both axes (d = image-plane distance) and the mirror footprint is the
/// inscribed circle r <= d. Image up is north, image right is east.
struct MirrorModel {
  double latus_rectum = 0.1;
  double plane_distance = 0.1;
  int size = 1152;  ///< C, image side in pixels (even)

  void validate() const;

  double pixel_pitch() const { return 2.0 * plane_distance / size; }
  double focal_parameter() const { return 0.5 * latus_rectum; }
  double center() const { return 0.5 * size; }
  /// Footprint radius in pixels.
  double rim_radius_px() const { return 0.5 * size; }

  /// Elevation (radians) of a metric image radius.
  double elevation_at_radius(double r_metric) const;
  double radius_at_elevation(double elevation) const;
  double rim_elevation() const { return elevation_at_radius(plane_distance); }

  bool valid_pixel(int row, int col) const;
  /// Unit world ray seen through the center of pixel (row, col); nullopt outside the footprint.
  std::optional<Vec3> pixel_direction(int row, int col) const;
  /// Continuous image position (x = column axis, y = row axis) of a world direction.
  Vec2 image_position(Vec3 direction) const;

  friend bool operator==(const MirrorModel&, const MirrorModel&) = default;
};

struct CatadioptricImage {
  GrayImage image;
  MirrorModel mirror;
  std::vector<std::uint8_t> valid;  ///< one flag per pixel, row-major

  bool is_valid(int row, int col) const { return valid[static_cast<std::size_t>(row) * image.cols() + col] != 0; }
  double valid_fraction() const;
};

/// Precomputed pixel-to-cubemap lookup for one (mirror, face size) pair.
class CatadioptricProjector {
 public:
  CatadioptricProjector(MirrorModel mirror, int face_size);

  CatadioptricImage project(const CubemapView& cubemap) const;
  const MirrorModel& mirror() const { return mirror_; }
  int face_size() const { return face_size_; }

 private:
  MirrorModel mirror_;
  int face_size_;
  std::vector<std::int32_t> lut_;  ///< face * F * F + row * F + col, or -1 when invalid
  std::vector<std::uint8_t> valid_;
};

CatadioptricImage catadioptric_project(const CubemapView& cubemap, double latus_rectum, double plane_distance,
                                       int size);

struct PanoramaSpec {
  int rows = 201;
  int cols = 1800;
  ElevationRange elevation;

  double column_pitch() const { return kTwoPi / cols; }
  friend bool operator==(const PanoramaSpec&, const PanoramaSpec&) = default;
};

/// Unwraps catadioptric images into gaze-cut panoramas.
///
/// The gaze is split into a whole number of columns plus a fractional
/// remainder (snapped to 1e-6 column). Sample positions depend only on the
/// remainder, so gazes that differ by whole columns yield exactly rolled images.
class Rectifier {
 public:
  Rectifier(MirrorModel mirror, PanoramaSpec spec);

  PanoramaImage rectify(const CatadioptricImage& cat, HeadingAngle gaze) const;
  const PanoramaSpec& spec() const { return spec_; }

 private:
  std::vector<std::int32_t> build_lut(double frac) const;

  MirrorModel mirror_;
  PanoramaSpec spec_;
  std::vector<std::int32_t> lut_zero_;  ///< for remainder 0
};

PanoramaImage rectify(const CatadioptricImage& cat, HeadingAngle gaze, int rows, int cols, ElevationRange range);

/// Circular column roll. delta is rounded to whole columns; the rounding
/// error (radians) is written to `rounding_error` when given.
PanoramaImage shift_gaze(const PanoramaImage& p, double delta, double* rounding_error = nullptr);

/// Roll by a whole number of columns; positive k turns the gaze counterclockwise.
PanoramaImage shift_columns(const PanoramaImage& p, int k);

/// Resamples an external circular photograph (center and footprint radius in
/// photo pixels) into the mirror's image frame.
CatadioptricImage import_circular_photo(const GrayImage& photo, double center_x, double center_y, double radius_px,
                                        MirrorModel mirror);

/// Image + `.meta` sidecar (gaze, elevation range, source).
void write_panorama(const PanoramaImage& p, const std::filesystem::path& pgm_path);
PanoramaImage read_panorama(const std::filesystem::path& pgm_path);
void write_catadioptric(const CatadioptricImage& c, const std::filesystem::path& pgm_path);
CatadioptricImage read_catadioptric(const std::filesystem::path& pgm_path);

/// Rendering resolution and optics shared by dataset capture, evaluation and homing.
struct ImagingConfig {
  double camera_height = kDefaultCameraHeight;
  int face_size = 512;
  MirrorModel mirror;
  PanoramaSpec panorama;

  /// 201 x 1800 panoramas from 512-pixel faces and a 1152-pixel mirror image.
  static ImagingConfig full();
  /// 51 x 360 panoramas for fast runs.
  static ImagingConfig reduced();
  friend bool operator==(const ImagingConfig&, const ImagingConfig&) = default;
};

/// Cubemap render -> catadioptric projection -> rectification, with cached lookups.
class ImagingPipeline {
 public:
  explicit ImagingPipeline(ImagingConfig config);

  CatadioptricImage capture_catadioptric(const LandmarkWorld& world, Position2D pos) const;
  PanoramaImage capture(const LandmarkWorld& world, Position2D pos, HeadingAngle gaze) const;
  PanoramaImage rectify(const CatadioptricImage& cat, HeadingAngle gaze) const {
    return rectifier_.rectify(cat, gaze);
  }
  const ImagingConfig& config() const { return config_; }

 private:
  ImagingConfig config_;
  CatadioptricProjector projector_;
  Rectifier rectifier_;
};

}  // namespace homing
