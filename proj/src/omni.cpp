#include "homing/omni.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "homing/error.hpp"
#include "homing/keyvalue.hpp"
#include "homing/parallel.hpp"

namespace homing {

void MirrorModel::validate() const {
  if (!(latus_rectum > 0.0) || !(plane_distance > 0.0)) {
    throw InvalidArgument("mirror: latus rectum and image-plane distance must be > 0");
  }
  if (size < 2 || size % 2 != 0) throw InvalidArgument("mirror: image size must be even and >= 2");
}

double MirrorModel::elevation_at_radius(double r_metric) const {
  return 0.5 * kPi - 2.0 * std::atan(r_metric / focal_parameter());
}

double MirrorModel::radius_at_elevation(double elevation) const {
  return focal_parameter() * std::tan(0.5 * (0.5 * kPi - elevation));
}

bool MirrorModel::valid_pixel(int row, int col) const {
  if (row < 0 || col < 0 || row >= size || col >= size) return false;
  const double dx = col + 0.5 - center();
  const double dy = row + 0.5 - center();
  return dx * dx + dy * dy <= rim_radius_px() * rim_radius_px();
}

std::optional<Vec3> MirrorModel::pixel_direction(int row, int col) const {
  if (!valid_pixel(row, col)) return std::nullopt;
  const double q = pixel_pitch();
  const double h = focal_parameter();
  const double sx = (col + 0.5 - center()) * q / h;
  const double sy = -(row + 0.5 - center()) * q / h;
  const double s2 = sx * sx + sy * sy;
  const double k = 1.0 / (1.0 + s2);
  return Vec3{2.0 * sx * k, 2.0 * sy * k, (1.0 - s2) * k};
}

Vec2 MirrorModel::image_position(Vec3 direction) const {
  const Vec3 d = direction.normalized();
  const double h = focal_parameter();
  const double q = pixel_pitch();
  const double denom = 1.0 + d.z;
  if (denom <= 0.0) throw InvalidArgument("mirror: the nadir has no image position");
  const double xm = h * d.x / denom;
  const double ym = h * d.y / denom;
  return {center() + xm / q, center() - ym / q};
}

double CatadioptricImage::valid_fraction() const {
  if (valid.empty()) return 0.0;
  return static_cast<double>(std::count(valid.begin(), valid.end(), std::uint8_t{1})) / valid.size();
}

CatadioptricProjector::CatadioptricProjector(MirrorModel mirror, int face_size)
    : mirror_(mirror), face_size_(face_size) {
  mirror_.validate();
  const int c = mirror_.size;
  lut_.assign(static_cast<std::size_t>(c) * c, -1);
  valid_.assign(lut_.size(), 0);
  for (int r = 0; r < c; ++r) {
    for (int col = 0; col < c; ++col) {
      const auto dir = mirror_.pixel_direction(r, col);
      if (!dir) continue;
      const CubeSample s = cube_lookup(*dir, face_size_);
      const std::size_t i = static_cast<std::size_t>(r) * c + col;
      lut_[i] = static_cast<std::int32_t>((static_cast<int>(s.face) * face_size_ + s.row) * face_size_ + s.col);
      valid_[i] = 1;
    }
  }
}

CatadioptricImage CatadioptricProjector::project(const CubemapView& cubemap) const {
  if (cubemap.face_size != face_size_) throw ShapeError("catadioptric projection: cubemap face size mismatch");
  CatadioptricImage out{GrayImage(mirror_.size, mirror_.size), mirror_, valid_};
  auto dst = out.image.pixels();
  const std::size_t face_px = static_cast<std::size_t>(face_size_) * face_size_;
  for (std::size_t i = 0; i < lut_.size(); ++i) {
    const std::int32_t k = lut_[i];
    if (k < 0) continue;
    const std::size_t face = static_cast<std::size_t>(k) / face_px;
    dst[i] = cubemap.faces[face].pixels()[static_cast<std::size_t>(k) % face_px];
  }
  return out;
}

CatadioptricImage catadioptric_project(const CubemapView& cubemap, double latus_rectum, double plane_distance,
                                       int size) {
  return CatadioptricProjector(MirrorModel{latus_rectum, plane_distance, size}, cubemap.face_size).project(cubemap);
}

namespace {

struct GazeSplit {
  long columns;
  double frac;
};

GazeSplit split_gaze(double gaze_rad, double pitch) {
  const double t = gaze_rad / pitch;
  double whole = std::floor(t);
  double frac = std::round((t - whole) * 1e6) / 1e6;
  if (frac >= 1.0) {
    whole += 1.0;
    frac = 0.0;
  }
  return {static_cast<long>(whole), frac};
}

int wrap_index(long i, int n) {
  const long m = i % n;
  return static_cast<int>(m < 0 ? m + n : m);
}

}  // namespace

Rectifier::Rectifier(MirrorModel mirror, PanoramaSpec spec) : mirror_(mirror), spec_(spec) {
  mirror_.validate();
  if (spec_.rows < 2 || spec_.cols < 2) throw InvalidArgument("rectify: need rows >= 2 and cols >= 2");
  lut_zero_ = build_lut(0.0);
}

std::vector<std::int32_t> Rectifier::build_lut(double frac) const {
  const int rows = spec_.rows;
  const int cols = spec_.cols;
  const double pitch = spec_.column_pitch();
  const int c = mirror_.size;
  std::vector<std::int32_t> lut(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    const double e = panorama_row_elevation(spec_.elevation, rows, r);
    const double ce = std::cos(e), se = std::sin(e);
    for (int u = 0; u < cols; ++u) {
      const double az = (u + 0.5 + frac) * pitch - kPi;
      Vec2 p = mirror_.image_position(Vec3{-std::sin(az) * ce, std::cos(az) * ce, se});
      int col = static_cast<int>(std::floor(p.x));
      int row = static_cast<int>(std::floor(p.y));
      if (!mirror_.valid_pixel(row, col)) {
        // Pull the sample back inside the footprint along its radius.
        const Vec2 v{p.x - mirror_.center(), p.y - mirror_.center()};
        const double scale = (mirror_.rim_radius_px() - 1.0) / v.norm();
        col = static_cast<int>(std::floor(mirror_.center() + scale * v.x));
        row = static_cast<int>(std::floor(mirror_.center() + scale * v.y));
      }
      lut[static_cast<std::size_t>(r) * cols + u] = row * c + col;
    }
  }
  return lut;
}

PanoramaImage Rectifier::rectify(const CatadioptricImage& cat, HeadingAngle gaze) const {
  if (!(cat.mirror == mirror_)) throw ShapeError("rectify: catadioptric image does not match the mirror model");
  const int rows = spec_.rows;
  const int cols = spec_.cols;
  const GazeSplit split = split_gaze(gaze.radians(), spec_.column_pitch());
  std::vector<std::int32_t> local;
  const std::vector<std::int32_t>* lut = &lut_zero_;
  if (split.frac != 0.0) {
    local = build_lut(split.frac);
    lut = &local;
  }
  PanoramaImage out{GrayImage(rows, cols), gaze, spec_.elevation, PanoramaSource::kCatadioptric};
  auto src = cat.image.pixels();
  const int offset = wrap_index(split.columns, cols);
  for (int r = 0; r < rows; ++r) {
    const std::int32_t* row_lut = lut->data() + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) {
      int u = c + offset;
      if (u >= cols) u -= cols;
      out.image.at(r, c) = src[row_lut[u]];
    }
  }
  return out;
}

PanoramaImage rectify(const CatadioptricImage& cat, HeadingAngle gaze, int rows, int cols, ElevationRange range) {
  return Rectifier(cat.mirror, PanoramaSpec{rows, cols, range}).rectify(cat, gaze);
}

PanoramaImage shift_columns(const PanoramaImage& p, int k) {
  const int cols = p.cols();
  const int rows = p.rows();
  PanoramaImage out{GrayImage(rows, cols), HeadingAngle(p.gaze.radians() + k * (kTwoPi / cols)), p.elevation,
                    p.source};
  const int offset = wrap_index(k, cols);
  for (int r = 0; r < rows; ++r) {
    const float* src = p.image.pixels().data() + static_cast<std::size_t>(r) * cols;
    float* dst = out.image.pixels().data() + static_cast<std::size_t>(r) * cols;
    std::copy(src + offset, src + cols, dst);
    std::copy(src, src + offset, dst + (cols - offset));
  }
  return out;
}

PanoramaImage shift_gaze(const PanoramaImage& p, double delta, double* rounding_error) {
  const double pitch = kTwoPi / p.cols();
  const double k = std::round(delta / pitch);
  if (rounding_error) *rounding_error = delta - k * pitch;
  return shift_columns(p, wrap_index(static_cast<long>(k), p.cols()));
}

CatadioptricImage import_circular_photo(const GrayImage& photo, double center_x, double center_y, double radius_px,
                                        MirrorModel mirror) {
  mirror.validate();
  if (!(radius_px > 0.0)) throw InvalidArgument("import_circular_photo: radius must be > 0");
  const int c = mirror.size;
  CatadioptricImage out{GrayImage(c, c), mirror, std::vector<std::uint8_t>(static_cast<std::size_t>(c) * c, 0)};
  const double scale = radius_px / mirror.rim_radius_px();
  for (int r = 0; r < c; ++r) {
    for (int col = 0; col < c; ++col) {
      if (!mirror.valid_pixel(r, col)) continue;
      const int px = static_cast<int>(std::floor(center_x + (col + 0.5 - mirror.center()) * scale));
      const int py = static_cast<int>(std::floor(center_y + (r + 0.5 - mirror.center()) * scale));
      if (px < 0 || py < 0 || px >= photo.cols() || py >= photo.rows()) continue;
      out.image.at(r, col) = photo.at(py, px);
      out.valid[static_cast<std::size_t>(r) * c + col] = 1;
    }
  }
  return out;
}

namespace {

std::filesystem::path meta_path(const std::filesystem::path& pgm_path) {
  auto p = pgm_path;
  p.replace_extension(".meta");
  return p;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double meta_number(const KeyValueDocument& doc, const std::string& key) {
  const auto v = doc.get(key);
  if (!v) throw FormatError(doc.source() + ": missing '" + key + "'");
  const auto nums = parse_numbers(*v);
  if (nums.size() != 1) throw FormatError(doc.source() + ": '" + key + "' expects one number");
  return nums[0];
}

}  // namespace

void write_panorama(const PanoramaImage& p, const std::filesystem::path& pgm_path) {
  write_pgm(p.image, pgm_path);
  std::ofstream meta(meta_path(pgm_path));
  meta << "kind = panorama\n"
       << "gaze_deg = " << num(p.gaze.degrees()) << "\n"
       << "elevation_lo_deg = " << num(p.elevation.lo_deg) << "\n"
       << "elevation_hi_deg = " << num(p.elevation.hi_deg) << "\n"
       << "source = " << (p.source == PanoramaSource::kDirect ? "direct" : "catadioptric") << "\n";
}

PanoramaImage read_panorama(const std::filesystem::path& pgm_path) {
  const auto doc = KeyValueDocument::load(meta_path(pgm_path));
  PanoramaImage p;
  p.image = read_pgm(pgm_path);
  p.gaze = HeadingAngle::from_degrees(meta_number(doc, "gaze_deg"));
  p.elevation = {meta_number(doc, "elevation_lo_deg"), meta_number(doc, "elevation_hi_deg")};
  const auto src = doc.get("source").value_or("direct");
  p.source = src == "catadioptric" ? PanoramaSource::kCatadioptric : PanoramaSource::kDirect;
  return p;
}

void write_catadioptric(const CatadioptricImage& c, const std::filesystem::path& pgm_path) {
  write_pgm(c.image, pgm_path);
  std::ofstream meta(meta_path(pgm_path));
  meta << "kind = catadioptric\n"
       << "latus_rectum = " << num(c.mirror.latus_rectum) << "\n"
       << "plane_distance = " << num(c.mirror.plane_distance) << "\n";
}

CatadioptricImage read_catadioptric(const std::filesystem::path& pgm_path) {
  const auto doc = KeyValueDocument::load(meta_path(pgm_path));
  GrayImage img = read_pgm(pgm_path);
  if (img.rows() != img.cols()) throw FormatError(pgm_path.string() + ": catadioptric image must be square");
  MirrorModel m{meta_number(doc, "latus_rectum"), meta_number(doc, "plane_distance"), img.rows()};
  m.validate();
  CatadioptricImage out{std::move(img), m, std::vector<std::uint8_t>(static_cast<std::size_t>(m.size) * m.size)};
  for (int r = 0; r < m.size; ++r) {
    for (int c = 0; c < m.size; ++c) out.valid[static_cast<std::size_t>(r) * m.size + c] = m.valid_pixel(r, c);
  }
  return out;
}

ImagingConfig ImagingConfig::full() { return ImagingConfig{}; }

ImagingConfig ImagingConfig::reduced() {
  ImagingConfig c;
  c.face_size = 128;
  c.mirror.size = 256;
  c.panorama.rows = 51;
  c.panorama.cols = 360;
  return c;
}

ImagingPipeline::ImagingPipeline(ImagingConfig config)
    : config_(config),
      projector_(config.mirror, config.face_size),
      rectifier_(config.mirror, config.panorama) {}

CatadioptricImage ImagingPipeline::capture_catadioptric(const LandmarkWorld& world, Position2D pos) const {
  return projector_.project(render_cubemap(world, pos, config_.camera_height, config_.face_size));
}

PanoramaImage ImagingPipeline::capture(const LandmarkWorld& world, Position2D pos, HeadingAngle gaze) const {
  return rectifier_.rectify(capture_catadioptric(world, pos), gaze);
}

}  // namespace homing
