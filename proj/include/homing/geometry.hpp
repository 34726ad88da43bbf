#pragma once

#include <cmath>
#include <numbers>

namespace homing {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  double norm() const { return std::hypot(x, y); }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Planar world position in meters: x east, y north.
struct Position2D {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator-(Position2D a, Position2D b) { return {a.x - b.x, a.y - b.y}; }
  friend Position2D operator+(Position2D p, Vec2 v) { return {p.x + v.x, p.y + v.y}; }
  friend bool operator==(const Position2D&, const Position2D&) = default;
};

inline double distance(Position2D a, Position2D b) { return (a - b).norm(); }

/// Wraps any angle into (-pi, pi].
double wrap_angle(double rad);

/// Heading measured from north ([0,1]), counterclockwise positive, kept in (-pi, pi].
class HeadingAngle {
 public:
  HeadingAngle() = default;
  explicit HeadingAngle(double rad) : rad_(wrap_angle(rad)) {}

  static HeadingAngle from_degrees(double deg) { return HeadingAngle(deg2rad(deg)); }

  double radians() const { return rad_; }
  double degrees() const { return rad2deg(rad_); }

  /// Unit world-frame vector the heading points along.
  Vec2 direction() const { return {-std::sin(rad_), std::cos(rad_)}; }

  friend bool operator==(const HeadingAngle&, const HeadingAngle&) = default;

 private:
  double rad_ = 0.0;
};

/// Egocentric home direction: y forward along the gaze, x to the right.
struct HomeVector {
  double x = 0.0;
  double y = 0.0;

  double norm() const { return std::hypot(x, y); }
  Vec2 as_vec() const { return {x, y}; }
  friend bool operator==(const HomeVector&, const HomeVector&) = default;
};

/// Heading of a (nonzero) world-frame gaze vector: atan2(-g.x, g.y).
HeadingAngle gaze_angle(Vec2 gaze_vector);

/// Counterclockwise rotation of v by omega.
Vec2 rotate2(Vec2 v, double omega);

/// Unit home vector of a camera at `pos` looking along `gaze`, in its own frame.
/// Throws DegenerateLabel when pos lies within 1e-9 m of the nest.
HomeVector relative_home_vector(Position2D pos, Position2D nest, HeadingAngle gaze);

/// Maps an egocentric vector back into the world frame for a given gaze.
Vec2 egocentric_to_world(HomeVector rel, HeadingAngle gaze);

/// Absolute wrapped difference of the two directions, in degrees [0, 180].
/// Throws UndefinedDirection on zero or non-finite input.
double angular_error_deg(HomeVector pred, HomeVector truth);

inline constexpr double kNestExclusionRadius = 1e-9;

}  // namespace homing
