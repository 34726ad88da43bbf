#include "homing/geometry.hpp"

#include "homing/error.hpp"

namespace homing {

double wrap_angle(double rad) {
  double a = std::remainder(rad, kTwoPi);
  if (a <= -kPi) a += kTwoPi;
  return a;
}

HeadingAngle gaze_angle(Vec2 gaze_vector) {
  if (!(gaze_vector.norm() > 0.0) || !std::isfinite(gaze_vector.norm())) {
    throw InvalidArgument("gaze_angle: gaze vector must be nonzero and finite");
  }
  return HeadingAngle(std::atan2(-gaze_vector.x, gaze_vector.y));
}

Vec2 rotate2(Vec2 v, double omega) {
  const double c = std::cos(omega);
  const double s = std::sin(omega);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

HomeVector relative_home_vector(Position2D pos, Position2D nest, HeadingAngle gaze) {
  const Vec2 to_nest = nest - pos;
  const double dist = to_nest.norm();
  if (!(dist > kNestExclusionRadius)) {
    throw DegenerateLabel("relative_home_vector: position coincides with the nest");
  }
  const double hx = to_nest.x / dist;
  const double hy = to_nest.y / dist;
  const double c = std::cos(gaze.radians());
  const double s = std::sin(gaze.radians());
  // R_z(-omega) = [[c, s], [-s, c]]
  return {c * hx + s * hy, -s * hx + c * hy};
}

Vec2 egocentric_to_world(HomeVector rel, HeadingAngle gaze) {
  return rotate2(rel.as_vec(), gaze.radians());
}

double angular_error_deg(HomeVector pred, HomeVector truth) {
  const double np = pred.norm();
  const double nt = truth.norm();
  if (!(np > 0.0) || !(nt > 0.0) || !std::isfinite(np) || !std::isfinite(nt)) {
    throw UndefinedDirection("angular_error: direction of a zero vector is undefined");
  }
  const double diff = std::atan2(pred.y, pred.x) - std::atan2(truth.y, truth.x);
  return std::abs(rad2deg(wrap_angle(diff)));
}

}  // namespace homing
