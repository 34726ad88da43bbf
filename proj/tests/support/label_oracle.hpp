#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "homing/geometry.hpp"

namespace homing::testing {

/// Largest component error of relative_home_vector against a rotation-enumeration oracle.
/// Candidate rotations sit on a 0.001 degree lattice and gazes are drawn on the same lattice,
/// so the best candidate is the exact rotation.
inline double label_oracle_max_error(int triples, std::uint64_t seed) {
  constexpr int kCandidates = 360000;
  std::vector<double> c(kCandidates), s(kCandidates);
  for (int k = 0; k < kCandidates; ++k) {
    const double a = deg2rad(k * 0.001);
    c[k] = std::cos(a);
    s[k] = std::sin(a);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-50.0, 50.0);
  std::uniform_int_distribution<int> gaze_tick(0, kCandidates - 1);
  double worst = 0.0;
  for (int t = 0; t < triples; ++t) {
    const Position2D pos{538 + coord(rng), 573 + coord(rng)};
    const Position2D nest{538 + coord(rng), 573 + coord(rng)};
    const HeadingAngle gaze = HeadingAngle::from_degrees(gaze_tick(rng) * 0.001);
    const Vec2 g = gaze.direction();
    // R(-a) = [[c, s], [-s, c]] sends g to forward [0, 1] for the right candidate.
    int best = 0;
    double best_score = -2.0;
    for (int k = 0; k < kCandidates; ++k) {
      const double fy = -s[k] * g.x + c[k] * g.y;
      if (fy > best_score) {
        best_score = fy;
        best = k;
      }
    }
    const Vec2 d = nest - pos;
    const double n = d.norm();
    const double ex = (c[best] * d.x + s[best] * d.y) / n;
    const double ey = (-s[best] * d.x + c[best] * d.y) / n;
    const HomeVector h = relative_home_vector(pos, nest, gaze);
    worst = std::max({worst, std::abs(h.x - ex), std::abs(h.y - ey)});
  }
  return worst;
}

}  // namespace homing::testing
