#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "homing/network.hpp"

namespace homing::testing {

struct GroupError {
  std::string group;
  double max_relative_error = 0.0;
  std::size_t count = 0;
};

/// Relative error with an absolute floor so that vanishing gradients compare absolutely.
inline double relative_error(double analytic, double numeric, double floor = 1e-7) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline double loss_at(const Params& p, const std::vector<float>& input, int rows, int cols, HomeVector label) {
  ActivationCache<double> cache;
  return mse_loss(forward(p, std::span<const float>(input), rows, cols, cache), label);
}

/// Central differences against backward() for every parameter of every group.
inline std::vector<GroupError> check_all_gradients(const NetworkShape& shape, std::uint64_t seed, double eps = 1e-5) {
  Params p(shape);
  init_uniform(p, seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<float> pix(0.0f, 1.0f);
  std::vector<float> input(std::size_t(shape.input_rows) * shape.input_cols);
  for (auto& v : input) v = pix(rng);
  const HomeVector label{0.6, -0.8};

  ActivationCache<double> cache;
  forward(p, std::span<const float>(input), shape.input_rows, shape.input_cols, cache);
  const Params g = backward(p, cache, label);

  Params probe = p;
  const std::size_t offsets[] = {0,
                                 shape.conv1_weight_count(),
                                 shape.conv1_weight_count() + shape.conv1_channels,
                                 shape.conv1_weight_count() + shape.conv1_channels + shape.conv2_weight_count(),
                                 shape.conv1_weight_count() + shape.conv1_channels + shape.conv2_weight_count() +
                                     shape.conv2_channels,
                                 shape.param_count() - 2,
                                 shape.param_count()};
  const char* names[] = {"conv1_weights", "conv1_biases", "conv2_weights", "conv2_biases", "fc_weights", "fc_biases"};
  std::vector<GroupError> out;
  for (int grp = 0; grp < 6; ++grp) {
    GroupError e{names[grp], 0.0, 0};
    for (std::size_t i = offsets[grp]; i < offsets[grp + 1]; ++i) {
      const double keep = probe.values()[i];
      probe.values()[i] = keep + eps;
      const double up = loss_at(probe, input, shape.input_rows, shape.input_cols, label);
      probe.values()[i] = keep - eps;
      const double down = loss_at(probe, input, shape.input_rows, shape.input_cols, label);
      probe.values()[i] = keep;
      const double numeric = (up - down) / (2 * eps);
      e.max_relative_error = std::max(e.max_relative_error, relative_error(g.values()[i], numeric));
      ++e.count;
    }
    out.push_back(e);
  }
  return out;
}

}  // namespace homing::testing
