#pragma once

#include "homing/dataset.hpp"
#include "homing/network.hpp"
#include "homing/omni.hpp"
#include "homing/world.hpp"

namespace homing::testing {

/// Reduced-resolution three-tree world with a spiral-trained network, built once per process.
struct TrainedFixture {
  LandmarkWorld world;
  ImagingPipeline imaging{ImagingConfig::reduced()};
  Dataset dataset;
  Params params;
  TrainResult train;
};

inline const TrainedFixture& reduced_spiral_fixture() {
  static const TrainedFixture f = [] {
    TrainedFixture t;
    t.world = make_three_tree_world();
    DatasetSpec ds;
    ds.pattern = learning_spiral(t.world.nest);
    t.dataset = build_dataset(t.world, ds, t.imaging);
    TrainConfig tc;
    tc.log_every = 1000;
    t.params = train_network<double>(t.dataset, tc, &t.train);
    return t;
  }();
  return f;
}

/// Mean angular error over every example of a dataset.
inline double dataset_mean_error(const Params& params, const Dataset& d) {
  std::vector<float> buf(std::size_t(d.rows()) * d.cols());
  ActivationCache<double> cache;
  double sum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    d.fill_view(i, buf);
    const HomeVector p = forward(params, std::span<const float>(buf), d.rows(), d.cols(), cache);
    sum += angular_error_deg(p, d.entry(i).clean_label);
  }
  return sum / double(d.size());
}

}  // namespace homing::testing
