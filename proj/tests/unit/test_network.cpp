#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "gradient_check.hpp"
#include "homing/dataset.hpp"
#include "homing/error.hpp"
#include "homing/network.hpp"

using namespace homing;

namespace {

PanoramaImage random_view(int rows, int cols, std::uint64_t seed) {
  PanoramaImage p{GrayImage(rows, cols), HeadingAngle{}, {}, PanoramaSource::kDirect};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& v : p.image.pixels()) v = u(rng);
  return p;
}

}  // namespace

TEST_CASE("full resolution shapes and parameter count") {
  const NetworkShape s;
  CHECK(s.conv1_rows() == 50);
  CHECK(s.conv1_cols() == 449);
  CHECK(s.conv2_rows() == 12);
  CHECK(s.conv2_cols() == 112);
  CHECK(param_count(s) == 11010);
  CHECK(param_count(s) == (5 * 5 * 1 * 2 + 2) + (5 * 5 * 2 * 4 + 4) + (5376 * 2 + 2));
  CHECK(param_count(s) * 4 == 44040);

  Params p(s);
  init_uniform(p, 3);
  ActivationCache<double> cache;
  forward(p, random_view(201, 1800, 1), cache);
  CHECK(cache.conv1_post.channels == 2);
  CHECK(cache.conv1_post.rows == 50);
  CHECK(cache.conv1_post.cols == 449);
  CHECK(cache.conv2_post.channels == 4);
  CHECK(cache.conv2_post.rows == 12);
  CHECK(cache.conv2_post.cols == 112);
}

TEST_CASE("degenerate shapes are rejected") {
  NetworkShape s;
  s.conv1_channels = 0;
  CHECK_THROWS_AS(param_count(s), ShapeError);
  CHECK_THROWS_AS(NetworkShape::for_input(8, 8).validate(), ShapeError);
}

TEST_CASE("zero kernels give zero activations and zero prediction") {
  FeatureMap<double> in(1, 21, 40);
  for (auto& v : in.data) v = 0.7;
  const std::vector<double> k(2 * 25, 0.0), b(2, 0.0);
  const auto out = conv2d<double>(in, std::span<const double>(k), std::span<const double>(b), 2, 5, 4);
  CHECK(out.rows == 5);
  CHECK(out.cols == 9);
  for (double v : out.data) CHECK(v == 0.0);

  const Params zero(NetworkShape::for_input(51, 360));
  const HomeVector pred = predict(zero, random_view(51, 360, 2));
  CHECK(pred.x == 0.0);
  CHECK(pred.y == 0.0);
}

TEST_CASE("conv2d matches a direct sum") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  FeatureMap<double> in(2, 13, 17);
  for (auto& v : in.data) v = u(rng);
  std::vector<double> k(3 * 2 * 25), b(3);
  for (auto& v : k) v = u(rng);
  for (auto& v : b) v = u(rng);
  const auto out = conv2d<double>(in, std::span<const double>(k), std::span<const double>(b), 3, 5, 4);
  REQUIRE(out.rows == 3);
  REQUIRE(out.cols == 4);
  for (int o = 0; o < 3; ++o)
    for (int r = 0; r < out.rows; ++r)
      for (int c = 0; c < out.cols; ++c) {
        double acc = b[o];
        for (int i = 0; i < 2; ++i)
          for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 5; ++x) acc += k[((o * 2 + i) * 5 + y) * 5 + x] * in.at(i, 4 * r + y, 4 * c + x);
        CHECK(out.at(o, r, c) == doctest::Approx(std::tanh(acc)).epsilon(1e-12));
      }
}

TEST_CASE("forward is deterministic and bounded") {
  Params p(NetworkShape::for_input(51, 360));
  init_uniform(p, 9);
  const PanoramaImage v = random_view(51, 360, 4);
  const HomeVector a = predict(p, v), b = predict(p, v);
  CHECK(a == b);
  for (int i = 0; i < 100; ++i) {
    const HomeVector h = predict(p, random_view(51, 360, 100 + i));
    CHECK(std::abs(h.x) <= 1.0);
    CHECK(std::abs(h.y) <= 1.0);
    CHECK(h.norm() <= std::sqrt(2.0));
  }
  CHECK_THROWS_AS(predict(p, random_view(51, 361, 1)), ShapeError);
}

TEST_CASE("mse_loss examples") {
  CHECK(mse_loss({0.3, 0.4}, {0.3, 0.4}) == 0.0);
  CHECK(mse_loss({0, 0}, {0, 1}) == 0.5);
  CHECK(mse_loss({1, -1}, {-1, 1}) == 4.0);
}

TEST_CASE("gradients match central finite differences on a 1x21x40 input") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (const auto& g : testing::check_all_gradients(NetworkShape::for_input(21, 40), seed)) {
      INFO(g.group, " seed ", seed);
      CHECK(g.count > 0);
      CHECK(g.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("gradients vanish when the prediction equals the label") {
  Params p(NetworkShape::for_input(21, 40));
  init_uniform(p, 5);
  const PanoramaImage v = random_view(21, 40, 6);
  ActivationCache<double> cache;
  const HomeVector pred = forward(p, v, cache);
  const Params g = backward(p, cache, pred);
  for (double x : g.values()) CHECK(x == 0.0);
}

TEST_CASE("fc bias gradient on a one-pixel network equals the chain value") {
  const NetworkShape s{1, 1, 1, 1, 1, 1};
  Params p(s);
  init_uniform(p, 2);
  const std::vector<float> x{0.5f};
  ActivationCache<double> cache;
  const HomeVector pred = forward(p, std::span<const float>(x), 1, 1, cache);
  const HomeVector label{0.2, -0.3};
  const Params g = backward(p, cache, label);
  const double o0 = pred.x, o1 = pred.y;
  CHECK(g.fc_biases()[0] == doctest::Approx((o0 - label.x) * (1 - o0 * o0)).epsilon(1e-14));
  CHECK(g.fc_biases()[1] == doctest::Approx((o1 - label.y) * (1 - o1 * o1)).epsilon(1e-14));
}

TEST_CASE("output gradients with respect to conv2 activations") {
  Params p(NetworkShape::for_input(51, 360));
  init_uniform(p, 21);
  const PanoramaImage v = random_view(51, 360, 22);
  for (int out = 0; out < 2; ++out) {
    const auto g = output_gradients_wrt_conv2(p, v, out);
    ActivationCache<double> cache;
    forward(p, v, cache);
    std::mt19937_64 rng(out);
    std::uniform_int_distribution<std::size_t> cell(0, g.data.size() - 1);
    for (int t = 0; t < 20; ++t) {
      const std::size_t i = cell(rng);
      std::vector<double> a = cache.conv2_post.data;
      const double eps = 1e-5;
      a[i] += eps;
      const double up = std::tanh(head_forward(p, std::span<const double>(a))[out]);
      a[i] -= 2 * eps;
      const double down = std::tanh(head_forward(p, std::span<const double>(a))[out]);
      CHECK(testing::relative_error(g.data[i], (up - down) / (2 * eps)) < 1e-4);
    }
  }
  Params zero_fc = p;
  for (auto& w : zero_fc.fc_weights()) w = 0.0;
  for (double x : output_gradients_wrt_conv2(zero_fc, v, 0).data) CHECK(x == 0.0);
  CHECK_THROWS_AS(output_gradients_wrt_conv2(p, v, 2), InvalidArgument);
}

TEST_CASE("model files round-trip and reject bad headers") {
  Params p(NetworkShape::for_input(51, 360));
  init_uniform(p, 31);
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = dir / "homing_model_test.bin";
  save_params(p, path);
  CHECK(load_params<double>(path) == p);
  CHECK(std::filesystem::file_size(path) == 8 + 4 + 4 + 6 * 4 + 8 + p.size() * 8);

  NetworkParams<float> f(p.shape());
  init_uniform(f, 31);
  save_params(f, path);
  CHECK(load_params<float>(path) == f);

  // Bump the version field.
  {
    std::fstream io(path, std::ios::in | std::ios::out | std::ios::binary);
    io.seekp(8);
    const char v[4] = {9, 0, 0, 0};
    io.write(v, 4);
  }
  CHECK_THROWS_AS(load_params<double>(path), VersionError);
  {
    std::ofstream o(path, std::ios::binary);
    o << "NOTAMODEL";
  }
  CHECK_THROWS_AS(load_params<double>(path), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("a model trained at one resolution refuses views of another") {
  Params p(NetworkShape::for_input(51, 360));
  init_uniform(p, 1);
  const auto path = std::filesystem::temp_directory_path() / "homing_model_res.bin";
  save_params(p, path);
  const Params q = load_params<double>(path);
  CHECK_THROWS_AS(predict(q, random_view(201, 1800, 1)), ShapeError);
  std::filesystem::remove(path);
}

namespace {

Dataset tiny_dataset(int repeats, std::uint64_t seed) {
  const LandmarkWorld w = make_three_tree_world();
  const ImagingPipeline img(ImagingConfig::reduced());
  std::vector<Position2D> locs(repeats, w.nest + Vec2{1.5, -2.0});
  std::vector<PanoramaImage> views(repeats, img.capture(w, locs[0], HeadingAngle{}));
  return Dataset::assemble(locs, views, w.nest, 1, 0.0, seed, 1);
}

}  // namespace

TEST_CASE("learning rate zero leaves parameters unchanged") {
  const Dataset d = tiny_dataset(10, 1);
  TrainConfig tc;
  tc.learning_rate = 0.0;
  Params p(NetworkShape::for_input(d.rows(), d.cols()));
  init_uniform(p, tc.init_seed);
  const Params before = p;
  Optimizer<double> opt(tc, p.size());
  train_epoch(p, d, tc, opt);
  CHECK(p == before);
}

TEST_CASE("a single repeated example drives its loss down monotonically") {
  const Dataset d = tiny_dataset(100, 1);
  TrainConfig tc;
  tc.log_every = 1;
  TrainResult r;
  train_network<double>(d, tc, &r);
  REQUIRE(r.trace.size() == 100);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].loss <= r.trace[i - 1].loss);
  CHECK(r.trace.back().loss < r.trace.front().loss);
}

TEST_CASE("training is bit-reproducible and optimizers all reduce the loss") {
  const Dataset d = tiny_dataset(50, 2);
  for (OptimizerKind k : {OptimizerKind::kSgd, OptimizerKind::kMomentum, OptimizerKind::kAdam}) {
    TrainConfig tc;
    tc.optimizer = k;
    tc.log_every = 10;
    TrainResult r1, r2;
    const Params a = train_network<double>(d, tc, &r1);
    const Params b = train_network<double>(d, tc, &r2);
    CHECK(a == b);
    CHECK(r1.trace.back().loss < r1.trace.front().loss);
  }
  TrainConfig bad;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("non-finite loss reports the failing step") {
  const Dataset d = tiny_dataset(20, 3);
  TrainConfig tc;
  Params p(NetworkShape::for_input(d.rows(), d.cols()));
  init_uniform(p, 1);
  p.fc_biases()[0] = std::nan("");
  Optimizer<double> opt(tc, p.size());
  try {
    train_epoch(p, d, tc, opt);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(e.step() == 0);
  }
}
