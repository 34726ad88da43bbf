#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "calibration.hpp"
#include "gradient_check.hpp"
#include "homing/dataset.hpp"
#include "homing/evaluation.hpp"
#include "homing/experiment.hpp"
#include "homing/mission.hpp"
#include "homing/network.hpp"
#include "homing/omni.hpp"
#include "homing/world.hpp"
#include "label_oracle.hpp"

using namespace homing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void verdict(int id, bool ok, const std::string& what) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void note(const char* fmt, double a = 0, double b = 0, double c = 0, double d = 0) {
  std::printf("  ");
  std::printf(fmt, a, b, c, d);
  std::printf("\n");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double mean_training_error(const Params& params, const Dataset& d) {
  std::vector<float> buf(std::size_t(d.rows()) * d.cols());
  ActivationCache<double> cache;
  double sum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    d.fill_view(i, buf);
    sum += angular_error_deg(forward(params, std::span<const float>(buf), d.rows(), d.cols(), cache),
                             d.entry(i).clean_label);
  }
  return sum / double(d.size());
}

struct Networks {
  Params spiral;
  Params grid;
  Params grid_noisy;
};

void criterion_1() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (const auto& g : testing::check_all_gradients(NetworkShape::for_input(21, 40), 1)) {
    std::printf("  %-14s %zu params, max rel err %.3e\n", g.group.c_str(), g.count, g.max_relative_error);
    worst = std::max(worst, g.max_relative_error);
  }
  const double t = seconds_since(t0);
  verdict(1, worst < 1e-4 && t < 60.0, fmt("finite differences vs backward, max rel err %.2e in %.1f s", worst, t));
}

void criterion_2() {
  const double worst = testing::label_oracle_max_error(1000, 7);
  verdict(2, worst < 1e-6, fmt("label oracle over 1000 triples, max component error %.2e", worst));
}

void criterion_3(const ImagingPipeline& img, const LandmarkWorld& w) {
  const NetworkShape s;
  Params p(s);
  init_uniform(p, 1);
  ActivationCache<double> cache;
  forward(p, img.capture(w, w.nest + Vec2{1, 1}, HeadingAngle{}), cache);
  const auto& a = cache.conv1_post;
  const auto& b = cache.conv2_post;
  const bool ok = a.channels == 2 && a.rows == 50 && a.cols == 449 && b.channels == 4 && b.rows == 12 &&
                  b.cols == 112 && param_count(s) == 11010;
  std::printf("  conv1 %dx%dx%d, conv2 %dx%dx%d, %zu parameters\n", a.channels, a.rows, a.cols, b.channels, b.rows,
              b.cols, param_count(s));
  verdict(3, ok, "activation shapes and parameter count at 201x1800");
}

void criterion_4(const ImagingPipeline& img, const LandmarkWorld& w) {
  const CatadioptricImage cat = img.capture_catadioptric(w, w.nest + Vec2{-2, 1.5});
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> omega(-180.0, 180.0);
  std::uniform_int_distribution<int> kk(-1800, 1800);
  int exact = 0;
  for (int t = 0; t < 20; ++t) {
    const double w0 = omega(rng);
    const int k = kk(rng);
    const PanoramaImage base = img.rectify(cat, HeadingAngle::from_degrees(w0));
    const PanoramaImage moved = img.rectify(cat, HeadingAngle::from_degrees(w0 + k * 0.2));
    exact += moved.image == shift_columns(base, k).image;
  }
  verdict(4, exact == 20, fmt("rectify at w + k*0.2 deg equals a roll by k, %.0f/20 bit-exact", exact));
}

void criterion_5(const ImagingPipeline& img, const LandmarkWorld& w) {
  const auto& spec = img.config().panorama;
  double worst = 0.0;
  for (Vec2 off : {Vec2{0.5, 0.5}, Vec2{-3, 2}, Vec2{4, -4}, Vec2{0, 6}, Vec2{-5, -1}}) {
    const PanoramaImage a = img.capture(w, w.nest + off, HeadingAngle{});
    const PanoramaImage b =
        render_panorama_direct(w, w.nest + off, img.config().camera_height, spec.rows, spec.cols, spec.elevation);
    worst = std::max(worst, mean_absolute_difference(a.image, b.image));
  }
  verdict(5, worst < testing::kImagingMadBound,
          fmt("catadioptric vs direct, worst MAD %.4f over 5 locations (bound %.2f)", worst, testing::kImagingMadBound));
}

Params criterion_6(const ImagingPipeline& img, const LandmarkWorld& w, const Dataset& grid_data) {
  DatasetSpec ds;
  ds.pattern = learning_spiral(w.nest);
  auto t0 = Clock::now();
  const Dataset d = build_dataset(w, ds, img);
  note("spiral dataset: %.0f examples, %.0f renders, %.1f s", double(d.size()), d.render_count(), seconds_since(t0));
  TrainConfig tc;
  TrainResult tr;
  t0 = Clock::now();
  Params p = train_network<double>(d, tc, &tr);
  const double train_s = seconds_since(t0);
  const double err = mean_training_error(p, d);
  note("one epoch in %.1f s, final window loss %.4f, mean training error %.2f deg", train_s, tr.trace.back().loss, err);
  note("grid preset dataset: %.0f examples", double(grid_data.size()));
  verdict(6, err < 30.0 && train_s < 1800.0 && d.size() == 36000 && grid_data.size() == 35640,
          fmt("spiral training error %.2f deg after one epoch (%.0f s); grid preset has %.0f examples", err, train_s,
              double(grid_data.size())));
  return p;
}

void criterion_7(const ImagingPipeline& img, const LandmarkWorld& w, const Dataset& grid_data, Networks& nets) {
  TrainConfig tc;
  auto t0 = Clock::now();
  nets.grid = train_network<double>(grid_data, tc);
  nets.grid_noisy = train_network<double>(grid_data.reshuffled(1, 10.0), tc);
  note("two grid trainings in %.1f s", seconds_since(t0));
  const auto locs = grid_locations(evaluation_grid(w.nest), w.nest);
  const Params* list[] = {&nets.grid, &nets.grid_noisy, &nets.spiral};
  t0 = Clock::now();
  const auto reps = bearing_maps(list, w, img, locs);
  note("%.0f evaluation locations in %.1f s", double(locs.size()), seconds_since(t0));
  note("high-res grid error: grid %.2f deg, grid + 10 deg noise %.2f deg, spiral %.2f deg", reps[0].mean_error_deg,
       reps[1].mean_error_deg, reps[2].mean_error_deg);
  const double diff = std::abs(reps[1].mean_error_deg - reps[0].mean_error_deg);
  verdict(7, diff < 5.0 && reps[0].undefined_count == 0 && reps[1].undefined_count == 0,
          fmt("label noise changes the grid network's high-res error by %.2f deg", diff));
}

void criterion_8(const ImagingPipeline& img, const LandmarkWorld& w, const Networks& nets) {
  const auto starts = perimeter_outbound(12, 30.0);
  const std::uint64_t seeds[] = {1};
  BatchSummary sums[2];
  bool bounds_ok = true;
  for (int m = 0; m < 2; ++m) {
    MissionSpec spec;
    spec.pattern = m == 0 ? TrajectoryPattern(learning_spiral(w.nest)) : TrajectoryPattern(learning_grid(w.nest));
    const Params nets_m[] = {m == 0 ? nets.spiral : nets.grid};
    const auto t0 = Clock::now();
    const BatchResult b = fly_batch(w, spec, starts, nets_m, seeds, img);
    std::printf("  %s homing (%.1f s):\n", m == 0 ? "spiral" : "grid", seconds_since(t0));
    for (std::size_t i = 0; i < b.runs.size(); ++i) {
      const HomingRun& r = b.runs[i];
      const double d = distance(r.homing_start, w.nest);
      const int bound = straight_line_step_bound(r.homing_start, w.nest, spec.homing_step, spec.success_radius);
      const int naive = static_cast<int>(std::ceil(d / spec.homing_step));
      const Position2D end = r.points.back().position;
      std::printf("    start %3.0f deg, d %.2f m: %s in %3d steps (bound %d, ceil(d/step) %d), end %.2f m from nest %s\n",
                  starts[i][0].heading_deg, d, r.success ? "success" : "failure", r.homing_steps, bound, naive,
                  distance(end, w.nest), r.failure_reason.c_str());
      if (r.success && r.homing_steps < bound) bounds_ok = false;
    }
    sums[m] = b.summary;
    std::printf("    success %d/%d, mean steps of successes %.1f\n", b.summary.successes, b.summary.runs,
                b.summary.mean_steps_successful);
  }
  const bool ok = sums[0].successes >= 8 && bounds_ok && sums[1].success_rate <= sums[0].success_rate;
  verdict(8, ok,
          fmt("spiral %.0f/12 successes, grid %.0f/12; every success within the straight-line bound: ",
              sums[0].successes, sums[1].successes) +
              (bounds_ok ? "yes" : "no"));
}

void criterion_9(const ImagingPipeline& img, const LandmarkWorld& w, const Networks& nets) {
  double dist[2];
  for (int m = 0; m < 2; ++m) {
    const TrajectoryPattern pat = m == 0 ? TrajectoryPattern(learning_spiral(w.nest)) : TrajectoryPattern(learning_grid(w.nest));
    StreamConfig sc;
    sc.domain = evaluation_domain(pat, w.nest);
    std::vector<StreamTrace> traces;
    const auto t0 = Clock::now();
    for (const Position2D s : perimeter_starts(w.nest, 5.0, 12))
      traces.push_back(stream_integrate(m == 0 ? nets.spiral : nets.grid, w, img, s, sc));
    const ConvergenceSummary c = convergence_analysis(traces, w.nest);
    dist[m] = c.centroid_to_nest;
    std::printf("  %s streams (%.1f s): centroid offset (%.3f, %.3f), %.3f m from nest, %d/12 converged\n",
                m == 0 ? "spiral" : "grid", seconds_since(t0), c.centroid.x - w.nest.x, c.centroid.y - w.nest.y,
                c.centroid_to_nest, c.converged);
  }
  verdict(9, dist[0] < dist[1],
          fmt("stream-endpoint centroid to nest: spiral %.3f m, grid %.3f m", dist[0], dist[1]));
}

void criterion_10() {
  std::string hashes[2];
  bool ran = true;
  for (int i = 0; i < 2; ++i) {
    const fs::path out = fs::temp_directory_path() / ("homing_acceptance_rerun" + std::to_string(i));
    fs::remove_all(out);
    const ExperimentConfig c =
        load_experiment("world = three-tree\nimaging = reduced\npattern = spiral\ncommands = train eval\n",
                        "acceptance", {"out=" + out.string(), "seed=11"});
    std::ostringstream log;
    ran = ran && run_command("run", c, log) == kExitOk;
    for (const char* f : {"loss.csv", "eval.csv", "model.bin", "eval_summary.txt"}) hashes[i] += sha256_file(out / f);
    fs::remove_all(out);
  }
  verdict(10, ran && hashes[0] == hashes[1], "train + eval rerun with the same seed gives byte-identical artifacts");
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  const LandmarkWorld world = make_three_tree_world();
  const ImagingPipeline img(ImagingConfig::full());

  criterion_1();
  criterion_2();
  criterion_3(img, world);
  criterion_4(img, world);
  criterion_5(img, world);

  DatasetSpec gs;
  gs.pattern = learning_grid(world.nest);
  const Dataset grid_data = build_dataset(world, gs, img);
  Networks nets;
  nets.spiral = criterion_6(img, world, grid_data);
  criterion_7(img, world, grid_data, nets);
  criterion_8(img, world, nets);
  criterion_9(img, world, nets);
  criterion_10();

  std::printf("acceptance finished in %.0f s, %d failing\n", seconds_since(t0), failures);
  return failures == 0 ? 0 : 1;
}
