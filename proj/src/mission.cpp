#include "homing/mission.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

#include "homing/error.hpp"
#include "homing/parallel.hpp"

namespace homing {

const char* to_string(Phase p) {
  switch (p) {
    case Phase::kLearning: return "learning";
    case Phase::kOutbound: return "outbound";
    case Phase::kInbound: return "inbound";
    case Phase::kHoming: return "homing";
  }
  return "unknown";
}

const char* to_string(DriftRule r) {
  switch (r) {
    case DriftRule::kStopAtLearningBoundary: return "boundary";
    case DriftRule::kFixedOffset: return "offset";
    case DriftRule::kGaussian: return "gaussian";
  }
  return "unknown";
}

void MissionSpec::validate() const {
  if (!(homing_step > 0.0)) throw InvalidArgument("mission: homing_step must be > 0");
  if (!(success_radius > 0.0)) throw InvalidArgument("mission: success_radius must be > 0");
  if (!(inbound_step > 0.0)) throw InvalidArgument("mission: inbound_step must be > 0");
  if (max_homing_steps < 0) throw InvalidArgument("mission: max_homing_steps must be >= 0");
  if (drift_sigma < 0.0) throw InvalidArgument("mission: drift_sigma must be >= 0");
  if (outbound.empty()) throw InvalidArgument("mission: outbound plan is empty");
  for (const auto& leg : outbound) {
    if (!(leg.distance >= 0.0)) throw InvalidArgument("mission: outbound leg distance must be >= 0");
  }
}

std::vector<Position2D> HomingRun::homing_path() const {
  std::vector<Position2D> out;
  for (const auto& p : points) {
    if (p.phase == Phase::kHoming) out.push_back(p.position);
  }
  return out;
}

int straight_line_step_bound(Position2D start, Position2D nest, double step, double success_radius) {
  const double d = distance(start, nest) - success_radius;
  if (d <= 0.0) return 0;
  // Tolerate rounding when d is an exact multiple of the step.
  return static_cast<int>(std::ceil(d / step - 1e-9));
}

Position2D learning_region_entry(const TrajectoryPattern& pattern, Position2D nest, Position2D from) {
  const Vec2 v = nest - from;
  if (const auto* g = std::get_if<GridPattern>(&pattern)) {
    const double h = 0.5 * g->side;
    const double lo[2] = {g->center.x - h, g->center.y - h};
    const double hi[2] = {g->center.x + h, g->center.y + h};
    const double p[2] = {from.x, from.y};
    const double d[2] = {v.x, v.y};
    double t = 0.0;
    for (int a = 0; a < 2; ++a) {
      if (p[a] < lo[a] && d[a] > 0) t = std::max(t, (lo[a] - p[a]) / d[a]);
      if (p[a] > hi[a] && d[a] < 0) t = std::max(t, (hi[a] - p[a]) / d[a]);
    }
    t = std::min(t, 1.0);
    return from + t * v;
  }
  const double r = pattern_extent(pattern, nest);
  const double dist = v.norm();
  if (dist <= r) return from;
  return from + (1.0 - r / dist) * v;
}

namespace {

void push(HomingRun& run, Phase phase, int step, Position2D pos, double heading_deg) {
  RunPoint p;
  p.phase = phase;
  p.step = step;
  p.position = pos;
  p.heading_deg = heading_deg;
  run.points.push_back(p);
}

double heading_deg_of(Vec2 v) { return v.norm() > 0.0 ? gaze_angle(v).degrees() : 0.0; }

}  // namespace

HomingRun home_from(const LandmarkWorld& world, const MissionSpec& spec, const ImagingPipeline& imaging,
                    const Params& params, Position2D start, HeadingAngle heading) {
  spec.validate();
  HomingRun run;
  run.homing_start = start;
  Position2D pos = start;
  RunPoint first;
  first.phase = Phase::kHoming;
  first.position = pos;
  first.heading_deg = heading.degrees();
  run.points.push_back(first);
  ActivationCache<double> cache;
  while (true) {
    if (distance(pos, world.nest) <= spec.success_radius) {
      run.success = true;
      break;
    }
    if (run.homing_steps >= spec.max_homing_steps) {
      run.failure_reason = "max_steps";
      break;
    }
    const PanoramaImage view = imaging.capture(world, pos, heading);
    const HomeVector pred = forward(params, view, cache);
    const double n = pred.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      run.failure_reason = std::isfinite(n) ? "undefined_prediction" : "non_finite_prediction";
      break;
    }
    heading = gaze_angle(egocentric_to_world(pred, view.gaze));
    pos = pos + spec.homing_step * heading.direction();
    ++run.homing_steps;
    RunPoint p;
    p.phase = Phase::kHoming;
    p.step = run.homing_steps;
    p.position = pos;
    p.heading_deg = heading.degrees();
    p.predicted = pred;
    p.view_gaze_deg = view.gaze.degrees();
    run.points.push_back(p);
  }
  return run;
}

HomingRun fly_mission(const LandmarkWorld& world, const MissionSpec& spec, const ImagingPipeline& imaging,
                      const Params& params, std::uint64_t seed) {
  spec.validate();
  HomingRun pre;
  const auto learning = pattern_locations(spec.pattern, world.nest);
  for (std::size_t i = 0; i < learning.size(); ++i) push(pre, Phase::kLearning, static_cast<int>(i), learning[i], 0.0);

  Position2D pos = world.nest;
  int step = 0;
  push(pre, Phase::kOutbound, step, pos, spec.outbound.front().heading_deg);
  for (const auto& leg : spec.outbound) {
    const HeadingAngle h = HeadingAngle::from_degrees(leg.heading_deg);
    const Position2D leg_start = pos;
    const int n = static_cast<int>(std::ceil(leg.distance / spec.inbound_step - 1e-9));
    for (int k = 1; k <= n; ++k) {
      pos = leg_start + std::min(k * spec.inbound_step, leg.distance) * h.direction();
      push(pre, Phase::kOutbound, ++step, pos, h.degrees());
    }
  }

  // Path integration: the agent believes it sits at `pos - error` and flies its believed path to the
  // learning-region entry; the true path is the believed one plus the accumulated error.
  Vec2 error = spec.drift_rule == DriftRule::kFixedOffset ? -1.0 * spec.drift_offset : Vec2{0.0, 0.0};
  const Position2D believed_start = pos + error;
  const Position2D believed_end = learning_region_entry(spec.pattern, world.nest, believed_start);
  const Vec2 leg = believed_end - believed_start;
  const double heading = heading_deg_of(leg);
  const int n = static_cast<int>(std::ceil(leg.norm() / spec.inbound_step - 1e-9));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spec.drift_sigma * std::sqrt(spec.inbound_step));
  const Vec2 offset = -1.0 * error;
  Vec2 walk{0.0, 0.0};
  step = 0;
  push(pre, Phase::kInbound, step, pos, heading);
  for (int k = 1; k <= n; ++k) {
    const double t = std::min(1.0, k * spec.inbound_step / leg.norm());
    if (spec.drift_rule == DriftRule::kGaussian) walk = walk + Vec2{noise(rng), noise(rng)};
    pos = believed_start + t * leg + offset + walk;
    push(pre, Phase::kInbound, ++step, pos, heading);
  }

  HomingRun run = home_from(world, spec, imaging, params, pos, HeadingAngle::from_degrees(heading));
  run.points.insert(run.points.begin(), pre.points.begin(), pre.points.end());
  run.seed = seed;
  return run;
}

HomingRun run_mission(const LandmarkWorld& world, const MissionSpec& spec, const TrainConfig& train_config,
                      const ImagingPipeline& imaging, std::uint64_t seed) {
  spec.validate();
  DatasetSpec ds;
  ds.pattern = spec.pattern;
  ds.shuffle_seed = seed;
  const Dataset data = build_dataset(world, ds, imaging);
  TrainConfig tc = train_config;
  tc.init_seed = seed;
  const Params params = train_network<double>(data, tc);
  return fly_mission(world, spec, imaging, params, seed);
}

std::vector<std::vector<OutboundLeg>> perimeter_outbound(int count, double distance) {
  if (count < 1) throw InvalidArgument("perimeter_outbound: count must be >= 1");
  std::vector<std::vector<OutboundLeg>> out;
  for (int i = 0; i < count; ++i) out.push_back({OutboundLeg{360.0 * i / count, distance}});
  return out;
}

BatchSummary summarize_batch(std::span<const HomingRun> runs, std::span<const int> start_index, int start_count) {
  BatchSummary s;
  s.runs = static_cast<int>(runs.size());
  double steps_ok = 0.0, steps_all = 0.0;
  for (const auto& r : runs) {
    steps_all += r.homing_steps;
    if (r.success) {
      ++s.successes;
      steps_ok += r.homing_steps;
    }
  }
  s.success_rate = s.runs ? static_cast<double>(s.successes) / s.runs : 0.0;
  s.mean_steps_successful = s.successes ? steps_ok / s.successes : std::numeric_limits<double>::quiet_NaN();
  s.mean_steps_all = s.runs ? steps_all / s.runs : 0.0;
  s.mean_trajectories.resize(start_count);
  for (int st = 0; st < start_count; ++st) {
    std::vector<std::vector<Position2D>> paths;
    std::size_t len = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (start_index[i] != st) continue;
      paths.push_back(runs[i].homing_path());
      len = std::max(len, paths.back().size());
    }
    auto& mean = s.mean_trajectories[st];
    for (std::size_t k = 0; k < len; ++k) {
      Position2D m{0.0, 0.0};
      for (const auto& p : paths) {
        const Position2D q = p[std::min(k, p.size() - 1)];
        m.x += q.x;
        m.y += q.y;
      }
      m.x /= static_cast<double>(paths.size());
      m.y /= static_cast<double>(paths.size());
      mean.push_back(m);
    }
  }
  return s;
}

namespace {

std::vector<std::pair<int, int>> pair_up(std::size_t starts, std::size_t seeds, BatchPairing pairing) {
  if (starts == 0) throw InvalidArgument("run_batch: no starts");
  if (seeds == 0) throw InvalidArgument("run_batch: no seeds");
  std::vector<std::pair<int, int>> out;
  if (pairing == BatchPairing::kZip) {
    if (starts != seeds) throw InvalidArgument("run_batch: zip pairing needs as many seeds as starts");
    for (std::size_t i = 0; i < starts; ++i) out.emplace_back(int(i), int(i));
  } else {
    for (std::size_t s = 0; s < starts; ++s)
      for (std::size_t k = 0; k < seeds; ++k) out.emplace_back(int(s), int(k));
  }
  return out;
}

}  // namespace

BatchResult fly_batch(const LandmarkWorld& world, const MissionSpec& spec,
                      std::span<const std::vector<OutboundLeg>> starts, std::span<const Params> networks,
                      std::span<const std::uint64_t> seeds, const ImagingPipeline& imaging, BatchPairing pairing) {
  if (networks.size() != seeds.size()) throw InvalidArgument("fly_batch: one network per seed required");
  const auto pairs = pair_up(starts.size(), seeds.size(), pairing);
  BatchResult out;
  out.runs.resize(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      MissionSpec s = spec;
      s.outbound = starts[pairs[i].first];
      out.runs[i] = fly_mission(world, s, imaging, networks[pairs[i].second], seeds[pairs[i].second]);
    }
  });
  for (const auto& p : pairs) out.start_index.push_back(p.first);
  out.summary = summarize_batch(out.runs, out.start_index, static_cast<int>(starts.size()));
  return out;
}

BatchResult run_batch(const LandmarkWorld& world, const MissionSpec& spec,
                      std::span<const std::vector<OutboundLeg>> starts, std::span<const std::uint64_t> seeds,
                      const TrainConfig& train_config, const ImagingPipeline& imaging, BatchPairing pairing,
                      const Dataset* prebuilt) {
  spec.validate();
  pair_up(starts.size(), seeds.size(), pairing);
  std::optional<Dataset> owned;
  if (!prebuilt) {
    DatasetSpec ds;
    ds.pattern = spec.pattern;
    owned = build_dataset(world, ds, imaging);
    prebuilt = &*owned;
  }
  std::vector<Params> networks(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      TrainConfig tc = train_config;
      tc.init_seed = seeds[k];
      networks[k] = train_network<double>(prebuilt->reshuffled(seeds[k], 0.0), tc);
    }
  });
  return fly_batch(world, spec, starts, networks, seeds, imaging, pairing);
}

void write_run_csv(const HomingRun& run, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "phase,step,x,y,heading_deg,pred_x,pred_y,gaze_deg\n";
  char buf[256];
  for (const auto& p : run.points) {
    std::snprintf(buf, sizeof buf, "%s,%d,%.6f,%.6f,%.6f,%.9f,%.9f,%.6f\n", to_string(p.phase), p.step, p.position.x,
                  p.position.y, p.heading_deg, p.predicted.x, p.predicted.y, p.view_gaze_deg);
    out << buf;
  }
}

void write_batch_report(const BatchResult& batch, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  const auto& s = batch.summary;
  char buf[256];
  std::snprintf(buf, sizeof buf, "runs = %d\nsuccesses = %d\nsuccess_rate = %.6f\n", s.runs, s.successes,
                s.success_rate);
  out << buf;
  std::snprintf(buf, sizeof buf, "mean_steps_successful = %.4f\nmean_steps_all = %.4f\n", s.mean_steps_successful,
                s.mean_steps_all);
  out << buf;
  for (std::size_t i = 0; i < batch.runs.size(); ++i) {
    const auto& r = batch.runs[i];
    const Position2D end = r.points.back().position;
    std::snprintf(buf, sizeof buf,
                  "run = %zu start=%d seed=%llu success=%d steps=%d start_x=%.4f start_y=%.4f end_x=%.4f end_y=%.4f "
                  "reason=%s\n",
                  i, batch.start_index[i], static_cast<unsigned long long>(r.seed), r.success ? 1 : 0,
                  r.homing_steps, r.homing_start.x, r.homing_start.y, end.x, end.y,
                  r.failure_reason.empty() ? "none" : r.failure_reason.c_str());
    out << buf;
  }
}

}  // namespace homing
