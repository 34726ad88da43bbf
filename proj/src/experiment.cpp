#include "homing/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "homing/evaluation.hpp"
#include "homing/parallel.hpp"
#include "homing/svg.hpp"

namespace homing {
namespace {

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

double to_double(const std::string& v) {
  const auto n = parse_numbers(v);
  if (n.size() != 1) throw InvalidArgument("expected one number, got '" + v + "'");
  return n[0];
}

long to_int(const std::string& v) {
  const double d = to_double(v);
  if (d != std::floor(d)) throw InvalidArgument("expected an integer, got '" + v + "'");
  return static_cast<long>(d);
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidArgument("expected true or false, got '" + v + "'");
}

Vec2 to_vec2(const std::string& v) {
  const auto n = parse_numbers(v);
  if (n.size() != 2) throw InvalidArgument("expected two numbers, got '" + v + "'");
  return {n[0], n[1]};
}

std::vector<std::string> words(const std::string& v) {
  std::istringstream in(v);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::string one_of(const std::string& v, std::initializer_list<const char*> allowed) {
  std::string list;
  for (const char* a : allowed) {
    if (v == a) return v;
    list += list.empty() ? a : std::string(", ") + a;
  }
  throw InvalidArgument("expected one of " + list + ", got '" + v + "'");
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](auto& c, auto& v) { c.seed = static_cast<std::uint64_t>(to_int(v)); }},
      {"out", [](auto& c, auto& v) { c.out = v; }},
      {"world", [](auto& c, auto& v) { c.world_preset = one_of(v, {"three-tree", "forest", "empty"}); }},
      {"world.file", [](auto& c, auto& v) { c.world_file = v; }},
      {"imaging", [](auto& c, auto& v) { c.imaging = one_of(v, {"full", "reduced"}); }},
      {"pattern", [](auto& c, auto& v) { c.pattern = one_of(v, {"spiral", "grid"}); }},
      {"grid.side", [](auto& c, auto& v) { c.grid_side = to_double(v); }},
      {"grid.spacing", [](auto& c, auto& v) { c.grid_spacing = to_double(v); }},
      {"grid.offset", [](auto& c, auto& v) { c.grid_offset = to_vec2(v); }},
      {"spiral.a", [](auto& c, auto& v) { c.spiral_a = to_double(v); }},
      {"spiral.turns", [](auto& c, auto& v) { c.spiral_turns = to_double(v); }},
      {"spiral.step_deg", [](auto& c, auto& v) { c.spiral_step_deg = to_double(v); }},
      {"dataset.gaze_count", [](auto& c, auto& v) { c.gaze_count = static_cast<int>(to_int(v)); }},
      {"dataset.label_noise_deg", [](auto& c, auto& v) { c.label_noise_deg = to_double(v); }},
      {"dataset.images", [](auto& c, auto& v) { c.dataset_images = to_bool(v); }},
      {"train.lr", [](auto& c, auto& v) { c.train.learning_rate = to_double(v); }},
      {"train.batch", [](auto& c, auto& v) { c.train.batch_size = static_cast<int>(to_int(v)); }},
      {"train.epochs", [](auto& c, auto& v) { c.train.epochs = static_cast<int>(to_int(v)); }},
      {"train.optimizer",
       [](auto& c, auto& v) {
         const std::string o = one_of(v, {"sgd", "momentum", "adam"});
         c.train.optimizer = o == "sgd" ? OptimizerKind::kSgd
                             : o == "momentum" ? OptimizerKind::kMomentum
                                               : OptimizerKind::kAdam;
       }},
      {"train.momentum", [](auto& c, auto& v) { c.train.momentum = to_double(v); }},
      {"train.precision",
       [](auto& c, auto& v) {
         c.train.precision = one_of(v, {"double", "single"}) == "double" ? Precision::kDouble : Precision::kSingle;
       }},
      {"train.log_every", [](auto& c, auto& v) { c.train.log_every = static_cast<int>(to_int(v)); }},
      {"model", [](auto& c, auto& v) { c.model = v; }},
      {"eval.locations", [](auto& c, auto& v) { c.eval_locations = one_of(v, {"grid", "training"}); }},
      {"eval.side", [](auto& c, auto& v) { c.eval_side = to_double(v); }},
      {"eval.spacing", [](auto& c, auto& v) { c.eval_spacing = to_double(v); }},
      {"eval.gaze_deg", [](auto& c, auto& v) { c.eval_gaze_deg = to_double(v); }},
      {"stream.starts", [](auto& c, auto& v) { c.stream_starts = static_cast<int>(to_int(v)); }},
      {"stream.radius", [](auto& c, auto& v) { c.stream_radius = to_double(v); }},
      {"stream.step", [](auto& c, auto& v) { c.stream_step = to_double(v); }},
      {"stream.max_steps", [](auto& c, auto& v) { c.stream_max_steps = static_cast<int>(to_int(v)); }},
      {"stream.margin", [](auto& c, auto& v) { c.stream_margin = to_double(v); }},
      {"stream.stop_at_nest", [](auto& c, auto& v) { c.stream_stop_at_nest = to_bool(v); }},
      {"gradcam.offset", [](auto& c, auto& v) { c.gradcam_offset = to_vec2(v); }},
      {"gradcam.gaze_deg", [](auto& c, auto& v) { c.gradcam_gaze_deg = to_double(v); }},
      {"rotate.deg", [](auto& c, auto& v) { c.rotate_deg = to_double(v); }},
      {"mission.starts", [](auto& c, auto& v) { c.mission_starts = static_cast<int>(to_int(v)); }},
      {"mission.outbound", [](auto& c, auto& v) { c.mission_outbound = to_double(v); }},
      {"mission.seeds",
       [](auto& c, auto& v) {
         c.mission_seeds.clear();
         for (const auto& w : words(v)) c.mission_seeds.push_back(static_cast<std::uint64_t>(to_int(w)));
       }},
      {"mission.pairing",
       [](auto& c, auto& v) {
         c.mission_pairing = one_of(v, {"cross", "zip"}) == "cross" ? BatchPairing::kCross : BatchPairing::kZip;
       }},
      {"mission.drift",
       [](auto& c, auto& v) {
         const std::string d = one_of(v, {"boundary", "offset", "gaussian"});
         c.mission_drift = d == "boundary" ? DriftRule::kStopAtLearningBoundary
                           : d == "offset" ? DriftRule::kFixedOffset
                                           : DriftRule::kGaussian;
       }},
      {"mission.drift_offset", [](auto& c, auto& v) { c.mission_drift_offset = to_vec2(v); }},
      {"mission.drift_sigma", [](auto& c, auto& v) { c.mission_drift_sigma = to_double(v); }},
      {"mission.inbound_step", [](auto& c, auto& v) { c.mission_inbound_step = to_double(v); }},
      {"mission.homing_step", [](auto& c, auto& v) { c.mission_homing_step = to_double(v); }},
      {"mission.success_radius", [](auto& c, auto& v) { c.mission_success_radius = to_double(v); }},
      {"mission.max_steps", [](auto& c, auto& v) { c.mission_max_steps = static_cast<int>(to_int(v)); }},
      {"noise.sigmas", [](auto& c, auto& v) { c.noise_sigmas = parse_numbers(v); }},
      {"noise.patterns",
       [](auto& c, auto& v) {
         c.noise_patterns = words(v);
         for (const auto& p : c.noise_patterns) one_of(p, {"grid", "spiral"});
       }},
      {"commands",
       [](auto& c, auto& v) {
         c.commands = words(v);
         for (const auto& w : c.commands) {
           const auto names = command_names();
           if (w == "run" || std::find(names.begin(), names.end(), w) == names.end())
             throw InvalidArgument("unknown command '" + w + "'");
         }
       }},
  };
  return table;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_document(const KeyValueDocument& doc) {
  ExperimentConfig c;
  c.source = doc.source();
  for (const auto& e : doc.entries()) {
    const auto it = setters().find(e.key);
    const std::string where =
        e.line > 0 ? doc.source() + ":" + std::to_string(e.line) + ": " : std::string("--override: ");
    if (it == setters().end()) throw ConfigError(where + "unknown key '" + e.key + "'");
    try {
      it->second(c, e.value);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& ex) {
      throw ConfigError(where + "key '" + e.key + "': " + ex.what());
    }
  }
  try {
    c.train.validate();
    c.mission_spec(Position2D{0.0, 0.0}).validate();
    pattern_locations(c.training_pattern("grid", Position2D{0.0, 0.0}), Position2D{0.0, 0.0});
    pattern_locations(c.training_pattern("spiral", Position2D{0.0, 0.0}), Position2D{0.0, 0.0});
    grid_locations(evaluation_grid(Position2D{0.0, 0.0}, c.eval_side, c.eval_spacing), Position2D{0.0, 0.0});
  } catch (const Error& ex) {
    throw ConfigError(doc.source() + ": " + ex.what());
  }
  if (c.gaze_count < 1) throw ConfigError(doc.source() + ": dataset.gaze_count must be >= 1");
  if (c.stream_starts < 1) throw ConfigError(doc.source() + ": stream.starts must be >= 1");
  if (!(c.stream_step > 0.0)) throw ConfigError(doc.source() + ": stream.step must be > 0");
  if (c.mission_starts < 1) throw ConfigError(doc.source() + ": mission.starts must be >= 1");
  if (c.label_noise_deg < 0.0) throw ConfigError(doc.source() + ": dataset.label_noise_deg must be >= 0");
  return c;
}

LandmarkWorld ExperimentConfig::make_world() const {
  if (!world_file.empty()) {
    if (!std::filesystem::exists(world_file)) throw MissingInputError("world file not found: " + world_file.string());
    return load_world(world_file);
  }
  return make_world_preset(world_preset, seed);
}

ImagingConfig ExperimentConfig::imaging_config() const {
  return imaging == "full" ? ImagingConfig::full() : ImagingConfig::reduced();
}

TrajectoryPattern ExperimentConfig::training_pattern(const std::string& kind, Position2D nest) const {
  if (kind == "grid") return GridPattern{nest + grid_offset, grid_side, grid_spacing};
  return SpiralPattern{nest, spiral_a, spiral_turns * kTwoPi, deg2rad(spiral_step_deg)};
}

DatasetSpec ExperimentConfig::dataset_spec(Position2D nest) const {
  DatasetSpec d;
  d.pattern = training_pattern(nest);
  d.gaze_count = gaze_count;
  d.label_noise_sigma_deg = label_noise_deg;
  d.shuffle_seed = seed;
  return d;
}

MissionSpec ExperimentConfig::mission_spec(Position2D nest) const {
  MissionSpec m;
  m.pattern = training_pattern(nest);
  m.drift_rule = mission_drift;
  m.drift_offset = mission_drift_offset;
  m.drift_sigma = mission_drift_sigma;
  m.inbound_step = mission_inbound_step;
  m.homing_step = mission_homing_step;
  m.success_radius = mission_success_radius;
  m.max_homing_steps = mission_max_steps;
  return m;
}

std::vector<std::uint64_t> ExperimentConfig::seeds() const {
  return mission_seeds.empty() ? std::vector<std::uint64_t>{seed} : mission_seeds;
}

std::filesystem::path ExperimentConfig::model_path() const { return model.empty() ? out / "model.bin" : model; }

namespace {

struct Preset {
  const char* name;
  const char* text;
};

const Preset kPresets[] = {
    {"fig3-grid",
     "# Training on the 1 m grid; bearing map over the training locations\n"
     "world = three-tree\npattern = grid\neval.locations = training\ncommands = dataset train eval\n"},
    {"fig3-spiral",
     "# Training on the Archimedean spiral; bearing map over the training locations\n"
     "world = three-tree\npattern = spiral\neval.locations = training\ncommands = dataset train eval\n"},
    {"fig4-grid",
     "# Generalization to the 0.25 m grid and stream plot after grid training\n"
     "world = three-tree\npattern = grid\neval.locations = grid\ncommands = train eval stream\n"},
    {"fig4-spiral",
     "# Generalization to the 0.25 m grid and stream plot after spiral training\n"
     "world = three-tree\npattern = spiral\neval.locations = grid\ncommands = train eval stream\n"},
    {"paper-figure-5b",
     "# Spiral learning flight, 12 outbound directions, visual homing\n"
     "world = three-tree\npattern = spiral\nmission.starts = 12\nmission.outbound = 30\ncommands = dataset home\n"},
    {"fig5-grid",
     "# Grid learning flight, 12 outbound directions, visual homing\n"
     "world = three-tree\npattern = grid\nmission.starts = 12\nmission.outbound = 30\ncommands = dataset home\n"},
    {"fig6-rotation",
     "# Second-layer gradients and a 90 degree counterclockwise landmark-array rotation\n"
     "world = three-tree\npattern = spiral\nrotate.deg = 90\ncommands = train gradcam rotate\n"},
    {"table1-noise",
     "# High-resolution grid error with and without 10 degree label noise, grid and spiral training\n"
     "world = three-tree\nnoise.sigmas = 0 10\nnoise.patterns = grid spiral\ncommands = noise\n"},
    {"quick",
     "# Reduced resolution smoke run\n"
     "world = three-tree\nimaging = reduced\npattern = spiral\neval.side = 4\neval.spacing = 1\n"
     "commands = train eval\n"},
};

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) out.emplace_back(p.name);
  return out;
}

std::string preset_text(const std::string& name) {
  for (const auto& p : kPresets)
    if (name == p.name) return p.text;
  throw ConfigError("unknown preset '" + name + "'");
}

ExperimentConfig load_experiment(const std::string& text, const std::string& source,
                                 const std::vector<std::string>& overrides) {
  KeyValueDocument doc;
  try {
    doc = KeyValueDocument::parse(text, source);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    doc.set(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
  ExperimentConfig c = ExperimentConfig::from_document(doc);
  c.overrides = overrides;
  return c;
}

std::vector<std::string> command_names() {
  return {"world", "dataset", "train", "eval", "stream", "gradcam", "rotate", "home", "noise", "run"};
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::string hex;
  char h[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(h, sizeof h, "%02x", md[i]);
    hex += h;
  }
  return hex;
}

namespace {

// State shared by the commands of one invocation.
class Session {
 public:
  Session(const ExperimentConfig& config, std::ostream& log) : cfg_(config), log_(log) {}

  const ExperimentConfig& cfg() const { return cfg_; }
  std::ostream& log() { return log_; }

  const LandmarkWorld& world() {
    if (!world_) world_ = cfg_.make_world();
    return *world_;
  }
  const ImagingPipeline& imaging() {
    if (!imaging_) imaging_ = std::make_unique<ImagingPipeline>(cfg_.imaging_config());
    return *imaging_;
  }
  const Dataset& dataset() {
    if (!dataset_) {
      note("building dataset");
      dataset_ = build_dataset(world(), cfg_.dataset_spec(world().nest), imaging());
      note("dataset: " + std::to_string(dataset_->size()) + " examples from " +
           std::to_string(dataset_->render_count()) + " renders");
    }
    return *dataset_;
  }
  const Params& params() {
    if (!params_) {
      const auto path = cfg_.model_path();
      if (!std::filesystem::exists(path))
        throw MissingInputError("model file not found: " + path.string() + " (run the train command first)");
      params_ = load_params<double>(path);
      const auto& s = params_->shape();
      const auto& p = cfg_.imaging_config().panorama;
      if (s.input_rows != p.rows || s.input_cols != p.cols)
        throw ConfigError("model " + path.string() + " expects " + std::to_string(s.input_rows) + "x" +
                          std::to_string(s.input_cols) + " views but imaging gives " + std::to_string(p.rows) +
                          "x" + std::to_string(p.cols));
    }
    return *params_;
  }
  void set_params(Params p) { params_ = std::move(p); }

  std::filesystem::path artifact(const std::string& name) {
    const auto path = cfg_.out / name;
    std::filesystem::create_directories(path.parent_path());
    artifacts_.push_back(name);
    return path;
  }

  void note(const std::string& msg) { log_ << "[homing] " << msg << "\n" << std::flush; }

  void write_manifest(const std::string& command) {
    std::filesystem::create_directories(cfg_.out);
    std::ofstream out(cfg_.out / ("manifest_" + command + ".txt"));
    out << "command = " << command << "\n";
    out << "config = " << cfg_.source << "\n";
    out << "seed = " << cfg_.seed << "\n";
    for (const auto& o : cfg_.overrides) out << "override = " << o << "\n";
    for (const auto& a : artifacts_) out << "artifact = " << a << " " << sha256_file(cfg_.out / a) << "\n";
    artifacts_.clear();
  }

 private:
  const ExperimentConfig& cfg_;
  std::ostream& log_;
  std::optional<LandmarkWorld> world_;
  std::unique_ptr<ImagingPipeline> imaging_;
  std::optional<Dataset> dataset_;
  std::optional<Params> params_;
  std::vector<std::string> artifacts_;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<Position2D> eval_locations(Session& s) {
  const auto& cfg = s.cfg();
  const Position2D nest = s.world().nest;
  if (cfg.eval_locations == "training") return pattern_locations(cfg.training_pattern(nest), nest);
  return grid_locations(evaluation_grid(nest, cfg.eval_side, cfg.eval_spacing), nest);
}

void cmd_world(Session& s) {
  const auto& w = s.world();
  save_world(w, s.artifact("world.txt"));
  const auto& img = s.imaging();
  const CatadioptricImage cat = img.capture_catadioptric(w, w.nest + Vec2{1.0, 0.0});
  write_catadioptric(cat, s.artifact("view_catadioptric.pgm"));
  s.artifact("view_catadioptric.meta");
  write_panorama(img.rectify(cat, HeadingAngle{}), s.artifact("view_panorama.pgm"));
  s.artifact("view_panorama.meta");
}

void cmd_dataset(Session& s) {
  const Dataset& d = s.dataset();
  std::vector<std::string> images;
  if (s.cfg().dataset_images) {
    for (std::size_t l = 0; l < d.locations().size(); ++l) {
      char name[64];
      std::snprintf(name, sizeof name, "views/location_%04zu.pgm", l);
      write_panorama(d.base_views()[l], s.artifact(name));
      s.artifact(std::filesystem::path(name).replace_extension(".meta").string());
      images.emplace_back(name);
    }
  }
  write_dataset_manifest(d, s.artifact("dataset.csv"), images);
}

void cmd_train(Session& s) {
  const Dataset& d = s.dataset();
  s.note("training " + std::to_string(d.size()) + " steps");
  TrainConfig tc = s.cfg().train;
  tc.init_seed = s.cfg().seed;
  TrainResult result;
  Params p = tc.precision == Precision::kDouble ? train_network<double>(d, tc, &result) : [&] {
    const auto f = train_network<float>(d, tc, &result);
    Params out(f.shape());
    std::copy(f.values().begin(), f.values().end(), out.values().begin());
    return out;
  }();
  save_params(p, s.artifact("model.bin"));
  if (!s.cfg().model.empty()) save_params(p, s.cfg().model);
  write_loss_csv(result, s.artifact("loss.csv"));
  s.note("final windowed loss " + fmt("%.5f", result.trace.empty() ? 0.0 : result.trace.back().loss));
  s.set_params(std::move(p));
}

void write_report_summary(const EvalReport& r, const std::filesystem::path& path) {
  write_text(path, "locations = " + std::to_string(r.records.size()) + "\nmean_error_deg = " +
                       fmt("%.6f", r.mean_error_deg) + "\nstd_error_deg = " + fmt("%.6f", r.std_error_deg) +
                       "\nundefined = " + std::to_string(r.undefined_count) + "\ngaze_deg = " +
                       fmt("%.6f", r.gaze.degrees()) + "\n");
}

void cmd_eval(Session& s) {
  const auto& params = s.params();
  const auto locations = eval_locations(s);
  s.note("evaluating " + std::to_string(locations.size()) + " locations");
  const EvalReport r = bearing_map(params, s.world(), s.imaging(), locations,
                                   HeadingAngle::from_degrees(s.cfg().eval_gaze_deg));
  write_eval_csv(r, s.artifact("eval.csv"));
  write_report_summary(r, s.artifact("eval_summary.txt"));
  write_quiver_svg(r, s.world(), s.artifact("quiver.svg"));
  const double cell = s.cfg().eval_locations == "grid" ? s.cfg().eval_spacing : 0.5;
  write_error_heatmap_svg(r, s.world(), cell, s.artifact("error_heatmap.svg"));
  s.note("mean error " + fmt("%.2f", r.mean_error_deg) + " deg, std " + fmt("%.2f", r.std_error_deg));
}

void cmd_stream(Session& s) {
  const auto& params = s.params();
  const auto& cfg = s.cfg();
  const Position2D nest = s.world().nest;
  StreamConfig sc;
  sc.step = cfg.stream_step;
  sc.max_steps = cfg.stream_max_steps;
  sc.stop_at_nest = cfg.stream_stop_at_nest;
  sc.domain = evaluation_domain(cfg.training_pattern(nest), nest, cfg.stream_margin);
  const auto starts = perimeter_starts(nest, cfg.stream_radius, cfg.stream_starts);
  std::vector<StreamTrace> traces(starts.size());
  parallel_for(starts.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) traces[i] = stream_integrate(params, s.world(), s.imaging(), starts[i], sc);
  });
  for (std::size_t i = 0; i < traces.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "streams/stream_%02zu.csv", i);
    write_stream_csv(traces[i], s.artifact(name));
  }
  const auto c = convergence_analysis(traces, nest);
  std::string text = "traces = " + std::to_string(traces.size()) + "\nconverged = " + std::to_string(c.converged) +
                     "\ncentroid_x = " + fmt("%.6f", c.centroid.x) + "\ncentroid_y = " + fmt("%.6f", c.centroid.y) +
                     "\ncentroid_to_nest = " + fmt("%.6f", c.centroid_to_nest) + "\n";
  for (std::size_t i = 0; i < traces.size(); ++i)
    text += "endpoint_distance = " + fmt("%.6f", c.endpoint_distances[i]) + " " + to_string(traces[i].reason) + "\n";
  write_text(s.artifact("convergence.txt"), text);
  write_stream_svg(traces, s.world(), sc.domain, s.artifact("streams.svg"));
  s.note("stream centroid " + fmt("%.3f", c.centroid_to_nest) + " m from nest");
}

void cmd_gradcam(Session& s) {
  const auto& params = s.params();
  const auto& cfg = s.cfg();
  const Position2D at = s.world().nest + cfg.gradcam_offset;
  const PanoramaImage view = s.imaging().capture(s.world(), at, HeadingAngle::from_degrees(cfg.gradcam_gaze_deg));
  const SaliencySummary sal = saliency_analysis(params, view);
  std::ofstream out(s.artifact("saliency_rows.csv"));
  out << "row,elevation_deg,energy_x,energy_y\n";
  char buf[160];
  for (std::size_t r = 0; r < sal.row_energy_x.size(); ++r) {
    std::snprintf(buf, sizeof buf, "%zu,%.4f,%.9g,%.9g\n", r, sal.row_elevation_deg[r], sal.row_energy_x[r],
                  sal.row_energy_y[r]);
    out << buf;
  }
  out.close();
  std::ofstream g(s.artifact("saliency_map.csv"));
  g << "output,channel,row,col,gradient\n";
  for (int o = 0; o < 2; ++o) {
    const auto& m = o == 0 ? sal.gradient_x : sal.gradient_y;
    for (int c = 0; c < m.channels; ++c)
      for (int r = 0; r < m.rows; ++r)
        for (int w = 0; w < m.cols; ++w) {
          std::snprintf(buf, sizeof buf, "%c,%d,%d,%d,%.9g\n", o == 0 ? 'x' : 'y', c, r, w, m.at(c, r, w));
          g << buf;
        }
  }
  write_panorama(view, s.artifact("saliency_view.pgm"));
  s.artifact("saliency_view.meta");
  s.note("dominant conv2 rows: x " + std::to_string(sal.dominant_row_x) + " (" +
         fmt("%.1f", sal.row_elevation_deg[sal.dominant_row_x]) + " deg), y " + std::to_string(sal.dominant_row_y) +
         " (" + fmt("%.1f", sal.row_elevation_deg[sal.dominant_row_y]) + " deg)");
}

void cmd_rotate(Session& s) {
  const auto& params = s.params();
  const auto locations = eval_locations(s);
  const RotationStudy r = rotate_landmarks_experiment(s.world(), params, s.imaging(), locations, s.cfg().rotate_deg,
                                                      HeadingAngle::from_degrees(s.cfg().eval_gaze_deg));
  write_eval_csv(r.before, s.artifact("rotation_before.csv"));
  write_eval_csv(r.after, s.artifact("rotation_after.csv"));
  const Position2D n = s.world().nest;
  write_text(s.artifact("rotation_summary.txt"),
             "rotation_deg = " + fmt("%.6f", s.cfg().rotate_deg) + "\nmean_error_before_deg = " +
                 fmt("%.6f", r.before.mean_error_deg) + "\nmean_error_after_deg = " +
                 fmt("%.6f", r.after.mean_error_deg) + "\nimplied_before_dx = " + fmt("%.6f", r.implied_before.x - n.x) +
                 "\nimplied_before_dy = " + fmt("%.6f", r.implied_before.y - n.y) +
                 "\nimplied_after_dx = " + fmt("%.6f", r.implied_after.x - n.x) +
                 "\nimplied_after_dy = " + fmt("%.6f", r.implied_after.y - n.y) + "\nimplied_shift_m = " +
                 fmt("%.6f", distance(r.implied_before, r.implied_after)) + "\n");
  write_quiver_svg(r.after, rotate_landmark_array(s.world(), s.cfg().rotate_deg), s.artifact("rotation_after.svg"));
  s.note("implied convergence point moved " + fmt("%.2f", distance(r.implied_before, r.implied_after)) + " m");
}

void cmd_home(Session& s) {
  const auto& cfg = s.cfg();
  const auto& w = s.world();
  const MissionSpec spec = cfg.mission_spec(w.nest);
  const auto starts = perimeter_outbound(cfg.mission_starts, cfg.mission_outbound);
  const auto seeds = cfg.seeds();
  const Dataset& d = s.dataset();
  std::vector<Params> nets(seeds.size());
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    s.note("training network for seed " + std::to_string(seeds[k]));
    TrainConfig tc = cfg.train;
    tc.init_seed = seeds[k];
    nets[k] = train_network<double>(d.reshuffled(seeds[k], cfg.label_noise_deg), tc);
    save_params(nets[k], s.artifact("mission_model_seed" + std::to_string(seeds[k]) + ".bin"));
  }
  s.note("flying " + std::to_string(starts.size()) + " starts");
  const BatchResult batch = fly_batch(w, spec, starts, nets, seeds, s.imaging(), cfg.mission_pairing);
  for (std::size_t i = 0; i < batch.runs.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "runs/run_%03zu.csv", i);
    write_run_csv(batch.runs[i], s.artifact(name));
  }
  write_batch_report(batch, s.artifact("batch_report.txt"));
  write_runs_svg(batch.runs, w, s.artifact("runs.svg"));
  s.note("success " + std::to_string(batch.summary.successes) + "/" + std::to_string(batch.summary.runs));
}

void cmd_noise(Session& s) {
  const auto& cfg = s.cfg();
  const auto& w = s.world();
  const auto locations = grid_locations(evaluation_grid(w.nest, cfg.eval_side, cfg.eval_spacing), w.nest);
  std::vector<Params> nets;
  std::vector<std::pair<std::string, double>> arms;
  for (const auto& kind : cfg.noise_patterns) {
    DatasetSpec ds = cfg.dataset_spec(w.nest);
    ds.pattern = cfg.training_pattern(kind, w.nest);
    ds.label_noise_sigma_deg = 0.0;
    s.note("building " + kind + " dataset");
    const Dataset base = build_dataset(w, ds, s.imaging());
    for (double sigma : cfg.noise_sigmas) {
      s.note("training " + kind + " sigma " + fmt("%.2f", sigma));
      TrainConfig tc = cfg.train;
      tc.init_seed = cfg.seed;
      nets.push_back(train_network<double>(base.reshuffled(cfg.seed, sigma), tc));
      arms.emplace_back(kind, sigma);
    }
  }
  std::vector<const Params*> ptrs;
  for (const auto& n : nets) ptrs.push_back(&n);
  const auto reports = bearing_maps(ptrs, w, s.imaging(), locations);
  std::ofstream out(s.artifact("noise_table.csv"));
  out << "pattern,sigma_deg,mean_error_deg,std_error_deg\n";
  char buf[128];
  for (std::size_t i = 0; i < arms.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s,%.4f,%.6f,%.6f\n", arms[i].first.c_str(), arms[i].second,
                  reports[i].mean_error_deg, reports[i].std_error_deg);
    out << buf;
    s.note(std::string(buf, std::strlen(buf) - 1));
  }
}

void dispatch(const std::string& command, Session& s) {
  const auto t0 = std::chrono::steady_clock::now();
  if (command == "world") cmd_world(s);
  else if (command == "dataset") cmd_dataset(s);
  else if (command == "train") cmd_train(s);
  else if (command == "eval") cmd_eval(s);
  else if (command == "stream") cmd_stream(s);
  else if (command == "gradcam") cmd_gradcam(s);
  else if (command == "rotate") cmd_rotate(s);
  else if (command == "home") cmd_home(s);
  else if (command == "noise") cmd_noise(s);
  else throw ConfigError("unknown command '" + command + "'");
  s.write_manifest(command);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  s.note(command + " done in " + fmt("%.1f", secs) + " s");
}

}  // namespace

int run_command(const std::string& command, const ExperimentConfig& config, std::ostream& log) {
  try {
    Session s(config, log);
    if (command == "run") {
      if (config.commands.empty()) throw ConfigError(config.source + ": 'run' needs a commands = ... entry");
      for (const auto& c : config.commands) dispatch(c, s);
    } else {
      dispatch(command, s);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MissingInputError& e) {
    log << "missing input: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const NumericError& e) {
    log << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const InvalidArgument& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace homing
