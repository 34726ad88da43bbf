#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "homing/experiment.hpp"
#include "homing/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Learning-flight visual homing experiments"};
  app.require_subcommand(1);

  std::string config_path, preset, out;
  std::vector<std::string> overrides;
  long long seed = -1;
  int threads = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file (key = value)");
    sub->add_option("--preset", preset, "embedded preset name (see `presets`)");
    sub->add_option("--seed", seed, "global seed, overrides the config");
    sub->add_option("--out", out, "output directory, overrides the config");
    sub->add_option("--override", overrides, "key=value, applied after the config file")->take_all();
    sub->add_option("--threads", threads, "worker threads (default: HOMING_BENCH_THREADS, else 1)");
  };

  const std::pair<const char*, const char*> help[] = {
      {"world", "describe the world and save sample views"},
      {"dataset", "render the learning flight and write its manifest"},
      {"train", "train the network, write model.bin and loss.csv"},
      {"eval", "bearing map, error statistics and plots"},
      {"stream", "integrate home vectors from perimeter starts"},
      {"gradcam", "second-layer output gradients for one view"},
      {"rotate", "re-evaluate after rotating the landmark array"},
      {"home", "outbound, inbound and visual homing runs"},
      {"noise", "high-res grid error with and without label noise"},
      {"run", "every command listed under `commands`"},
  };
  for (const auto& name : homing::command_names()) {
    std::string desc;
    for (const auto& [n, d] : help)
      if (name == n) desc = d;
    add_common(app.add_subcommand(name, desc));
  }
  auto* presets = app.add_subcommand("presets", "list embedded presets");
  std::string show;
  presets->add_option("name", show, "print one preset's config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : homing::kExitConfig;
  }

  if (presets->parsed()) {
    try {
      if (!show.empty()) {
        std::cout << homing::preset_text(show);
      } else {
        for (const auto& n : homing::preset_names()) std::cout << n << "\n";
      }
    } catch (const homing::Error& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return homing::kExitConfig;
    }
    return 0;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  if (threads > 0) homing::set_thread_count(threads);

  std::string text, source;
  if (!config_path.empty() && !preset.empty()) {
    std::cerr << "config error: give --config or --preset, not both\n";
    return homing::kExitConfig;
  }
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "missing input: config file not found: " << config_path << "\n";
      return homing::kExitMissingInput;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
    source = config_path;
  } else if (!preset.empty()) {
    source = "preset:" + preset;
  }

  if (seed >= 0) overrides.push_back("seed=" + std::to_string(seed));
  if (!out.empty()) overrides.push_back("out=" + out);

  try {
    if (!preset.empty()) text = homing::preset_text(preset);
    const homing::ExperimentConfig cfg = homing::load_experiment(text, source.empty() ? "<defaults>" : source, overrides);
    return homing::run_command(command, cfg, std::cerr);
  } catch (const homing::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return homing::kExitConfig;
  }
}
