#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "nvsim/scenario.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& scenario_path, const std::string& out_dir, bool paper_scale,
            long seed_override, bool has_seed, int threads) {
  try {
    nvsim::ScenarioConfig cfg = nvsim::parse_scenario(scenario_path);
    if (has_seed) cfg.seed = static_cast<std::uint64_t>(seed_override);
    nvsim::RunOptions opts;
    opts.out_dir = out_dir;
    opts.paper_scale = paper_scale;
    opts.n_workers = threads;
    opts.log = &std::cout;
    const nvsim::RunManifest manifest = nvsim::run_scenario(cfg, opts);
    std::cout << "wrote " << manifest.output_sha256.size() << " output file(s) to " << out_dir
              << " in " << manifest.wall_clock_s << " s\n";
    std::cout << "manifest: " << manifest.manifest_path << "\n";
    return 0;
  } catch (const nvsim::ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << scenario_path << ": " << e.what() << "\n";
    return 1;
  }
}

int cmd_validate(const std::string& scenario_path) {
  try {
    const nvsim::ScenarioConfig cfg = nvsim::parse_scenario(scenario_path);
    std::cout << "OK: " << nvsim::to_string(cfg.kind) << " scenario, seed " << cfg.seed << "\n";
    return 0;
  } catch (const nvsim::ScenarioError& e) {
    std::cerr << "invalid scenario:\n";
    for (const auto& msg : e.errors()) std::cerr << "  - " << msg << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_list_examples(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    std::cerr << "error: no scenario directory at '" << dir << "'\n";
    return 1;
  }
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".scn") files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::string description;
    std::ifstream in(f);
    std::string line;
    if (std::getline(in, line) && !line.empty() && line[0] == '#')
      description = line.substr(line.find_first_not_of("# "));
    std::cout << f << (description.empty() ? "" : "  -  " + description) << "\n";
  }
  if (files.empty()) std::cout << "(no .scn files in " << dir << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NV-center microfluidic quantum sensing simulator"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir = "out";
  std::string examples_dir = "scenarios";
  bool paper_scale = false;
  long seed_override = 0;
  int threads = 1;

  auto* run = app.add_subcommand("run", "run a scenario and write CSV/SVG outputs + manifest");
  run->add_option("scenario", scenario_path, "scenario file (or a previous run's manifest)")
      ->required();
  run->add_option("--out-dir", out_dir, "output directory (default: out)");
  run->add_flag("--paper-scale", paper_scale,
                "restore the publication-scale Monte Carlo counts");
  auto* seed_opt = run->add_option("--seed", seed_override, "override the scenario seed");
  run->add_option("--threads", threads, "worker threads for Monte Carlo kernels (default: 1)");

  auto* validate = app.add_subcommand("validate", "parse and validate a scenario file");
  validate->add_option("scenario", scenario_path, "scenario file")->required();

  auto* list = app.add_subcommand("list-examples", "list shipped example scenarios");
  list->add_option("--dir", examples_dir, "scenario directory (default: scenarios)");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed())
    return cmd_run(scenario_path, out_dir, paper_scale, seed_override, seed_opt->count() > 0,
                   threads);
  if (validate->parsed()) return cmd_validate(scenario_path);
  return cmd_list_examples(examples_dir);
}
