// eemsim: run ensemble time-scale scenarios and write CSV/JSON artifacts.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "eem/scenario.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

int cmd_validate(const std::string& path) {
  try {
    const auto cfg = eem::load_config(path);
    std::cout << path << ": ok (" << eem::to_string(cfg.kind) << ", N = "
              << cfg.model.sigma1.size() << ", T = " << cfg.horizon << ")\n";
    return 0;
  } catch (const eem::ConfigError& e) {
    std::cerr << path << ": " << e.what() << '\n';
    return kExitValidation;
  }
}

int cmd_list() {
  for (const auto& name : eem::scenario_kind_names()) {
    std::cout << name << "\t" << eem::describe(*eem::parse_scenario_kind(name)) << '\n';
  }
  return 0;
}

int cmd_run(const std::vector<std::string>& paths, const std::string& out,
            std::optional<std::uint64_t> seed, std::optional<std::size_t> horizon,
            unsigned jobs) {
  std::vector<eem::ScenarioConfig> configs;
  bool invalid = false;
  for (const auto& p : paths) {
    try {
      configs.push_back(eem::load_config(p));
    } catch (const eem::ConfigError& e) {
      std::cerr << p << ": " << e.what() << '\n';
      invalid = true;
    }
  }
  if (invalid) return kExitValidation;
  if (horizon && *horizon < 16) {
    std::cerr << "--horizon must be at least 16\n";
    return kExitValidation;
  }

  eem::RunOptions opts;
  opts.seed = seed;
  opts.horizon = horizon;
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(configs.size())));
  opts.allan_threads = std::max(1u, jobs / workers);

  std::vector<eem::RunResult> results(configs.size());
  std::atomic<std::size_t> next{0};
  std::mutex io;
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      results[i] = eem::run_scenario(configs[i], out, opts);
      std::lock_guard lock(io);
      const auto& r = results[i];
      if (r.exit_code == 0) {
        std::cout << r.name << ": " << r.artifacts.size() << " artifacts in "
                  << r.directory.string() << '\n';
      } else {
        std::cerr << r.name << ": numerical failure: " << r.error << " (partial outputs in "
                  << r.directory.string() << ")\n";
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const bool failed = std::any_of(results.begin(), results.end(),
                                  [](const eem::RunResult& r) { return r.exit_code != 0; });
  return failed ? kExitNumerical : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble atomic-clock time scale simulator"};
  app.set_version_flag("--version", eem::library_version());
  app.require_subcommand(1);

  std::vector<std::string> run_paths;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::size_t horizon = 0;
  unsigned jobs = 1;
  auto* run = app.add_subcommand("run", "run one or more scenario configs");
  run->add_option("config", run_paths, "scenario config file(s)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory")->capture_default_str();
  auto* seed_opt = run->add_option("--seed", seed, "override the scenario seed");
  auto* horizon_opt = run->add_option("--horizon", horizon, "override the horizon T (steps)");
  run->add_option("--jobs", jobs, "scenarios run in parallel")->capture_default_str()->check(CLI::PositiveNumber);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a scenario config");
  validate->add_option("config", validate_path, "scenario config file")->required();

  auto* list = app.add_subcommand("list-scenarios", "list the scenario kinds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  if (*list) return cmd_list();
  if (*validate) return cmd_validate(validate_path);
  std::optional<std::uint64_t> s;
  std::optional<std::size_t> h;
  if (*seed_opt) s = seed;
  if (*horizon_opt) h = horizon;
  return cmd_run(run_paths, out_dir, s, h, jobs);
}
