#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sys/wait.h>
#include <sstream>
#include <string>

#include <json.hpp>

#include "eem/scenario.hpp"

using namespace eem;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({
  "name": "tiny",
  "kind": "sync-simple-average",
  "horizon": 2000,
  "seed": 4,
  "model": {
    "tau": 1.0,
    "sigma1": [1.7e-10, 8.86e-11, 1.221e-10],
    "sigma2": [1.507e-13, 5.32e-14, 1.67e-14],
    "measurement": {"type": "star", "stddev": [4.353e-15, 7.59e-16]}
  }
})";

nlohmann::json minimal() { return nlohmann::json::parse(kMinimal); }

std::vector<std::string> errors_of(const std::string& text) {
  try {
    validate_config(text);
  } catch (const ConfigError& e) {
    return e.errors();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v) {
    if (s.find(needle) != std::string::npos) return true;
  }
  return false;
}

fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("eem_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(ValidateConfig, MinimalConfigGetsDefaults) {
  const auto cfg = validate_config(kMinimal);
  EXPECT_EQ(cfg.kind, ScenarioKind::sync_simple_average);
  EXPECT_EQ(cfg.controller.m, 200u);
  EXPECT_EQ(cfg.model.V.rows(), 2);
  EXPECT_FALSE(cfg.outputs.empty());
}

TEST(ValidateConfig, MissingSigmaListsNamed) {
  auto j = minimal();
  j["model"].erase("sigma1");
  j["model"].erase("sigma2");
  const auto errs = errors_of(j.dump());
  EXPECT_TRUE(any_contains(errs, "model.sigma1"));
  EXPECT_TRUE(any_contains(errs, "model.sigma2"));
}

TEST(ValidateConfig, WeightNormalizationViolation) {
  auto j = minimal();
  j["controller"] = {{"q", {0.3, 0.3, 0.3}}};
  const auto errs = errors_of(j.dump());
  ASSERT_EQ(errs.size(), 1u);
  EXPECT_NE(errs[0].find("controller.q"), std::string::npos);
  EXPECT_NE(errs[0].find("q^T 1 = 1"), std::string::npos);
}

TEST(ValidateConfig, ErrorsAreAggregated) {
  auto j = minimal();
  j["kind"] = "nope";
  j["horizon"] = -3;
  j["model"]["tau"] = 0.0;
  j["outputs"] = {"allan", "plots"};
  const auto errs = errors_of(j.dump());
  EXPECT_GE(errs.size(), 4u);
  EXPECT_TRUE(any_contains(errs, "kind"));
  EXPECT_TRUE(any_contains(errs, "horizon"));
  EXPECT_TRUE(any_contains(errs, "model.tau"));
  EXPECT_TRUE(any_contains(errs, "outputs[1]"));
}

TEST(ValidateConfig, SpectralConditionsChecked) {
  auto j = minimal();
  j["kind"] = "balanced";
  EXPECT_TRUE(errors_of(j.dump()).empty());
  j["controller"] = {{"F_o", {{0, 0, 0, 0}, {0, 0, 0, 0}}}, {"K_bo", {0.0, 0.0}}};
  const auto errs = errors_of(j.dump());
  EXPECT_TRUE(any_contains(errs, "controller.F_o"));
  EXPECT_TRUE(any_contains(errs, "controller.K_bo"));
}

TEST(ValidateConfig, BadMeasurementStructure) {
  auto j = minimal();
  j["model"]["measurement"] = {{"type", "matrix"}, {"V", {{1, 1, 0}, {0, 1, -1}}}, {"stddev", {1e-15, 1e-15}}};
  EXPECT_TRUE(any_contains(errors_of(j.dump()), "model"));
  j = minimal();
  j["model"]["measurement"] = {{"type", "star"}, {"R", {{1, 2}, {2, 1}}}};
  EXPECT_FALSE(errors_of(j.dump()).empty());
}

TEST(ValidateConfig, MalformedJson) {
  EXPECT_THROW(validate_config("{not json"), ConfigError);
  EXPECT_THROW(validate_config("[1,2]"), ConfigError);
}

TEST(ValidateConfig, AllBundledConfigsValidate) {
  std::size_t count = 0;
  std::set<std::string> kinds;
  for (const auto& e : fs::directory_iterator(EEM_SCENARIO_DIR)) {
    if (e.path().extension() != ".json") continue;
    const auto cfg = load_config(e.path());
    kinds.insert(to_string(cfg.kind));
    ++count;
  }
  EXPECT_EQ(kinds.size(), scenario_kind_names().size());
  EXPECT_GE(count, scenario_kind_names().size());
}

TEST(RunScenario, ManifestHashesReproducible) {
  const auto cfg = validate_config(kMinimal);
  const auto a = temp_dir("repro_a"), b = temp_dir("repro_b");
  const auto ra = run_scenario(cfg, a);
  const auto rb = run_scenario(cfg, b);
  ASSERT_EQ(ra.exit_code, 0) << ra.error;
  ASSERT_EQ(ra.artifacts.size(), rb.artifacts.size());
  for (std::size_t i = 0; i < ra.artifacts.size(); ++i) {
    EXPECT_EQ(ra.artifacts[i].path, rb.artifacts[i].path);
    EXPECT_EQ(ra.artifacts[i].sha256, rb.artifacts[i].sha256);
    EXPECT_EQ(sha256_file(ra.directory / ra.artifacts[i].path), ra.artifacts[i].sha256);
  }
  EXPECT_EQ(slurp(a / "tiny" / "manifest.json"), slurp(b / "tiny" / "manifest.json"));
  const auto m = nlohmann::json::parse(slurp(a / "tiny" / "manifest.json"));
  EXPECT_FALSE(m["partial"].get<bool>());
  EXPECT_EQ(m["config"]["name"], "tiny");
  EXPECT_TRUE(m["versions"].contains("eem"));

  RunOptions other;
  other.seed = 5;
  const auto rc = run_scenario(cfg, temp_dir("repro_c"), other);
  EXPECT_NE(rc.artifacts.front().sha256 + rc.artifacts.back().sha256,
            ra.artifacts.front().sha256 + ra.artifacts.back().sha256);
}

TEST(RunScenario, Sha256KnownVector) {
  const auto dir = temp_dir("sha");
  fs::create_directories(dir);
  std::ofstream(dir / "abc.txt") << "abc";
  EXPECT_EQ(sha256_file(dir / "abc.txt"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(RunScenario, EveryBundledConfigRunsAtDeskScale) {
  for (const auto& e : fs::directory_iterator(EEM_SCENARIO_DIR)) {
    if (e.path().extension() != ".json") continue;
    const auto cfg = load_config(e.path());
    RunOptions o;
    o.horizon = 100000;
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_scenario(cfg, temp_dir("bundled"), o);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_EQ(r.exit_code, 0) << cfg.name << ": " << r.error;
    EXPECT_FALSE(r.artifacts.empty()) << cfg.name;
    EXPECT_LT(secs, 300.0) << cfg.name;
  }
}

TEST(RunScenario, NumericalFailureIsFlaggedPartial) {
  auto j = minimal();
  j["kind"] = "standard-kf";
  auto cfg = validate_config(j.dump());
  cfg.model.R(0, 0) = -1.0;  // bypasses validation to force a runtime failure
  const auto r = run_scenario(cfg, temp_dir("partial"));
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_TRUE(r.partial);
  const auto m = nlohmann::json::parse(slurp(r.directory / "manifest.json"));
  EXPECT_TRUE(m["partial"].get<bool>());
  EXPECT_FALSE(m["error"].get<std::string>().empty());
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    if (std::string(EEMSIM_EXE).empty()) GTEST_SKIP() << "eemsim not built";
  }
  static int run(const std::string& args) {
    const std::string cmd = std::string(EEMSIM_EXE) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  }
};

TEST_F(Cli, ExitCodes) {
  const auto dir = temp_dir("cli");
  fs::create_directories(dir);
  std::ofstream(dir / "good.json") << kMinimal;
  auto bad = minimal();
  bad["controller"] = {{"q", {0.3, 0.3, 0.3}}};
  std::ofstream(dir / "bad.json") << bad.dump();

  EXPECT_EQ(run("list-scenarios"), 0);
  EXPECT_EQ(run("validate " + (dir / "good.json").string()), 0);
  EXPECT_EQ(run("validate " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run("run " + (dir / "good.json").string() + " --out " + (dir / "out").string() +
                " --seed 9 --horizon 500 --jobs 2"),
            0);
  EXPECT_TRUE(fs::exists(dir / "out" / "tiny" / "manifest.json"));
  const auto m = nlohmann::json::parse(slurp(dir / "out" / "tiny" / "manifest.json"));
  EXPECT_EQ(m["seed"].get<int>(), 9);
  EXPECT_EQ(m["horizon"].get<int>(), 500);
  EXPECT_EQ(run("run " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run("bogus"), 2);
}
