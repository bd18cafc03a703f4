#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "fri/errors.hpp"
#include "fri/harness.hpp"

using namespace fri;

namespace {
std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

ExperimentConfig tiny_config(const std::filesystem::path& out) {
  ExperimentConfig cfg;
  cfg.method = "prony-cadzow";
  cfg.psnr_db = {100.0};
  cfg.dt0 = {0.1};
  cfg.realizations = 16;
  cfg.seed = 7;
  cfg.seed_set = true;
  cfg.threads = 2;
  cfg.output_dir = out;
  return cfg;
}
}  // namespace

TEST_CASE("config file parsing, overrides, and rejection of unknown keys") {
  const auto dir = std::filesystem::temp_directory_path() / "fri_harness_cfg";
  std::filesystem::create_directories(dir);
  const auto path = dir / "config.json";
  std::ofstream(path) << R"({"method": "prony-cadzow", "N": 21, "K": 2,
                            "psnr": [10, 20], "dt0": [0.01], "J": 8, "seed": 3})";
  ExperimentConfig cfg = ExperimentConfig::from_json_file(path);
  CHECK(cfg.method == "prony-cadzow");
  CHECK(cfg.sample_count == 21);
  CHECK(cfg.psnr_db == std::vector<double>{10.0, 20.0});
  CHECK(cfg.seed == 3);
  CHECK(cfg.seed_set);

  cfg.apply_override("J", "32");
  CHECK(cfg.realizations == 32);
  CHECK_THROWS_AS(cfg.apply_override("no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_override("J", "not-a-number"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("noiseless classical sweep reaches perfect reconstruction") {
  const auto dir = std::filesystem::temp_directory_path() / "fri_harness_perfect";
  std::filesystem::remove_all(dir);
  ExperimentConfig cfg = tiny_config(dir);
  cfg.psnr_db = {300.0};  // effectively noiseless
  const auto artifacts = run_experiment(cfg);
  REQUIRE(artifacts.cells.size() == 1);
  CHECK(artifacts.cells[0].sd_mean < 1e-6);
  CHECK(artifacts.cells[0].misses == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("identical config and seed reproduce byte-identical result files") {
  const auto dir1 = std::filesystem::temp_directory_path() / "fri_harness_det1";
  const auto dir2 = std::filesystem::temp_directory_path() / "fri_harness_det2";
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
  ExperimentConfig cfg1 = tiny_config(dir1);
  cfg1.psnr_db = {20.0};
  cfg1.threads = 2;
  ExperimentConfig cfg2 = cfg1;
  cfg2.output_dir = dir2;
  cfg2.threads = 1;  // thread count must not affect results
  const auto a1 = run_experiment(cfg1);
  const auto a2 = run_experiment(cfg2);
  CHECK(slurp(a1.grid_csv) == slurp(a2.grid_csv));
  CHECK(slurp(a1.summary_json) == slurp(a2.summary_json));
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("summary json carries the schema fields") {
  const auto dir = std::filesystem::temp_directory_path() / "fri_harness_json";
  std::filesystem::remove_all(dir);
  ExperimentConfig cfg = tiny_config(dir);
  const auto artifacts = run_experiment(cfg);
  const std::string json = slurp(artifacts.summary_json);
  for (const char* field : {"config_hash", "cells", "psnr", "dt0", "sd_mean", "sd_median",
                            "misses", "falses"})
    CHECK(json.find(field) != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("breakdown map matches the library pointwise and spans the figure range") {
  const auto dir = std::filesystem::temp_directory_path() / "fri_harness_bd";
  std::filesystem::remove_all(dir);
  ExperimentConfig cfg = tiny_config(dir);
  std::vector<double> grid;
  for (double e = -3.0; e <= -0.5 + 1e-9; e += 0.25) grid.push_back(std::pow(10.0, e));
  const auto path = breakdown_map(cfg, grid);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "dt0,psnr_db");
  double dt0 = 0.0, db = 0.0;
  char comma = ',';
  int rows = 0;
  const double T = cfg.period / cfg.sample_count;
  while (in >> dt0 >> comma >> db) {
    CHECK(db == doctest::Approx(breakdown_psnr(20, 2.0 * M_PI / 21.0, dt0 / T)).epsilon(1e-12));
    CHECK(std::isfinite(db));
    ++rows;
  }
  CHECK(rows == int(grid.size()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("model cache hits reuse the stored network") {
  const auto dir = std::filesystem::temp_directory_path() / "fri_harness_cache";
  std::filesystem::remove_all(dir);
  ExperimentConfig cfg = tiny_config(dir);
  cfg.training_size = 64;
  cfg.unfolded_epochs = 2;
  cfg.batch_size = 32;
  const Pipeline pipe = make_pipeline(cfg);
  UnfoldedNetwork first = train_or_load_unfolded(cfg, pipe, 20.0);
  const auto path = cache_path(cfg, "unfolded", 20.0);
  CHECK(std::filesystem::exists(path));
  const auto stamp = std::filesystem::last_write_time(path);
  UnfoldedNetwork second = train_or_load_unfolded(cfg, pipe, 20.0);
  CHECK(std::filesystem::last_write_time(path) == stamp);  // no retrain
  for (std::size_t l = 0; l < first.layers.size(); ++l)
    CHECK(first.layers[l].w1.values() == second.layers[l].w1.values());
  std::filesystem::remove_all(dir);
}
