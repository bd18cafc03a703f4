#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fri/calcium.hpp"
#include "fri/friednet.hpp"
#include "fri/unfolded.hpp"

namespace fri {

struct ExperimentConfig {
  std::string method = "prony-cadzow";
  // prony-cadzow | prony-pwgd | unfolded | friednet-encoder | friednet |
  // friednet-finetune | calcium-detect
  std::string kernel = "emoms";  // emoms | espline | <csv path>
  int espline_order = 6;
  double espline_scale = 3.5;  // omega_m = (2m - P) * pi / (scale * (P+1))
  int sample_count = 21;       // N
  int dirac_count = 2;         // K
  double period = 1.0;         // tau
  std::vector<double> psnr_db = {10.0, 20.0, 40.0};
  std::vector<double> dt0 = {1e-2};
  int realizations = 200;  // J
  int training_size = 10000;
  std::uint64_t seed = 1;
  bool seed_set = false;

  int cadzow_iterations = 10;
  double pwgd_delta = 0.9999;

  int unfolded_layers = 5;
  int unfolded_epochs = 500;
  double unfolded_lr = 2e-4;
  double unfolded_mu0 = 0.25;

  int fried_stage1_epochs = 300;
  int fried_stage2_epochs = 150;
  int fried_stage3_epochs = 150;
  double fried_gamma = 1.0;
  double decoder_delta = 1.0 / 64.0;
  bool kernel_known = true;  // friednet decoder fixed (known) vs learned

  int finetune_steps = 20;
  double finetune_lr = 1e-3;

  int batch_size = 64;
  int threads = 2;
  std::filesystem::path output_dir = "out";

  // calcium pipeline
  double calcium_duration = 240.0;
  double calcium_test_duration = 120.0;
  double calcium_spike_rate = 0.4;
  double calcium_noise = 0.03;
  double calcium_threshold = 0.1;
  int calcium_epochs = 40;
  int calcium_max_windows = 3000;
  WindowConfig window_config;

  static ExperimentConfig from_json_file(const std::filesystem::path& path);
  void apply_override(const std::string& key, const std::string& value);
  std::string canonical() const;   // stable textual form, hashed for caching
  std::uint64_t config_hash() const;
};

struct CellResult {
  double psnr_db = 0.0;
  double dt0 = 0.0;
  double sd_mean = 0.0;
  double sd_median = 0.0;
  long misses = 0;
  long falses = 0;
  double runtime_s = 0.0;  // reported to the console, never serialized
};

struct ExperimentArtifacts {
  std::vector<CellResult> cells;
  std::filesystem::path grid_csv;
  std::filesystem::path summary_json;
};

// shared construction of the kernel and reproduction coefficients
struct Pipeline {
  Kernel kernel;
  ExpReproCoeffs coeffs;
  SamplingConfig config;
  int order = 0;  // moment order P
  int split = 0;  // near-square M
};
Pipeline make_pipeline(const ExperimentConfig& cfg);

DiracStream random_stream(const ExperimentConfig& cfg, RngStream& rng, bool equal_amplitudes,
                          double dt0);

ReconstructionResult reconstruct_classical(const Pipeline& pipe, const SampleSet& noisy, int K,
                                           double delta1, double delta2, int iterations);

// Monte Carlo sweep over (PSNR, dt0) cells; trains and caches models on demand
ExperimentArtifacts run_experiment(const ExperimentConfig& cfg);

// Eq.-(8) curve over a dt0 grid; emits dt0,psnr_db rows
std::filesystem::path breakdown_map(const ExperimentConfig& cfg, const std::vector<double>& grid);

// calcium pipeline driver: synthesizes train/test traces, trains the window
// models (cached), runs double consistency detection and ROC on the test trace
struct CalciumArtifacts {
  std::filesystem::path detections_csv;
  std::filesystem::path histogram_csv;
  std::filesystem::path roc_csv;
  std::vector<RocPoint> roc;
};
CalciumArtifacts run_calcium(const ExperimentConfig& cfg);

// deterministic model store keyed by a content hash of (architecture,
// data-generation parameters, seed)
std::filesystem::path cache_path(const ExperimentConfig& cfg, const std::string& tag,
                                 double psnr_db);

UnfoldedNetwork train_or_load_unfolded(const ExperimentConfig& cfg, const Pipeline& pipe,
                                       double psnr_db, bool bypass_cache = false);
void train_or_load_friednet(const ExperimentConfig& cfg, const Pipeline& pipe, double psnr_db,
                            bool encoder_only, EncoderParams& enc, DecoderParams& dec,
                            bool bypass_cache = false);

std::uint64_t fnv1a64(const std::string& s);

}  // namespace fri
