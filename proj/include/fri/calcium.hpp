#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "fri/friednet.hpp"
#include "fri/rng.hpp"

namespace fri {

struct FluorescenceTrace {
  double sample_rate = 60.0;
  std::vector<double> values;
  std::vector<double> neuropil;  // empty when absent
  bool neuropil_corrected = false;
  double duration() const { return values.size() / sample_rate; }
};

struct SpikeTrain {
  std::vector<double> times;  // seconds, ascending
};

struct WindowConfig {
  std::vector<int> short_lengths = {32, 16};
  std::vector<int> long_lengths = {128, 64, 32};
  int k_long = 7;
  int step = 1;
  double acceptance_factor = 2.0;  // T_a = factor * sampling period
};

struct DetectionHistogram {
  double bin_width = 0.0;          // one sampling period
  std::vector<double> probability; // normalized counts in [0, 1]
};

struct Detection {
  double time = 0.0;
  double probability = 0.0;
};

struct RocPoint {
  double threshold = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

// values - r * neuropil; pass-through (flagged) when no neuropil is present
FluorescenceTrace preprocess_trace(const FluorescenceTrace& trace, double contamination_ratio = 0.7);

// sliding windows with per-window debias (subtract the minimum sample) and
// spike labels rescaled to [-0.5, 0.5); missing spikes padded with 1, excess
// spikes truncated to the first K. training_only keeps windows with >= 1 spike
struct WindowDataset {
  Eigen::MatrixXd samples;    // (n, window)
  Eigen::MatrixXd labels;     // (n, K)
  std::vector<int> start;     // window start sample index
  int window_length = 0;
};
WindowDataset make_windows(const FluorescenceTrace& trace, const SpikeTrain& spikes,
                           int window_length, int k_window, int step, bool training_only);

// one model per window length; short windows run full FRIED-Net (K = 1),
// long windows run the encoder alone (K = k_long)
struct CalciumModel {
  int window_length = 0;
  int k_window = 1;
  EncoderParams encoder;
  std::optional<DecoderParams> decoder;
};

struct DetectionResult {
  DetectionHistogram histogram;
  std::vector<Detection> detections;  // local maxima with probability >= threshold
};

DetectionResult double_consistency_detect(std::vector<CalciumModel>& models,
                                          const FluorescenceTrace& trace, int step,
                                          double probability_threshold);

// threshold sweep; a detection within +-T_a of an unmatched truth is a true
// positive (greedy nearest matching). FPR counts false detections per
// opportunity bin (bins outside the +-T_a neighbourhood of any truth).
std::vector<RocPoint> roc_eval(const std::vector<Detection>& detections, const SpikeTrain& truth,
                               double t_acceptance, double trace_duration, double sample_rate);

struct CalciumSynthConfig {
  double duration = 240.0;     // seconds
  double sample_rate = 60.0;
  double spike_rate = 0.4;     // Poisson rate, spikes / second
  double amplitude = 1.0;
  double amplitude_jitter = 0.25;
  double rise_time = 0.02;     // seconds
  double decay_time = 0.25;    // seconds
  double noise_sigma = 0.03;
  double drift_amplitude = 0.05;
  double neuropil_level = 0.2; // scale of the contaminating signal
};

std::pair<FluorescenceTrace, SpikeTrain> synth_calcium(RngStream& rng,
                                                       const CalciumSynthConfig& cfg);

// CSV interfaces: trace `time,fluorescence[,neuropil]`, spikes one time per
// line, detections `time,probability`, ROC `threshold,tpr,fpr`
void write_trace_csv(const std::filesystem::path& path, const FluorescenceTrace& trace);
FluorescenceTrace read_trace_csv(const std::filesystem::path& path);
void write_spikes_csv(const std::filesystem::path& path, const SpikeTrain& spikes);
SpikeTrain read_spikes_csv(const std::filesystem::path& path);
void write_detections_csv(const std::filesystem::path& path, const std::vector<Detection>& d);
std::vector<Detection> read_detections_csv(const std::filesystem::path& path);
void write_roc_csv(const std::filesystem::path& path, const std::vector<RocPoint>& roc);

}  // namespace fri
