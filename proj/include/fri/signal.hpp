#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fri/kernels.hpp"
#include "fri/rng.hpp"

namespace fri {

// tau-periodic stream of K Diracs; locations canonical (sorted, in [-tau/2, tau/2))
struct DiracStream {
  double period = 1.0;
  std::vector<double> locations;
  std::vector<double> amplitudes;

  DiracStream() = default;
  DiracStream(double tau, std::vector<double> t, std::vector<double> a);
  int size() const { return static_cast<int>(locations.size()); }
  double peak_amplitude() const;
};

// N samples per period, T = tau/N; grid indices n in [n0, n0 + N)
struct SamplingConfig {
  int sample_count = 0;
  double period = 1.0;
  bool periodic = true;  // include periodic images of the stream (Eq.-(1) model)

  SamplingConfig() = default;
  SamplingConfig(int N, double tau, bool periodic_extension = true);
  double sampling_period() const { return period / sample_count; }
  int first_index() const { return -(sample_count / 2); }
};

struct SampleSet {
  std::vector<double> values;
  SamplingConfig config;
};

struct NoiseSpec {
  double psnr_db = 0.0;
  double peak_amplitude = 0.0;
  double sigma() const;  // peak * 10^(-psnr/20)
};

struct ReconstructionResult {
  std::vector<double> locations;
  std::vector<double> amplitudes;
  std::string method;
  bool degenerate_design = false;  // duplicate-location least squares fell back to least norm
};

// alignment of estimates against ground truth (minimum-cost assignment under
// circular squared distance)
struct Alignment {
  // matched[k] = index into estimate arrays for truth k, or -1 when missed
  std::vector<int> matched;
  std::vector<int> spurious;  // estimate indices not matched to any truth
  int miss_count = 0;
  double total_cost = 0.0;
};

double circular_distance(double a, double b, double period);

SampleSet synthesize(const DiracStream& stream, const Kernel& kernel, const SamplingConfig& config);
SampleSet add_noise(const SampleSet& samples, const NoiseSpec& noise, RngStream& rng);

Alignment align_estimates(const ReconstructionResult& result, const DiracStream& truth);
ReconstructionResult apply_alignment(const ReconstructionResult& result, const Alignment& a,
                                     const DiracStream& truth);

// SD_k = sqrt(mean_j (t_hat_k^(j) - t_k)^2) over J aligned realizations
struct SdReport {
  std::vector<double> per_location;
  double mean = 0.0;
  double median = 0.0;
};
SdReport sd_metric(const std::vector<std::vector<double>>& estimates, const DiracStream& truth);

// Necessary-condition threshold for subspace swap with K=2 equal amplitudes:
// below the returned PSNR (dB) the subspace estimate can break down.
double breakdown_psnr(int P, double lambda, double dt_over_T);

// serialization: streams as "t,a" lines, samples one value per line
void write_stream_csv(const std::filesystem::path& path, const DiracStream& stream);
DiracStream read_stream_csv(const std::filesystem::path& path, double period);
void write_samples_csv(const std::filesystem::path& path, const SampleSet& samples);

}  // namespace fri
