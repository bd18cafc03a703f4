#include "fri/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fri/csv.hpp"
#include "fri/errors.hpp"

namespace fri {

DiracStream::DiracStream(double tau, std::vector<double> t, std::vector<double> a)
    : period(tau), locations(std::move(t)), amplitudes(std::move(a)) {
  if (period <= 0.0) throw ConfigError("DiracStream: period must be positive");
  if (locations.empty() || locations.size() != amplitudes.size())
    throw ConfigError("DiracStream: need K >= 1 locations with matching amplitudes");
  for (double& loc : locations) {
    if (loc < -period / 2 || loc >= period / 2)
      throw ConfigError("DiracStream: location outside [-tau/2, tau/2)");
  }
  for (double amp : amplitudes) {
    if (!std::isfinite(amp) || amp == 0.0)
      throw ConfigError("DiracStream: amplitudes must be finite and nonzero");
  }
  // canonical order: ascending locations
  std::vector<std::size_t> idx(locations.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return locations[i] < locations[j]; });
  std::vector<double> t2, a2;
  for (auto i : idx) {
    t2.push_back(locations[i]);
    a2.push_back(amplitudes[i]);
  }
  locations = std::move(t2);
  amplitudes = std::move(a2);
}

double DiracStream::peak_amplitude() const {
  return *std::max_element(amplitudes.begin(), amplitudes.end());
}

SamplingConfig::SamplingConfig(int N, double tau, bool periodic_extension)
    : sample_count(N), period(tau), periodic(periodic_extension) {
  if (N < 2) throw ConfigError("SamplingConfig: need N >= 2");
  if (tau <= 0.0) throw ConfigError("SamplingConfig: period must be positive");
}

double NoiseSpec::sigma() const {
  if (std::isinf(psnr_db)) return 0.0;
  return peak_amplitude * std::pow(10.0, -psnr_db / 20.0);
}

double circular_distance(double a, double b, double period) {
  double d = std::fmod(a - b, period);
  if (d < -period / 2) d += period;
  if (d >= period / 2) d -= period;
  return std::abs(d);
}

SampleSet synthesize(const DiracStream& stream, const Kernel& kernel, const SamplingConfig& config) {
  const int N = config.sample_count;
  const double T = config.sampling_period();
  const auto sup = kernel.support();
  const int n0 = config.first_index();
  SampleSet out;
  out.config = config;
  out.values.assign(N, 0.0);
  for (int k = 0; k < stream.size(); ++k) {
    const double base = stream.locations[k] / T;
    const double a = stream.amplitudes[k];
    if (config.periodic) {
      // every periodic image whose kernel footprint overlaps the grid
      for (int n = 0; n < N; ++n) {
        const double arg0 = base - double(n0 + n);
        // need arg0 + l*N in [lo, hi]
        const int l_lo = static_cast<int>(std::ceil((sup.lo - arg0) / N - 1e-12));
        const int l_hi = static_cast<int>(std::floor((sup.hi - arg0) / N + 1e-12));
        for (int l = l_lo; l <= l_hi; ++l) out.values[n] += a * kernel(arg0 + double(l) * N);
      }
    } else {
      for (int n = 0; n < N; ++n) out.values[n] += a * kernel(base - double(n0 + n));
    }
  }
  return out;
}

SampleSet add_noise(const SampleSet& samples, const NoiseSpec& noise, RngStream& rng) {
  const double sigma = noise.sigma();
  if (sigma < 0.0) throw ConfigError("add_noise: sigma must be nonnegative");
  SampleSet out = samples;
  if (sigma == 0.0) return out;
  for (double& v : out.values) v += sigma * rng.normal();
  return out;
}

namespace {

// exact minimum-cost assignment by bitmask DP (K <= 20); truths may stay
// unmatched only when there are fewer estimates than truths
Alignment assign_min_cost(const std::vector<double>& est, const DiracStream& truth) {
  const int K = truth.size();
  const int Ke = static_cast<int>(est.size());
  Alignment a;
  a.matched.assign(K, -1);
  if (Ke == 0) {
    a.miss_count = K;
    return a;
  }
  if (K > 20 || Ke > 20) throw ConfigError("align_estimates: K too large for exact assignment");

  const int full = 1 << Ke;
  const double inf = std::numeric_limits<double>::infinity();
  // dp over truths processed so far and used-estimate mask
  std::vector<std::vector<double>> dp(K + 1, std::vector<double>(full, inf));
  std::vector<std::vector<int>> choice(K + 1, std::vector<int>(full, -2));
  dp[0][0] = 0.0;
  const int max_matched = std::min(K, Ke);
  for (int k = 0; k < K; ++k) {
    for (int mask = 0; mask < full; ++mask) {
      if (dp[k][mask] == inf) continue;
      const int used = __builtin_popcount(static_cast<unsigned>(mask));
      // skip truth k only if we can still match max_matched estimates
      const int remaining_truths = K - k - 1;
      if (used + remaining_truths >= max_matched && dp[k][mask] < dp[k + 1][mask]) {
        dp[k + 1][mask] = dp[k][mask];
        choice[k + 1][mask] = -1;
      }
      for (int e = 0; e < Ke; ++e) {
        if (mask & (1 << e)) continue;
        const double c = circular_distance(est[e], truth.locations[k], truth.period);
        const double cost = dp[k][mask] + c * c;
        if (cost < dp[k + 1][mask | (1 << e)]) {
          dp[k + 1][mask | (1 << e)] = cost;
          choice[k + 1][mask | (1 << e)] = e;
        }
      }
    }
  }
  double best = inf;
  int best_mask = 0;
  for (int mask = 0; mask < full; ++mask) {
    if (__builtin_popcount(static_cast<unsigned>(mask)) != max_matched) continue;
    if (dp[K][mask] < best) {
      best = dp[K][mask];
      best_mask = mask;
    }
  }
  a.total_cost = best;
  int mask = best_mask;
  for (int k = K; k >= 1; --k) {
    const int e = choice[k][mask];
    if (e >= 0) {
      a.matched[k - 1] = e;
      mask &= ~(1 << e);
    }
  }
  for (int k = 0; k < K; ++k)
    if (a.matched[k] < 0) ++a.miss_count;
  std::vector<bool> used(Ke, false);
  for (int k = 0; k < K; ++k)
    if (a.matched[k] >= 0) used[a.matched[k]] = true;
  for (int e = 0; e < Ke; ++e)
    if (!used[e]) a.spurious.push_back(e);
  return a;
}

}  // namespace

Alignment align_estimates(const ReconstructionResult& result, const DiracStream& truth) {
  return assign_min_cost(result.locations, truth);
}

ReconstructionResult apply_alignment(const ReconstructionResult& result, const Alignment& a,
                                     const DiracStream& truth) {
  ReconstructionResult out;
  out.method = result.method;
  out.degenerate_design = result.degenerate_design;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int k = 0; k < truth.size(); ++k) {
    if (a.matched[k] >= 0) {
      out.locations.push_back(result.locations[a.matched[k]]);
      out.amplitudes.push_back(a.matched[k] < static_cast<int>(result.amplitudes.size())
                                   ? result.amplitudes[a.matched[k]]
                                   : nan);
    } else {
      out.locations.push_back(nan);
      out.amplitudes.push_back(nan);
    }
  }
  return out;
}

SdReport sd_metric(const std::vector<std::vector<double>>& estimates, const DiracStream& truth) {
  if (estimates.empty()) throw ConfigError("sd_metric: no realizations");
  const int K = truth.size();
  SdReport rep;
  rep.per_location.assign(K, 0.0);
  for (int k = 0; k < K; ++k) {
    double acc = 0.0;
    for (const auto& row : estimates) {
      if (static_cast<int>(row.size()) != K) throw ConfigError("sd_metric: row size mismatch");
      const double e = row[k] - truth.locations[k];
      acc += e * e;
    }
    rep.per_location[k] = std::sqrt(acc / double(estimates.size()));
  }
  std::vector<double> sorted = rep.per_location;
  std::sort(sorted.begin(), sorted.end());
  rep.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / double(K);
  rep.median = (K % 2 == 1) ? sorted[K / 2] : 0.5 * (sorted[K / 2 - 1] + sorted[K / 2]);
  return rep;
}

double breakdown_psnr(int P, double lambda, double dt_over_T) {
  if (dt_over_T <= 0.0) throw ConfigError("breakdown_psnr: dt/T must be positive");
  const double half = 0.5 * P + 1.0;
  const double den_sin = std::sin(0.5 * lambda * dt_over_T);
  if (std::abs(den_sin) < 1e-300) throw NumericalError("breakdown_psnr: sin denominator underflow");
  const double ratio = std::sin(0.5 * lambda * half * dt_over_T) / den_sin;
  const double gap = half - ratio;
  if (gap == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(8.0 * half * std::log(half) / (gap * gap));
}

void write_stream_csv(const std::filesystem::path& path, const DiracStream& stream) {
  std::vector<std::string> lines;
  for (int k = 0; k < stream.size(); ++k)
    lines.push_back(csv::format_double(stream.locations[k]) + "," +
                    csv::format_double(stream.amplitudes[k]));
  csv::write_lines(path, lines);
}

DiracStream read_stream_csv(const std::filesystem::path& path, double period) {
  std::vector<double> t, a;
  for (const auto& row : csv::read_table(path)) {
    if (row.size() != 2) throw ConfigError("stream csv: expected t,a rows");
    t.push_back(row[0]);
    a.push_back(row[1]);
  }
  return DiracStream(period, std::move(t), std::move(a));
}

void write_samples_csv(const std::filesystem::path& path, const SampleSet& samples) {
  csv::write_column(path, samples.values);
}

}  // namespace fri
