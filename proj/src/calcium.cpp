#include "fri/calcium.hpp"

#include <algorithm>
#include <cmath>

#include "fri/csv.hpp"
#include "fri/errors.hpp"

namespace fri {

FluorescenceTrace preprocess_trace(const FluorescenceTrace& trace, double contamination_ratio) {
  FluorescenceTrace out = trace;
  if (trace.neuropil.empty()) {
    out.neuropil_corrected = false;
    return out;
  }
  if (trace.neuropil.size() != trace.values.size())
    throw ConfigError("preprocess_trace: neuropil length mismatch");
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] -= contamination_ratio * trace.neuropil[i];
  out.neuropil.clear();
  out.neuropil_corrected = true;
  return out;
}

WindowDataset make_windows(const FluorescenceTrace& trace, const SpikeTrain& spikes,
                           int window_length, int k_window, int step, bool training_only) {
  const int n = static_cast<int>(trace.values.size());
  if (window_length > n) throw ConfigError("make_windows: window longer than trace");
  if (k_window < 1 || step < 1) throw ConfigError("make_windows: bad window parameters");
  const double T = 1.0 / trace.sample_rate;

  std::vector<std::vector<double>> rows;
  std::vector<std::vector<double>> labels;
  std::vector<int> starts;
  for (int w = 0; w + window_length <= n; w += step) {
    // spikes inside [w*T, (w+window)*T), rescaled to [-0.5, 0.5)
    std::vector<double> in_window;
    for (double ts : spikes.times) {
      const double rel = (ts / T - double(w)) / double(window_length) - 0.5;
      if (rel >= -0.5 && rel < 0.5) in_window.push_back(rel);
    }
    if (training_only && in_window.empty()) continue;
    std::sort(in_window.begin(), in_window.end());
    std::vector<double> label(k_window, 1.0);  // out-of-window padding
    for (int k = 0; k < std::min<int>(k_window, in_window.size()); ++k) label[k] = in_window[k];

    std::vector<double> window(trace.values.begin() + w, trace.values.begin() + w + window_length);
    const double lo = *std::min_element(window.begin(), window.end());
    for (double& v : window) v -= lo;

    rows.push_back(std::move(window));
    labels.push_back(std::move(label));
    starts.push_back(w);
  }

  WindowDataset out;
  out.window_length = window_length;
  out.start = std::move(starts);
  out.samples.resize(rows.size(), window_length);
  out.labels.resize(rows.size(), k_window);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < window_length; ++c) out.samples(long(r), c) = rows[r][c];
    for (int c = 0; c < k_window; ++c) out.labels(long(r), c) = labels[r][c];
  }
  return out;
}

DetectionResult double_consistency_detect(std::vector<CalciumModel>& models,
                                          const FluorescenceTrace& trace, int step,
                                          double probability_threshold) {
  if (models.empty()) throw ConfigError("double_consistency_detect: no trained models");
  const int n = static_cast<int>(trace.values.size());
  const double T = 1.0 / trace.sample_rate;

  std::vector<double> counts(n, 0.0);
  std::vector<double> denom(n, 0.0);
  SpikeTrain no_spikes;

  for (auto& model : models) {
    const int W = model.window_length;
    WindowDataset windows = make_windows(trace, no_spikes, W, model.k_window, step, false);
    const Eigen::MatrixXd predicted = encoder_infer(model.encoder, windows.samples);

    // per-bin coverage by this model's windows
    for (std::size_t r = 0; r < windows.start.size(); ++r)
      for (int b = windows.start[r]; b < windows.start[r] + W; ++b) denom[b] += 1.0;

    std::vector<char> hit(n);
    for (std::size_t r = 0; r < windows.start.size(); ++r) {
      std::fill(hit.begin(), hit.end(), 0);
      for (int k = 0; k < model.k_window; ++k) {
        const double rel = predicted(long(r), k);
        if (rel < -0.5 || rel >= 0.5) continue;  // out-of-window predictions are disregarded
        const int bin = windows.start[r] + static_cast<int>(std::floor((rel + 0.5) * W));
        if (bin >= 0 && bin < n) hit[bin] = 1;  // one vote per window per bin
      }
      for (int b = windows.start[r]; b < windows.start[r] + W; ++b)
        if (hit[b]) counts[b] += 1.0;
    }
  }

  DetectionResult result;
  result.histogram.bin_width = T;
  result.histogram.probability.assign(n, 0.0);
  for (int b = 0; b < n; ++b)
    if (denom[b] > 0.0) result.histogram.probability[b] = counts[b] / denom[b];

  // local maxima at or above the threshold; plateaus report their first bin
  const auto& p = result.histogram.probability;
  for (int b = 0; b < n; ++b) {
    if (p[b] < probability_threshold || p[b] <= 0.0) continue;
    const double left = (b > 0) ? p[b - 1] : 0.0;
    const double right = (b + 1 < n) ? p[b + 1] : 0.0;
    if (p[b] >= right && p[b] > left) result.detections.push_back({(b + 0.5) * T, p[b]});
  }
  return result;
}

namespace {

// greedy nearest matching; each truth consumed once
int count_true_positives(const std::vector<double>& det_times, const SpikeTrain& truth,
                         double t_acceptance) {
  struct Pair {
    double dist;
    int det, tru;
  };
  std::vector<Pair> pairs;
  for (int d = 0; d < static_cast<int>(det_times.size()); ++d)
    for (int t = 0; t < static_cast<int>(truth.times.size()); ++t) {
      const double dist = std::abs(det_times[d] - truth.times[t]);
      if (dist <= t_acceptance) pairs.push_back({dist, d, t});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.det != b.det) return a.det < b.det;
    return a.tru < b.tru;
  });
  std::vector<char> det_used(det_times.size(), 0), tru_used(truth.times.size(), 0);
  int tp = 0;
  for (const auto& pr : pairs) {
    if (det_used[pr.det] || tru_used[pr.tru]) continue;
    det_used[pr.det] = 1;
    tru_used[pr.tru] = 1;
    ++tp;
  }
  return tp;
}

}  // namespace

std::vector<RocPoint> roc_eval(const std::vector<Detection>& detections, const SpikeTrain& truth,
                               double t_acceptance, double trace_duration, double sample_rate) {
  // opportunity bins: sample bins farther than T_a from every true spike
  const int n_bins = static_cast<int>(std::lround(trace_duration * sample_rate));
  int opportunity = 0;
  for (int b = 0; b < n_bins; ++b) {
    const double t = (b + 0.5) / sample_rate;
    bool near_truth = false;
    for (double ts : truth.times)
      if (std::abs(t - ts) <= t_acceptance) {
        near_truth = true;
        break;
      }
    if (!near_truth) ++opportunity;
  }

  std::vector<RocPoint> roc;
  for (int i = 0; i <= 100; ++i) {
    const double threshold = i / 100.0;
    std::vector<double> kept;
    for (const auto& d : detections)
      if (d.probability >= threshold) kept.push_back(d.time);
    const int tp = truth.times.empty() ? 0 : count_true_positives(kept, truth, t_acceptance);
    const int fp = static_cast<int>(kept.size()) - tp;
    RocPoint pt;
    pt.threshold = threshold;
    pt.tpr = truth.times.empty() ? 0.0 : double(tp) / double(truth.times.size());
    pt.fpr = opportunity > 0 ? double(fp) / double(opportunity) : 0.0;
    roc.push_back(pt);
  }
  return roc;
}

std::pair<FluorescenceTrace, SpikeTrain> synth_calcium(RngStream& rng,
                                                       const CalciumSynthConfig& cfg) {
  if (cfg.duration <= 0.0 || cfg.sample_rate <= 0.0 || cfg.rise_time <= 0.0 ||
      cfg.decay_time <= 0.0)
    throw ConfigError("synth_calcium: parameters must be positive");
  const int n = static_cast<int>(std::lround(cfg.duration * cfg.sample_rate));
  const double T = 1.0 / cfg.sample_rate;

  SpikeTrain spikes;
  double t = rng.exponential(cfg.spike_rate);
  while (t < cfg.duration) {
    spikes.times.push_back(t);
    t += rng.exponential(cfg.spike_rate);
  }

  FluorescenceTrace trace;
  trace.sample_rate = cfg.sample_rate;
  trace.values.assign(n, 0.0);

  // transient: difference of exponentials normalized to unit peak
  const double tr = cfg.rise_time, td = cfg.decay_time;
  const double tpeak = tr * td / (td - tr) * std::log(td / tr);
  const double peak = std::exp(-tpeak / td) - std::exp(-tpeak / tr);
  auto transient = [&](double dt) {
    if (dt < 0.0) return 0.0;
    return (std::exp(-dt / td) - std::exp(-dt / tr)) / peak;
  };

  for (double ts : spikes.times) {
    const double amp = cfg.amplitude * (1.0 + cfg.amplitude_jitter * (2.0 * rng.uniform() - 1.0));
    const int lo = static_cast<int>(std::floor(ts / T));
    const int hi = std::min(n, lo + static_cast<int>(8.0 * td / T) + 2);
    for (int i = std::max(0, lo); i < hi; ++i) trace.values[i] += amp * transient(i * T - ts);
  }

  // slow drift + noise; neuropil carries the drift plus its own noise
  const double drift_freq = 2.0 * 3.14159265358979323846 / cfg.duration * 2.0;
  const double phase = rng.uniform(0.0, 6.283185307179586);
  trace.neuropil.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double drift = cfg.drift_amplitude * std::sin(drift_freq * i * T + phase);
    trace.neuropil[i] = cfg.neuropil_level * (1.0 + drift + cfg.noise_sigma * rng.normal());
    trace.values[i] += 0.7 * trace.neuropil[i] + drift + cfg.noise_sigma * rng.normal();
  }
  return {trace, spikes};
}

void write_trace_csv(const std::filesystem::path& path, const FluorescenceTrace& trace) {
  std::vector<std::string> lines;
  const bool with_neuropil = !trace.neuropil.empty();
  lines.push_back(with_neuropil ? "time,fluorescence,neuropil" : "time,fluorescence");
  for (std::size_t i = 0; i < trace.values.size(); ++i) {
    std::string l = csv::format_double(double(i) / trace.sample_rate) + "," +
                    csv::format_double(trace.values[i]);
    if (with_neuropil) l += "," + csv::format_double(trace.neuropil[i]);
    lines.push_back(l);
  }
  csv::write_lines(path, lines);
}

FluorescenceTrace read_trace_csv(const std::filesystem::path& path) {
  const auto rows = csv::read_table(path);
  if (rows.size() < 2) throw ConfigError("trace csv: need >= 2 rows");
  FluorescenceTrace trace;
  trace.sample_rate = 1.0 / (rows[1][0] - rows[0][0]);
  for (const auto& row : rows) {
    if (row.size() < 2) throw ConfigError("trace csv: expected time,fluorescence[,neuropil]");
    trace.values.push_back(row[1]);
    if (row.size() >= 3) trace.neuropil.push_back(row[2]);
  }
  if (!trace.neuropil.empty() && trace.neuropil.size() != trace.values.size())
    throw ConfigError("trace csv: ragged neuropil column");
  return trace;
}

void write_spikes_csv(const std::filesystem::path& path, const SpikeTrain& spikes) {
  csv::write_column(path, spikes.times);
}

SpikeTrain read_spikes_csv(const std::filesystem::path& path) {
  SpikeTrain s;
  s.times = csv::read_column(path);
  std::sort(s.times.begin(), s.times.end());
  return s;
}

void write_detections_csv(const std::filesystem::path& path, const std::vector<Detection>& d) {
  std::vector<std::vector<double>> rows;
  for (const auto& det : d) rows.push_back({det.time, det.probability});
  csv::write_table(path, "time,probability", rows);
}

std::vector<Detection> read_detections_csv(const std::filesystem::path& path) {
  std::vector<Detection> out;
  for (const auto& row : csv::read_table(path)) {
    if (row.size() != 2) throw ConfigError("detections csv: expected time,probability");
    out.push_back({row[0], row[1]});
  }
  return out;
}

void write_roc_csv(const std::filesystem::path& path, const std::vector<RocPoint>& roc) {
  std::vector<std::vector<double>> rows;
  for (const auto& p : roc) rows.push_back({p.threshold, p.tpr, p.fpr});
  csv::write_table(path, "threshold,tpr,fpr", rows);
}

}  // namespace fri
