#include "fri/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <atomic>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "fri/csv.hpp"
#include "fri/errors.hpp"
#include "fri/nn/checkpoint.hpp"

namespace fri {

namespace {

using json = nlohmann::ordered_json;

std::vector<double> parse_list(const std::string& value) {
  std::vector<double> out;
  for (const auto& cell : csv::split(value))
    if (!cell.empty()) out.push_back(std::stod(cell));
  return out;
}

std::string list_to_string(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += csv::format_double(v[i]);
  }
  return s;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config: invalid JSON in " + path.string() + ": " + e.what());
  }
  ExperimentConfig cfg;
  for (const auto& [key, value] : j.items()) {
    std::string text;
    if (value.is_array()) {
      std::string list;
      for (const auto& item : value) {
        if (!list.empty()) list += ",";
        list += item.dump();
      }
      text = list;
    } else if (value.is_string()) {
      text = value.get<std::string>();
    } else {
      text = value.dump();
    }
    cfg.apply_override(key, text);
  }
  return cfg;
}

void ExperimentConfig::apply_override(const std::string& key, const std::string& value) {
  try {
    if (key == "method") method = value;
    else if (key == "kernel") kernel = value;
    else if (key == "espline_order") espline_order = std::stoi(value);
    else if (key == "espline_scale") espline_scale = std::stod(value);
    else if (key == "N") sample_count = std::stoi(value);
    else if (key == "K") dirac_count = std::stoi(value);
    else if (key == "tau") period = std::stod(value);
    else if (key == "psnr") psnr_db = parse_list(value);
    else if (key == "dt0") dt0 = parse_list(value);
    else if (key == "J") realizations = std::stoi(value);
    else if (key == "training_size") training_size = std::stoi(value);
    else if (key == "seed") { seed = std::stoull(value); seed_set = true; }
    else if (key == "cadzow_iterations") cadzow_iterations = std::stoi(value);
    else if (key == "pwgd_delta") pwgd_delta = std::stod(value);
    else if (key == "unfolded_layers") unfolded_layers = std::stoi(value);
    else if (key == "unfolded_epochs") unfolded_epochs = std::stoi(value);
    else if (key == "unfolded_lr") unfolded_lr = std::stod(value);
    else if (key == "unfolded_mu0") unfolded_mu0 = std::stod(value);
    else if (key == "fried_stage1_epochs") fried_stage1_epochs = std::stoi(value);
    else if (key == "fried_stage2_epochs") fried_stage2_epochs = std::stoi(value);
    else if (key == "fried_stage3_epochs") fried_stage3_epochs = std::stoi(value);
    else if (key == "fried_gamma") fried_gamma = std::stod(value);
    else if (key == "decoder_delta") decoder_delta = std::stod(value);
    else if (key == "kernel_known") kernel_known = (value == "true" || value == "1");
    else if (key == "finetune_steps") finetune_steps = std::stoi(value);
    else if (key == "finetune_lr") finetune_lr = std::stod(value);
    else if (key == "batch_size") batch_size = std::stoi(value);
    else if (key == "threads") threads = std::stoi(value);
    else if (key == "output_dir") output_dir = value;
    else if (key == "calcium_duration") calcium_duration = std::stod(value);
    else if (key == "calcium_test_duration") calcium_test_duration = std::stod(value);
    else if (key == "calcium_spike_rate") calcium_spike_rate = std::stod(value);
    else if (key == "calcium_noise") calcium_noise = std::stod(value);
    else if (key == "calcium_threshold") calcium_threshold = std::stod(value);
    else if (key == "calcium_epochs") calcium_epochs = std::stoi(value);
    else if (key == "calcium_max_windows") calcium_max_windows = std::stoi(value);
    else if (key == "short_windows") {
      window_config.short_lengths.clear();
      for (double v : parse_list(value)) window_config.short_lengths.push_back(int(v));
    } else if (key == "long_windows") {
      window_config.long_lengths.clear();
      for (double v : parse_list(value)) window_config.long_lengths.push_back(int(v));
    } else if (key == "k_long") window_config.k_long = std::stoi(value);
    else throw ConfigError("config: unknown key '" + key + "'");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("config: bad value for key '" + key + "': " + value);
  }
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream os;
  os << "method=" << method << ";kernel=" << kernel << ";espline_order=" << espline_order
     << ";espline_scale=" << csv::format_double(espline_scale) << ";N=" << sample_count
     << ";K=" << dirac_count << ";tau=" << csv::format_double(period)
     << ";psnr=" << list_to_string(psnr_db) << ";dt0=" << list_to_string(dt0)
     << ";J=" << realizations << ";training_size=" << training_size << ";seed=" << seed
     << ";cadzow=" << cadzow_iterations << ";pwgd_delta=" << csv::format_double(pwgd_delta)
     << ";unfolded=" << unfolded_layers << "," << unfolded_epochs << ","
     << csv::format_double(unfolded_lr) << "," << csv::format_double(unfolded_mu0)
     << ";fried=" << fried_stage1_epochs << "," << fried_stage2_epochs << ","
     << fried_stage3_epochs << "," << csv::format_double(fried_gamma) << ","
     << csv::format_double(decoder_delta) << "," << (kernel_known ? 1 : 0)
     << ";finetune=" << finetune_steps << "," << csv::format_double(finetune_lr)
     << ";batch=" << batch_size << ";calcium=" << csv::format_double(calcium_duration) << ","
     << csv::format_double(calcium_test_duration) << "," << csv::format_double(calcium_spike_rate)
     << "," << csv::format_double(calcium_noise) << "," << csv::format_double(calcium_threshold)
     << "," << calcium_epochs << "," << calcium_max_windows;
  os << ";short=";
  for (int w : window_config.short_lengths) os << w << ",";
  os << ";long=";
  for (int w : window_config.long_lengths) os << w << ",";
  os << ";k_long=" << window_config.k_long;
  return os.str();
}

std::uint64_t ExperimentConfig::config_hash() const { return fnv1a64(canonical()); }

Pipeline make_pipeline(const ExperimentConfig& cfg) {
  Pipeline pipe;
  pipe.config = SamplingConfig(cfg.sample_count, cfg.period, true);
  if (cfg.kernel == "emoms") {
    const int P = cfg.sample_count - 1;
    pipe.kernel = Kernel::emoms(P);
    pipe.order = P;
    const double omega0 = -P * M_PI / (P + 1);
    const double lambda = 2.0 * M_PI / (P + 1);
    pipe.coeffs = exp_repro_coeffs(pipe.kernel, P, omega0, lambda, cfg.sample_count,
                                   pipe.config.first_index());
  } else if (cfg.kernel == "espline") {
    const int P = cfg.espline_order;
    const double lambda = 2.0 * M_PI / (cfg.espline_scale * (P + 1));
    const double omega0 = -P * M_PI / (cfg.espline_scale * (P + 1));
    std::vector<double> omegas;
    for (int m = 0; m <= P; ++m) omegas.push_back(omega0 + m * lambda);
    pipe.kernel = Kernel::espline(omegas);
    pipe.order = P;
    pipe.coeffs = exp_repro_coeffs(pipe.kernel, P, omega0, lambda, cfg.sample_count,
                                   pipe.config.first_index());
  } else {
    throw ConfigError("make_pipeline: unknown kernel '" + cfg.kernel + "'");
  }
  pipe.split = (pipe.order + 1) / 2;  // M = ceil(P/2)
  return pipe;
}

DiracStream random_stream(const ExperimentConfig& cfg, RngStream& rng, bool equal_amplitudes,
                          double dt0) {
  const int K = cfg.dirac_count;
  std::vector<double> t(K), a(K);
  if (K == 2 && dt0 > 0.0) {
    // heatmap protocol: first Dirac fixed, separation swept
    t[0] = 0.1;
    t[1] = 0.1 + dt0;
  } else {
    for (auto& x : t) x = rng.uniform(-cfg.period / 2, cfg.period / 2);
  }
  if (equal_amplitudes) {
    const double amp = rng.uniform(0.5, 10.0);
    for (auto& x : a) x = amp;
  } else {
    for (auto& x : a) x = rng.uniform(0.5, 10.0);
  }
  return DiracStream(cfg.period, std::move(t), std::move(a));
}

ReconstructionResult reconstruct_classical(const Pipeline& pipe, const SampleSet& noisy, int K,
                                           double delta1, double delta2, int iterations) {
  const MomentSequence seq = moments(noisy, pipe.coeffs);
  const Eigen::MatrixXcd toeplitz = build_toeplitz(seq, pipe.split);
  PwgdOptions opt;
  opt.delta1 = delta1;
  opt.delta2 = delta2;
  opt.iterations = iterations;
  const Eigen::MatrixXcd denoised = pwgd(toeplitz, K, opt);
  ReconstructionResult result;
  result.method = (delta1 == 1.0 && delta2 == 1.0) ? "prony-cadzow" : "prony-pwgd";
  result.locations = prony_locations(denoised, pipe.split, K, seq.lambda, seq.omega0,
                                     seq.sampling_period, noisy.config.period);
  auto fit = amplitudes_ls(result.locations, noisy, pipe.kernel);
  result.amplitudes = std::move(fit.amplitudes);
  result.degenerate_design = fit.degenerate;
  return result;
}

// ---------------------------------------------------------------------------
// model store

std::filesystem::path cache_path(const ExperimentConfig& cfg, const std::string& tag,
                                 double psnr_db) {
  const std::string key = tag + "|" + csv::format_double(psnr_db) + "|kernel=" + cfg.kernel + "|" +
                          std::to_string(cfg.espline_order) + "," +
                          csv::format_double(cfg.espline_scale) + "|N=" +
                          std::to_string(cfg.sample_count) + "|K=" + std::to_string(cfg.dirac_count) +
                          "|train=" + std::to_string(cfg.training_size) + "|seed=" +
                          std::to_string(cfg.seed) + "|unfolded=" + std::to_string(cfg.unfolded_layers) +
                          "," + std::to_string(cfg.unfolded_epochs) + "," +
                          csv::format_double(cfg.unfolded_lr) + "," + csv::format_double(cfg.unfolded_mu0) +
                          "|fried=" + std::to_string(cfg.fried_stage1_epochs) + "," +
                          std::to_string(cfg.fried_stage2_epochs) + "," +
                          std::to_string(cfg.fried_stage3_epochs) + "," +
                          csv::format_double(cfg.fried_gamma) + "," +
                          csv::format_double(cfg.decoder_delta) + "|batch=" +
                          std::to_string(cfg.batch_size);
  char hex[24];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(fnv1a64(key)));
  std::filesystem::create_directories(cfg.output_dir / "cache");
  return cfg.output_dir / "cache" / (tag + "-" + hex + ".ckpt");
}

namespace {

// training data for one PSNR level
struct FriGeneration {
  FriedDataset fried;
  std::vector<UnfoldedExample> unfolded;
};

FriGeneration generate_training_data(const ExperimentConfig& cfg, const Pipeline& pipe,
                                     double psnr_db, bool want_unfolded, bool want_fried) {
  FriGeneration gen;
  const int n = cfg.training_size;
  const int N = cfg.sample_count;
  const int K = cfg.dirac_count;
  if (want_fried) {
    gen.fried.noisy.resize(n, N);
    gen.fried.clean.resize(n, N);
    gen.fried.locations.resize(n, K);
    gen.fried.amplitudes.resize(n, K);
  }
  for (int i = 0; i < n; ++i) {
    RngStream rng = RngStream::substream(cfg.seed, 0xD0000000ull + std::uint64_t(i));
    const DiracStream stream = random_stream(cfg, rng, false, -1.0);
    const SampleSet clean = synthesize(stream, pipe.kernel, pipe.config);
    NoiseSpec noise{psnr_db, stream.peak_amplitude()};
    const SampleSet noisy = add_noise(clean, noise, rng);
    if (want_fried) {
      for (int c = 0; c < N; ++c) {
        gen.fried.noisy(i, c) = noisy.values[c];
        gen.fried.clean(i, c) = clean.values[c];
      }
      for (int k = 0; k < K; ++k) {
        gen.fried.locations(i, k) = stream.locations[k];
        gen.fried.amplitudes(i, k) = stream.amplitudes[k];
      }
    }
    if (want_unfolded) {
      const MomentSequence seq = moments(noisy, pipe.coeffs);
      UnfoldedExample ex;
      ex.noisy = build_toeplitz(seq, pipe.split);
      ex.filter = true_annihilating_filter(stream, seq.lambda, seq.sampling_period);
      gen.unfolded.push_back(std::move(ex));
    }
  }
  return gen;
}

}  // namespace

UnfoldedNetwork train_or_load_unfolded(const ExperimentConfig& cfg, const Pipeline& pipe,
                                       double psnr_db, bool bypass_cache) {
  UnfoldedNetwork net = init_unfolded(pipe.order, pipe.split, cfg.dirac_count,
                                      cfg.unfolded_layers, 0.9999, 0.9999, cfg.unfolded_mu0);
  const auto path = cache_path(cfg, "unfolded", psnr_db);
  if (!bypass_cache && std::filesystem::exists(path)) {
    auto tensors = nn::load_checkpoint(path);
    auto named = net.named_parameters();
    bool ok = tensors.size() == named.size();
    if (ok)
      for (std::size_t i = 0; i < named.size(); ++i)
        ok = ok && tensors[i].first == named[i].first &&
             tensors[i].second.size() == named[i].second.size();
    if (ok) {
      for (std::size_t i = 0; i < named.size(); ++i)
        named[i].second.values() = tensors[i].second.values();
      return net;
    }
    std::cerr << "[cache] stale unfolded checkpoint, retraining: " << path << "\n";
  }
  auto data = generate_training_data(cfg, pipe, psnr_db, true, false);
  UnfoldedTrainConfig tc;
  tc.epochs = cfg.unfolded_epochs;
  tc.learning_rate = cfg.unfolded_lr;
  tc.batch_size = cfg.batch_size;
  tc.seed = cfg.seed;
  tc.log_csv = cfg.output_dir / ("unfolded_loss_" + csv::format_double(psnr_db) + "db.csv");
  std::filesystem::create_directories(cfg.output_dir);
  train_unfolded(net, data.unfolded, tc);
  nn::save_checkpoint(path, net.named_parameters());
  return net;
}

void train_or_load_friednet(const ExperimentConfig& cfg, const Pipeline& pipe, double psnr_db,
                            bool encoder_only, EncoderParams& enc, DecoderParams& dec,
                            bool bypass_cache) {
  RngStream init_rng = RngStream::substream(cfg.seed, 0xE0000000ull);
  enc = EncoderParams::init(cfg.sample_count, cfg.dirac_count, init_rng);
  const double support =
      cfg.kernel_known ? pipe.kernel.support().length() : double(cfg.sample_count);
  if (cfg.kernel_known) {
    dec = DecoderParams::fixed_from_kernel(pipe.kernel, cfg.decoder_delta, pipe.config);
  } else {
    dec = DecoderParams::random_init(support, cfg.decoder_delta, pipe.config, init_rng);
  }

  const std::string tag = encoder_only ? "fried-enc" : (cfg.kernel_known ? "fried-known" : "fried-unknown");
  const auto path = cache_path(cfg, tag, psnr_db);
  if (!bypass_cache && std::filesystem::exists(path)) {
    try {
      if (load_friednet(path, enc, cfg.kernel_known ? nullptr : &dec)) return;
    } catch (const ConfigError&) {
      std::cerr << "[cache] stale friednet checkpoint, retraining: " << path << "\n";
    }
  }

  auto data = generate_training_data(cfg, pipe, psnr_db, false, true);
  FriedTrainConfig tc;
  tc.gamma = cfg.fried_gamma;
  tc.epochs_stage1 = cfg.fried_stage1_epochs;
  tc.epochs_stage2 = encoder_only ? 0 : cfg.fried_stage2_epochs;
  tc.epochs_stage3 = cfg.fried_stage3_epochs;
  tc.batch_size = cfg.batch_size;
  tc.seed = cfg.seed;
  tc.log_csv = cfg.output_dir / (tag + "_loss_" + csv::format_double(psnr_db) + "db.csv");
  std::filesystem::create_directories(cfg.output_dir);

  if (encoder_only) {
    train_encoder_only(enc, data.fried, tc);
  } else if (cfg.kernel_known) {
    train_known_kernel(enc, dec, data.fried, tc);
  } else {
    FriedDataset blind;
    blind.noisy = data.fried.noisy;
    blind.locations = data.fried.locations;
    train_unknown_kernel(enc, dec, blind, tc);
  }
  save_friednet(path, enc, cfg.kernel_known ? nullptr : &dec);
}

// ---------------------------------------------------------------------------

ExperimentArtifacts run_experiment(const ExperimentConfig& cfg) {
  if (!cfg.seed_set) throw ConfigError("run_experiment: seed is mandatory");
  const Pipeline pipe = make_pipeline(cfg);
  const int K = cfg.dirac_count;
  std::filesystem::create_directories(cfg.output_dir);

  const bool needs_unfolded = cfg.method == "unfolded";
  const bool needs_fried = cfg.method.rfind("friednet", 0) == 0;
  const bool encoder_only = cfg.method == "friednet-encoder";

  std::map<double, UnfoldedNetwork> unfolded_nets;
  std::map<double, std::pair<EncoderParams, DecoderParams>> fried_nets;
  for (double psnr : cfg.psnr_db) {
    if (needs_unfolded) unfolded_nets.emplace(psnr, train_or_load_unfolded(cfg, pipe, psnr));
    if (needs_fried) {
      EncoderParams enc;
      DecoderParams dec;
      train_or_load_friednet(cfg, pipe, psnr, encoder_only, enc, dec);
      fried_nets.emplace(psnr, std::make_pair(std::move(enc), std::move(dec)));
    }
  }

  ExperimentArtifacts artifacts;
  std::vector<std::vector<double>> grid_rows;
  int cell_index = 0;
  for (double psnr : cfg.psnr_db) {
    std::vector<double> grid_row = {psnr};
    for (double dt0 : cfg.dt0) {
      const auto t_start = std::chrono::steady_clock::now();
      const int J = cfg.realizations;
      std::vector<std::vector<double>> per_j_loc(J);
      std::vector<int> per_j_miss(J, 0), per_j_false(J, 0);
      std::vector<DiracStream> truths(J);

      const std::uint64_t cell_tag = (std::uint64_t(cell_index) << 32);
      parallel_for(J, cfg.threads, [&](int j) {
        RngStream rng = RngStream::substream(cfg.seed, cell_tag | std::uint64_t(j));
        const DiracStream truth = random_stream(cfg, rng, true, dt0);
        const SampleSet clean = synthesize(truth, pipe.kernel, pipe.config);
        NoiseSpec noise{psnr, truth.peak_amplitude()};
        const SampleSet noisy = add_noise(clean, noise, rng);

        ReconstructionResult rec;
        try {
          if (cfg.method == "prony-cadzow") {
            rec = reconstruct_classical(pipe, noisy, K, 1.0, 1.0, cfg.cadzow_iterations);
          } else if (cfg.method == "prony-pwgd") {
            rec = reconstruct_classical(pipe, noisy, K, cfg.pwgd_delta, cfg.pwgd_delta,
                                        cfg.cadzow_iterations);
          } else if (cfg.method == "unfolded") {
            rec = reconstruct_unfolded(unfolded_nets.at(psnr), noisy, pipe.coeffs, pipe.kernel);
          } else if (needs_fried) {
            auto& [enc, dec] = fried_nets.at(psnr);
            Eigen::MatrixXd x(1, cfg.sample_count);
            for (int c = 0; c < cfg.sample_count; ++c) x(0, c) = noisy.values[c];
            const Eigen::MatrixXd t_hat = encoder_infer(enc, x);
            rec.method = cfg.method;
            for (int k = 0; k < K; ++k) rec.locations.push_back(t_hat(0, k));
            if (cfg.method == "friednet-finetune")
              rec.locations = finetune_datum(rec.locations, dec, noisy.values, cfg.finetune_steps,
                                             cfg.finetune_lr);
            rec.amplitudes = decoder_amplitudes_ls(dec, rec.locations, noisy.values);
          } else {
            throw ConfigError("run_experiment: unknown method '" + cfg.method + "'");
          }
        } catch (const NumericalError&) {
          rec.locations.clear();  // realization produced no usable estimate
        }
        // clamp network outputs into the period for alignment
        const Alignment alignment = align_estimates(rec, truth);
        const ReconstructionResult aligned = apply_alignment(rec, alignment, truth);
        per_j_loc[j] = aligned.locations;
        per_j_miss[j] = alignment.miss_count;
        per_j_false[j] = static_cast<int>(alignment.spurious.size());
        truths[j] = truth;
      });

      CellResult cell;
      cell.psnr_db = psnr;
      cell.dt0 = dt0;
      std::vector<double> sd_k(K, 0.0);
      std::vector<long> cnt_k(K, 0);
      for (int j = 0; j < J; ++j) {
        cell.misses += per_j_miss[j];
        cell.falses += per_j_false[j];
        for (int k = 0; k < K; ++k) {
          const double est = per_j_loc[j][k];
          if (std::isnan(est)) continue;
          const double err = est - truths[j].locations[k];
          sd_k[k] += err * err;
          ++cnt_k[k];
        }
      }
      std::vector<double> sds;
      for (int k = 0; k < K; ++k)
        if (cnt_k[k] > 0) sds.push_back(std::sqrt(sd_k[k] / double(cnt_k[k])));
      if (sds.empty()) sds.push_back(std::numeric_limits<double>::quiet_NaN());
      std::sort(sds.begin(), sds.end());
      cell.sd_mean = std::accumulate(sds.begin(), sds.end(), 0.0) / double(sds.size());
      cell.sd_median = (sds.size() % 2 == 1) ? sds[sds.size() / 2]
                                             : 0.5 * (sds[sds.size() / 2 - 1] + sds[sds.size() / 2]);
      cell.runtime_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
      artifacts.cells.push_back(cell);
      grid_row.push_back(cell.sd_mean);
      ++cell_index;
    }
    grid_rows.push_back(grid_row);
  }

  // grid CSV: rows PSNR, cols dt0
  std::string header = "psnr_db";
  for (double dt0 : cfg.dt0) header += ",dt0_" + csv::format_double(dt0);
  artifacts.grid_csv = cfg.output_dir / (cfg.method + "_sd_grid.csv");
  csv::write_table(artifacts.grid_csv, header, grid_rows);

  json summary;
  char hex[24];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(cfg.config_hash()));
  summary["config_hash"] = hex;
  summary["cells"] = json::array();
  for (const auto& cell : artifacts.cells) {
    json c;
    c["psnr"] = cell.psnr_db;
    c["dt0"] = cell.dt0;
    c["sd_mean"] = cell.sd_mean;
    c["sd_median"] = cell.sd_median;
    c["misses"] = cell.misses;
    c["falses"] = cell.falses;
    summary["cells"].push_back(c);
  }
  artifacts.summary_json = cfg.output_dir / (cfg.method + "_summary.json");
  std::ofstream(artifacts.summary_json) << summary.dump(2) << "\n";

  for (const auto& cell : artifacts.cells)
    std::cerr << "[cell] psnr=" << cell.psnr_db << " dt0=" << cell.dt0
              << " sd_mean=" << cell.sd_mean << " sd_median=" << cell.sd_median
              << " misses=" << cell.misses << " falses=" << cell.falses << " ("
              << cell.runtime_s << " s)\n";
  return artifacts;
}

std::filesystem::path breakdown_map(const ExperimentConfig& cfg, const std::vector<double>& grid) {
  const int P = cfg.sample_count - 1;
  const double lambda = 2.0 * M_PI / (P + 1);
  const double T = cfg.period / cfg.sample_count;
  std::vector<std::vector<double>> rows;
  for (double dt0 : grid) {
    double value = std::numeric_limits<double>::quiet_NaN();
    try {
      value = breakdown_psnr(P, lambda, dt0 / T);
    } catch (const std::exception& e) {
      std::cerr << "[breakdown] dt0=" << dt0 << ": " << e.what() << "\n";
    }
    rows.push_back({dt0, value});
  }
  std::filesystem::create_directories(cfg.output_dir);
  const auto path = cfg.output_dir / "breakdown_curve.csv";
  csv::write_table(path, "dt0,psnr_db", rows);
  return path;
}

// ---------------------------------------------------------------------------
// calcium

CalciumArtifacts run_calcium(const ExperimentConfig& cfg) {
  if (!cfg.seed_set) throw ConfigError("run_calcium: seed is mandatory");
  std::filesystem::create_directories(cfg.output_dir);

  CalciumSynthConfig synth;
  synth.duration = cfg.calcium_duration;
  synth.spike_rate = cfg.calcium_spike_rate;
  synth.noise_sigma = cfg.calcium_noise;
  RngStream train_rng = RngStream::substream(cfg.seed, 0xCA1C1);
  auto [train_trace_raw, train_spikes] = synth_calcium(train_rng, synth);
  synth.duration = cfg.calcium_test_duration;
  RngStream test_rng = RngStream::substream(cfg.seed, 0xCA1C2);
  auto [test_trace_raw, test_spikes] = synth_calcium(test_rng, synth);

  const FluorescenceTrace train_trace = preprocess_trace(train_trace_raw);
  const FluorescenceTrace test_trace = preprocess_trace(test_trace_raw);

  struct Spec {
    int window;
    int k;
    bool full;  // full FRIED-Net (short) vs encoder-only (long)
  };
  std::vector<Spec> specs;
  for (int w : cfg.window_config.short_lengths) specs.push_back({w, 1, true});
  for (int w : cfg.window_config.long_lengths) specs.push_back({w, cfg.window_config.k_long, false});

  std::vector<CalciumModel> models(specs.size());
  parallel_for(static_cast<int>(specs.size()), cfg.threads, [&](int si) {
    const Spec spec = specs[si];
    CalciumModel model;
    model.window_length = spec.window;
    model.k_window = spec.k;

    WindowDataset windows =
        make_windows(train_trace, train_spikes, spec.window, spec.k, cfg.window_config.step, true);
    // deterministic subsample to the training budget
    const int total = static_cast<int>(windows.samples.rows());
    const int keep = std::min(total, cfg.calcium_max_windows);
    FriedDataset data;
    data.noisy.resize(keep, spec.window);
    data.locations.resize(keep, spec.k);
    for (int i = 0; i < keep; ++i) {
      const int src = static_cast<int>((std::int64_t(i) * total) / keep);
      data.noisy.row(i) = windows.samples.row(src);
      data.locations.row(i) = windows.labels.row(src);
    }

    const std::string tag = "calcium-w" + std::to_string(spec.window) + "-k" + std::to_string(spec.k);
    const auto path = cache_path(cfg, tag, 0.0);
    RngStream init_rng = RngStream::substream(cfg.seed, 0xF0000 + std::uint64_t(si));
    SamplingConfig window_cfg(spec.window, double(spec.window) / train_trace.sample_rate, false);
    model.encoder = EncoderParams::init(spec.window, spec.k, init_rng);
    if (spec.full)
      model.decoder =
          DecoderParams::random_init(double(spec.window), cfg.decoder_delta, window_cfg, init_rng);

    bool loaded = false;
    if (std::filesystem::exists(path)) {
      try {
        loaded = load_friednet(path, model.encoder, spec.full ? &*model.decoder : nullptr);
      } catch (const ConfigError&) {
        std::cerr << "[cache] stale calcium checkpoint, retraining: " << path << "\n";
      }
    }
    if (!loaded) {
      FriedTrainConfig tc;
      tc.gamma = 100.0;
      tc.epochs_stage1 = cfg.calcium_epochs;
      tc.epochs_stage2 = std::max(1, cfg.calcium_epochs / 2);
      tc.epochs_stage3 = std::max(1, cfg.calcium_epochs / 2);
      tc.batch_size = cfg.batch_size;
      tc.seed = cfg.seed + std::uint64_t(si);
      if (spec.full) {
        train_unknown_kernel(model.encoder, *model.decoder, data, tc);
      } else {
        train_encoder_only(model.encoder, data, tc);
      }
      save_friednet(path, model.encoder, spec.full ? &*model.decoder : nullptr);
    }
    models[si] = std::move(model);
  });

  // every histogram peak is a candidate; the ROC sweeps the threshold and the
  // reported detections use the configured operating point
  DetectionResult detection =
      double_consistency_detect(models, test_trace, cfg.window_config.step, 0.0);

  CalciumArtifacts artifacts;
  artifacts.detections_csv = cfg.output_dir / "detections.csv";
  std::vector<Detection> reported;
  for (const auto& d : detection.detections)
    if (d.probability >= cfg.calcium_threshold) reported.push_back(d);
  write_detections_csv(artifacts.detections_csv, reported);

  artifacts.histogram_csv = cfg.output_dir / "histogram.csv";
  std::vector<std::vector<double>> hist_rows;
  for (std::size_t b = 0; b < detection.histogram.probability.size(); ++b)
    hist_rows.push_back({(b + 0.5) * detection.histogram.bin_width,
                         detection.histogram.probability[b]});
  csv::write_table(artifacts.histogram_csv, "time,probability", hist_rows);

  const double T_a = cfg.window_config.acceptance_factor / test_trace.sample_rate;
  artifacts.roc = roc_eval(detection.detections, test_spikes, T_a, test_trace.duration(),
                           test_trace.sample_rate);
  artifacts.roc_csv = cfg.output_dir / "roc.csv";
  write_roc_csv(artifacts.roc_csv, artifacts.roc);
  return artifacts;
}

}  // namespace fri
