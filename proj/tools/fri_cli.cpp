#include <CLI11.hpp>
#include <iostream>

#include "fri/csv.hpp"
#include "fri/errors.hpp"
#include "fri/harness.hpp"

namespace {

fri::ExperimentConfig load_config(const std::string& config_path,
                                  const std::vector<std::string>& overrides) {
  fri::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = fri::ExperimentConfig::from_json_file(config_path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw fri::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

std::vector<double> log_grid(double lo, double hi, int count) {
  std::vector<double> out;
  for (int i = 0; i < count; ++i)
    out.push_back(std::pow(10.0, std::log10(lo) + (std::log10(hi) - std::log10(lo)) * i /
                                     std::max(1, count - 1)));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FRI reconstruction toolkit: classical subspace methods, an unfolded "
               "denoiser, FRIED-Net, a Monte Carlo harness and a spike-detection pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON config file (flat key-value)");
  app.add_option("--set", overrides, "override config entries, key=value")->take_all();

  auto* synth = app.add_subcommand("synth", "generate a stream and its (noisy) samples");
  double synth_psnr = std::numeric_limits<double>::infinity();
  std::string synth_out = "synth";
  synth->add_option("--psnr", synth_psnr, "PSNR in dB (default: noiseless)");
  synth->add_option("--prefix", synth_out, "output file prefix");

  auto* reconstruct = app.add_subcommand("reconstruct", "recover locations/amplitudes from samples");
  std::string rec_samples;
  reconstruct->add_option("--samples", rec_samples, "samples CSV (one value per line)")->required();

  auto* train = app.add_subcommand("train", "train the configured model per PSNR level");
  auto* montecarlo = app.add_subcommand("montecarlo", "run the (PSNR, dt0) Monte Carlo sweep");

  auto* breakdown = app.add_subcommand("breakdown-map", "emit the subspace-swap threshold curve");
  double bd_lo = 1e-3, bd_hi = std::pow(10.0, -0.5);
  int bd_count = 11;
  breakdown->add_option("--dt0-min", bd_lo);
  breakdown->add_option("--dt0-max", bd_hi);
  breakdown->add_option("--points", bd_count);

  auto* calcium = app.add_subcommand("calcium-detect", "train window models and detect spikes");

  auto* eval_roc = app.add_subcommand("eval-roc", "ROC from detections and ground-truth spikes");
  std::string roc_detections, roc_truth, roc_out = "roc.csv";
  double roc_ta = 2.0 / 60.0, roc_duration = 0.0, roc_rate = 60.0;
  eval_roc->add_option("--detections", roc_detections)->required();
  eval_roc->add_option("--truth", roc_truth)->required();
  eval_roc->add_option("--out", roc_out);
  eval_roc->add_option("--t-acceptance", roc_ta);
  eval_roc->add_option("--duration", roc_duration, "trace duration in seconds")->required();
  eval_roc->add_option("--rate", roc_rate, "sample rate in Hz");

  CLI11_PARSE(app, argc, argv);

  try {
    fri::ExperimentConfig cfg = load_config(config_path, overrides);

    if (*synth) {
      if (!cfg.seed_set) throw fri::ConfigError("synth: seed is mandatory");
      const fri::Pipeline pipe = fri::make_pipeline(cfg);
      fri::RngStream rng = fri::RngStream::substream(cfg.seed, 0x51);
      const fri::DiracStream stream = fri::random_stream(cfg, rng, false, -1.0);
      fri::SampleSet samples = fri::synthesize(stream, pipe.kernel, pipe.config);
      if (std::isfinite(synth_psnr)) {
        fri::NoiseSpec noise{synth_psnr, stream.peak_amplitude()};
        samples = fri::add_noise(samples, noise, rng);
      }
      std::filesystem::create_directories(cfg.output_dir);
      fri::write_stream_csv(cfg.output_dir / (synth_out + "_stream.csv"), stream);
      fri::write_samples_csv(cfg.output_dir / (synth_out + "_samples.csv"), samples);
      std::cout << "wrote " << (cfg.output_dir / (synth_out + "_stream.csv")).string() << " and "
                << (cfg.output_dir / (synth_out + "_samples.csv")).string() << "\n";
    } else if (*reconstruct) {
      const fri::Pipeline pipe = fri::make_pipeline(cfg);
      fri::SampleSet samples;
      samples.values = fri::csv::read_column(rec_samples);
      samples.config = pipe.config;
      if (static_cast<int>(samples.values.size()) != cfg.sample_count)
        throw fri::ConfigError("reconstruct: sample count does not match config N");
      fri::ReconstructionResult rec;
      if (cfg.method == "prony-cadzow" || cfg.method == "prony-pwgd") {
        const bool cadzow = cfg.method == "prony-cadzow";
        rec = fri::reconstruct_classical(pipe, samples, cfg.dirac_count,
                                         cadzow ? 1.0 : cfg.pwgd_delta,
                                         cadzow ? 1.0 : cfg.pwgd_delta, cfg.cadzow_iterations);
      } else if (cfg.method == "unfolded") {
        auto net = fri::train_or_load_unfolded(cfg, pipe, cfg.psnr_db.at(0));
        rec = fri::reconstruct_unfolded(net, samples, pipe.coeffs, pipe.kernel);
      } else if (cfg.method.rfind("friednet", 0) == 0) {
        fri::EncoderParams enc;
        fri::DecoderParams dec;
        fri::train_or_load_friednet(cfg, pipe, cfg.psnr_db.at(0),
                                    cfg.method == "friednet-encoder", enc, dec);
        Eigen::MatrixXd x(1, cfg.sample_count);
        for (int c = 0; c < cfg.sample_count; ++c) x(0, c) = samples.values[c];
        const Eigen::MatrixXd t_hat = fri::encoder_infer(enc, x);
        rec.method = cfg.method;
        for (int k = 0; k < cfg.dirac_count; ++k) rec.locations.push_back(t_hat(0, k));
        if (cfg.method == "friednet-finetune")
          rec.locations = fri::finetune_datum(rec.locations, dec, samples.values,
                                              cfg.finetune_steps, cfg.finetune_lr);
        rec.amplitudes = fri::decoder_amplitudes_ls(dec, rec.locations, samples.values);
      } else {
        throw fri::ConfigError("reconstruct: unknown method '" + cfg.method + "'");
      }
      for (std::size_t k = 0; k < rec.locations.size(); ++k)
        std::cout << fri::csv::format_double(rec.locations[k]) << ","
                  << fri::csv::format_double(rec.amplitudes[k]) << "\n";
    } else if (*train) {
      const fri::Pipeline pipe = fri::make_pipeline(cfg);
      for (double psnr : cfg.psnr_db) {
        if (cfg.method == "unfolded") {
          fri::train_or_load_unfolded(cfg, pipe, psnr);
        } else if (cfg.method.rfind("friednet", 0) == 0) {
          fri::EncoderParams enc;
          fri::DecoderParams dec;
          fri::train_or_load_friednet(cfg, pipe, psnr, cfg.method == "friednet-encoder", enc, dec);
        } else {
          throw fri::ConfigError("train: method '" + cfg.method + "' has no trainable model");
        }
        std::cout << "trained/cached model for PSNR " << psnr << " dB\n";
      }
    } else if (*montecarlo) {
      const auto artifacts = fri::run_experiment(cfg);
      std::cout << "grid: " << artifacts.grid_csv.string() << "\n"
                << "summary: " << artifacts.summary_json.string() << "\n";
    } else if (*breakdown) {
      const auto path = fri::breakdown_map(cfg, log_grid(bd_lo, bd_hi, bd_count));
      std::cout << "curve: " << path.string() << "\n";
    } else if (*calcium) {
      const auto artifacts = fri::run_calcium(cfg);
      std::cout << "detections: " << artifacts.detections_csv.string() << "\n"
                << "histogram: " << artifacts.histogram_csv.string() << "\n"
                << "roc: " << artifacts.roc_csv.string() << "\n";
    } else if (*eval_roc) {
      const auto detections = fri::read_detections_csv(roc_detections);
      const fri::SpikeTrain truth = fri::read_spikes_csv(roc_truth);
      const auto roc = fri::roc_eval(detections, truth, roc_ta, roc_duration, roc_rate);
      fri::write_roc_csv(roc_out, roc);
      std::cout << "roc: " << roc_out << "\n";
    }
  } catch (const fri::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const fri::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
