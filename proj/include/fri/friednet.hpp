#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "fri/nn/adam.hpp"
#include "fri/nn/ops.hpp"
#include "fri/rng.hpp"
#include "fri/signal.hpp"

namespace fri {

// 3 conv layers (100 filters of size 3) + FC 100, 100, K; ReLU between
// consecutive layers, linear output
struct EncoderParams {
  int input_size = 0;
  int output_size = 0;
  std::vector<nn::Tensor> conv_w, conv_b;  // (100, cin, 3), (100)
  std::vector<nn::Tensor> fc_w, fc_b;      // (out, in), (out)

  static EncoderParams init(int N, int K, RngStream& rng);
  std::vector<nn::Tensor> parameters();
  std::vector<std::pair<std::string, nn::Tensor>> named_parameters();
  void set_trainable(bool trainable);
};

// ReLU decoder realising y[n] = sum_k a_k sum_i d_i relu(t_k/T - n - i*delta)
struct DecoderParams {
  nn::Tensor d;        // (I)
  double delta = 1.0 / 64.0;
  double sampling_period = 0.0;
  int first_index = 0;
  int sample_count = 0;
  bool learnable = false;

  // fixed mode: coefficients from the known kernel (Eq.-(14) increments)
  static DecoderParams fixed_from_kernel(const Kernel& kernel, double delta,
                                         const SamplingConfig& config);
  // learnable mode: d ~ U(-0.01, 0.01), support = window length in sampling periods
  static DecoderParams random_init(double support_length, double delta,
                                 const SamplingConfig& config, RngStream& rng);

  Kernel kernel() const;  // piecewise-linear kernel from current coefficients
  int segment_count() const { return static_cast<int>(d.size()); }

  // peak normalization: divide d by the extremum of phi_Delta with the larger
  // magnitude so the peak value is +1; idempotent
  void normalize_peak();
};

nn::Tensor encoder_forward(nn::Tape& tape, EncoderParams& enc, const nn::Tensor& x);  // (B,N)->(B,K)
nn::Tensor decoder_forward(nn::Tape& tape, const DecoderParams& dec, const nn::Tensor& locations,
                           const nn::Tensor& amplitudes);  // (B,K)->(B,N)

// sum_n (yhat - y)^2 + gamma * sum_k (that - t)^2
nn::Tensor friednet_loss(nn::Tape& tape, const nn::Tensor& y_hat, const nn::Tensor& y_target,
                         const nn::Tensor& t_hat, const nn::Tensor& t_true, double gamma);

// rows are examples
struct FriedDataset {
  Eigen::MatrixXd noisy;       // (n, N)
  Eigen::MatrixXd clean;       // (n, N); empty in unknown-kernel mode
  Eigen::MatrixXd locations;   // (n, K)
  Eigen::MatrixXd amplitudes;  // (n, K); empty in unknown-kernel mode
  int count() const { return static_cast<int>(noisy.rows()); }
};

struct FriedTrainConfig {
  double gamma = 1.0;
  double lr_encoder = 1e-4;
  double lr_decoder = 1e-5;
  int epochs_stage1 = 300;  // direct-inference warm start
  int epochs_stage2 = 150;
  int epochs_stage3 = 150;  // unknown-kernel joint stage
  int batch_size = 64;
  std::uint64_t seed = 0;
  std::filesystem::path log_csv;
};

// direct inference: encoder alone on the location loss (stage-1 of both
// strategies, and the whole training for long-window calcium models)
void train_encoder_only(EncoderParams& enc, const FriedDataset& data, const FriedTrainConfig& cfg);

// stage 1: encoder-only on the location loss; stage 2: joint loss, decoder
// frozen, targets are noiseless samples, amplitudes ground truth
void train_known_kernel(EncoderParams& enc, const DecoderParams& dec_fixed,
                        const FriedDataset& data, const FriedTrainConfig& cfg);

// stage 1: warm start; stage 2: decoder-only, encoder frozen; stage 3: joint.
// Targets are the noisy samples, amplitudes least-squares fitted against the
// current estimated kernel; d is peak-normalized after every epoch.
void train_unknown_kernel(EncoderParams& enc, DecoderParams& dec, const FriedDataset& data,
                          const FriedTrainConfig& cfg);

// encoder inference (no training state)
Eigen::MatrixXd encoder_infer(EncoderParams& enc, const Eigen::MatrixXd& samples);

// least-squares amplitude fit of the decoder kernel at given locations
std::vector<double> decoder_amplitudes_ls(const DecoderParams& dec,
                                          const std::vector<double>& locations,
                                          const std::vector<double>& samples);

// per-datum refinement: gradient descent of the sample error over t only,
// amplitudes refreshed by least squares each step; non-improving steps are
// rejected
std::vector<double> finetune_datum(const std::vector<double>& t_init, const DecoderParams& dec,
                                   const std::vector<double>& noisy_samples, int steps, double lr);

void save_friednet(const std::filesystem::path& path, EncoderParams& enc, DecoderParams* dec);
bool load_friednet(const std::filesystem::path& path, EncoderParams& enc, DecoderParams* dec);

}  // namespace fri
