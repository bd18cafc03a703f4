#pragma once

#include <filesystem>
#include <vector>

#include "fri/nn/adam.hpp"
#include "fri/nn/ops.hpp"
#include "fri/spectral.hpp"

namespace fri {

// One unfolded iteration: complex weight matrices replacing the PWGD mixing
// constants plus a learnable soft-threshold strength mu = sigmoid(mu_raw).
struct UnfoldedLayer {
  nn::Tensor w1, w2, w3, w4;  // (R, R, 2) with R = P - M + 1
  nn::Tensor mu_raw;          // scalar pre-activation
};

struct UnfoldedNetwork {
  std::vector<UnfoldedLayer> layers;
  int P = 0;
  int M = 0;
  int K = 0;

  std::vector<nn::Tensor> parameters();
  std::vector<std::pair<std::string, nn::Tensor>> named_parameters();
};

struct ZeroEigLossConfig {
  double alpha = 10.0;
  double beta = 0.005;
};

// W1 = (1-delta1) I, W2 = delta1 I, W3 = delta2 I, W4 = (1-delta2) I,
// mu_raw = logit(mu0); the untrained forward pass reproduces PWGD with
// soft thresholding exactly.
UnfoldedNetwork init_unfolded(int P, int M, int K, int layer_count = 5, double delta1 = 0.9999,
                              double delta2 = 0.9999, double mu0 = 0.25);

// noisy (R, C, 2) -> denoised Toeplitz (R, C, 2)
nn::Tensor unfolded_forward(nn::Tape& tape, const UnfoldedNetwork& net, const nn::Tensor& noisy);

// || S h ||^2 + alpha * exp(-beta * || S (I - h h^H) ||_F^2) on the matrix
// rebuilt at split K from the denoised output
nn::Tensor zero_eig_loss(nn::Tape& tape, const UnfoldedNetwork& net, const nn::Tensor& denoised,
                         const AnnihilatingFilter& h_true, const ZeroEigLossConfig& cfg);

struct UnfoldedExample {
  Eigen::MatrixXcd noisy;      // (P-M+1) x (M+1)
  AnnihilatingFilter filter;   // unit-normalized ground truth
};

struct UnfoldedTrainConfig {
  int epochs = 500;
  double learning_rate = 2e-4;
  int batch_size = 64;
  ZeroEigLossConfig loss;
  std::uint64_t seed = 0;
  std::filesystem::path log_csv;  // per-epoch mean loss when nonempty
};

// per-epoch mean losses returned for monitoring
std::vector<double> train_unfolded(UnfoldedNetwork& net, const std::vector<UnfoldedExample>& data,
                                   const UnfoldedTrainConfig& cfg);

// value-only forward (no tape) for evaluation
Eigen::MatrixXcd unfolded_denoise(const UnfoldedNetwork& net, const Eigen::MatrixXcd& noisy);

ReconstructionResult reconstruct_unfolded(const UnfoldedNetwork& net, const SampleSet& samples,
                                          const ExpReproCoeffs& coeffs, const Kernel& kernel);

nn::Tensor complex_matrix_tensor(const Eigen::MatrixXcd& m, bool requires_grad = false);
Eigen::MatrixXcd tensor_to_complex(const nn::Tensor& t);

}  // namespace fri
