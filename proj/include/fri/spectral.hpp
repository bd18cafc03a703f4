#pragma once

#include <Eigen/Dense>

#include "fri/kernels.hpp"
#include "fri/signal.hpp"

namespace fri {

// s[m] = sum_n c_{m,n} y[n]; for a noiseless K-Dirac stream,
// s[m] = sum_k b_k u_k^m with u_k on the unit circle
struct MomentSequence {
  Eigen::VectorXcd s;
  double lambda = 0.0;
  double omega0 = 0.0;
  double sampling_period = 0.0;
  int order() const { return static_cast<int>(s.size()) - 1; }
};

struct AnnihilatingFilter {
  Eigen::VectorXcd h;  // length K+1, h[0] = 1 unless unit-normalized
};

MomentSequence moments(const SampleSet& samples, const ExpReproCoeffs& coeffs);

// (P-M+1) x (M+1) with entry(i,j) = s[M+i-j]
Eigen::MatrixXcd build_toeplitz(const MomentSequence& s, int M);

// moments re-read off a denoised matrix by diagonal averaging
Eigen::VectorXcd diagonal_moments(const Eigen::MatrixXcd& mat, int M);

Eigen::MatrixXcd rank_project(const Eigen::MatrixXcd& mat, int K);
Eigen::MatrixXcd toeplitz_project(const Eigen::MatrixXcd& mat);

// soft threshold sigma -> max(0, sigma - mu * sigma_{K+1}); value-only path
// shared with the differentiable layer
Eigen::MatrixXcd svd_soft_threshold_value(const Eigen::MatrixXcd& mat, int K, double mu);

// projected Wirtinger gradient descent; delta1 = delta2 = 1 is Cadzow
struct PwgdOptions {
  double delta1 = 1.0;
  double delta2 = 1.0;
  int iterations = 10;
  bool soft_threshold = false;  // replace rank projection by soft thresholding
  double mu = 0.25;             // only used when soft_threshold
};
Eigen::MatrixXcd pwgd(const Eigen::MatrixXcd& noisy, int K, const PwgdOptions& opt,
                      std::vector<Eigen::MatrixXcd>* iterates = nullptr);

// annihilating filter from ground-truth locations: polynomial with roots
// u_k = e^{j lambda t_k / T}, unit-normalized
AnnihilatingFilter true_annihilating_filter(const DiracStream& stream, double lambda, double T);

// Prony root recovery from a denoised near-square matrix (or raw moments with
// M = K): rebuilds the (P-K+1)x(K+1) matrix, takes the right singular vector
// of the smallest singular value, and maps the polynomial roots back to
// locations in [-tau/2, tau/2). Roots are not projected to the unit circle.
std::vector<double> prony_locations(const Eigen::MatrixXcd& denoised, int M, int K, double lambda,
                                    double omega0, double T, double tau);

std::vector<cplx> polynomial_roots(const Eigen::VectorXcd& coeffs);

// least-squares amplitudes given locations (synthesis matches `synthesize`,
// including periodic extension when configured)
struct AmplitudeFit {
  std::vector<double> amplitudes;
  bool degenerate = false;
};
AmplitudeFit amplitudes_ls(const std::vector<double>& locations, const SampleSet& samples,
                           const Kernel& kernel);

void write_moments_csv(const std::filesystem::path& path, const MomentSequence& m);

}  // namespace fri
