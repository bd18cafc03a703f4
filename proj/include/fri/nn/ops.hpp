#pragma once

#include "fri/nn/tensor.hpp"

namespace fri::nn {

// Elementwise
Tensor add(Tape& tape, Tensor a, Tensor b);
Tensor sub(Tape& tape, Tensor a, Tensor b);
Tensor scale(Tape& tape, Tensor a, double c);
Tensor relu(Tape& tape, Tensor a);          // subgradient at 0 is 0
Tensor sigmoid(Tape& tape, Tensor a);
Tensor exp(Tape& tape, Tensor a);

// y = x W^T + b for x (B, in), W (out, in), b (out)
Tensor dense(Tape& tape, Tensor x, Tensor weight, Tensor bias);

// 1-D cross-correlation, stride 1, zero "same" padding:
// x (B, Cin, N), weight (Cout, Cin, ks), bias (Cout) -> (B, Cout, N)
Tensor conv1d(Tape& tape, Tensor x, Tensor weight, Tensor bias);

// data order preserved; backward is a passthrough
Tensor reshape(Tape& tape, Tensor x, std::vector<std::size_t> shape);

// complex tensors are (..., 2) real pairs
Tensor matmul_complex(Tape& tape, Tensor a, Tensor b);  // (m,k,2)x(k,n,2)

Tensor frobenius_sq(Tape& tape, Tensor x);                 // scalar sum of squares
Tensor squared_error(Tape& tape, Tensor a, Tensor b);  // scalar sum (a-b)^2

// Soft thresholding of singular values: sigma_i -> max(0, sigma_i - mu*sigma_{K+1}),
// complex input (rows, cols, 2); mu is a scalar tensor so the threshold strength
// is learnable. Backward uses the analytic SVD differential with pairs
// |sigma_i - sigma_j| < 1e-8 clamped (their rotation contribution zeroed).
Tensor svd_soft_threshold(Tape& tape, Tensor x, int K, Tensor mu);

// diagonal averaging onto the Toeplitz set, complex (rows, cols, 2)
Tensor toeplitz_project_op(Tape& tape, Tensor x);

// diagonal-read moments of a (P-M+1, M+1, 2) matrix rebuilt at split K:
// output (P-K+1, K+1, 2)
Tensor toeplitz_reshape_op(Tape& tape, Tensor x, int M, int K);

// Piecewise-linear ReLU decoder: y[b,n] = sum_k a[b,k] sum_i d[i] relu(t[b,k]/T - (n0+n) - i*delta)
// t (B,K), a (B,K), d (I) -> (B,N)
Tensor decoder_synth(Tape& tape, Tensor t, Tensor a, Tensor d, double T,
                     int n0, int N, double delta);

// central finite-difference check of d loss / d params; returns max relative error
double gradient_check(const std::function<Tensor(Tape&)>& build_loss,
                      const std::vector<Tensor>& params, double step = 1e-5);

}  // namespace fri::nn
