#include "fri/nn/ops.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <complex>

#include "fri/errors.hpp"

namespace fri::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatC =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;
using MapMatC = Eigen::Map<RowMatC>;
using MapConstMatC = Eigen::Map<const RowMatC>;
using cplx = std::complex<double>;

void check_same_shape(Tensor a, Tensor b, const char* op) {
  if (a.shape() != b.shape()) throw ConfigError(std::string(op) + ": shape mismatch");
}

bool is_complex(const Tensor& t) { return !t.shape().empty() && t.shape().back() == 2; }

}  // namespace

Tensor add(Tape& tape, Tensor a, Tensor b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  out.set_requires_grad(a.requires_grad() || b.requires_grad());
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = a.values()[i] + b.values()[i];
  tape.record(
      [a, b, out]() mutable {
        if (a.requires_grad())
          for (std::size_t i = 0; i < out.size(); ++i) a.grad()[i] += out.grad()[i];
        if (b.requires_grad())
          for (std::size_t i = 0; i < out.size(); ++i) b.grad()[i] += out.grad()[i];
      });
  return out;
}

Tensor sub(Tape& tape, Tensor a, Tensor b) {
  check_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  out.set_requires_grad(a.requires_grad() || b.requires_grad());
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = a.values()[i] - b.values()[i];
  tape.record(
      [a, b, out]() mutable {
        if (a.requires_grad())
          for (std::size_t i = 0; i < out.size(); ++i) a.grad()[i] += out.grad()[i];
        if (b.requires_grad())
          for (std::size_t i = 0; i < out.size(); ++i) b.grad()[i] -= out.grad()[i];
      });
  return out;
}

Tensor scale(Tape& tape, Tensor a, double c) {
  Tensor out = Tensor::zeros(a.shape());
  out.set_requires_grad(a.requires_grad());
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = c * a.values()[i];
  tape.record(
      [a, out, c]() mutable {
        if (a.requires_grad())
          for (std::size_t i = 0; i < out.size(); ++i) a.grad()[i] += c * out.grad()[i];
      });
  return out;
}

Tensor relu(Tape& tape, Tensor a) {
  Tensor out = Tensor::zeros(a.shape());
  out.set_requires_grad(a.requires_grad());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.values()[i] = a.values()[i] > 0.0 ? a.values()[i] : 0.0;
  tape.record(
      [a, out]() mutable {
        if (a.requires_grad())
          for (std::size_t i = 0; i < out.size(); ++i)
            if (a.values()[i] > 0.0) a.grad()[i] += out.grad()[i];
      });
  return out;
}

Tensor sigmoid(Tape& tape, Tensor a) {
  Tensor out = Tensor::zeros(a.shape());
  out.set_requires_grad(a.requires_grad());
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = 1.0 / (1.0 + std::exp(-a.values()[i]));
  tape.record(
      [a, out]() mutable {
        if (a.requires_grad())
          for (std::size_t i = 0; i < out.size(); ++i) {
            const double s = out.values()[i];
            a.grad()[i] += s * (1.0 - s) * out.grad()[i];
          }
      });
  return out;
}

Tensor exp(Tape& tape, Tensor a) {
  Tensor out = Tensor::zeros(a.shape());
  out.set_requires_grad(a.requires_grad());
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = std::exp(a.values()[i]);
  tape.record(
      [a, out]() mutable {
        if (a.requires_grad())
          for (std::size_t i = 0; i < out.size(); ++i) a.grad()[i] += out.values()[i] * out.grad()[i];
      });
  return out;
}

Tensor dense(Tape& tape, Tensor x, Tensor weight, Tensor bias) {
  if (x.shape().size() != 2 || weight.shape().size() != 2 || bias.shape().size() != 1)
    throw ConfigError("dense: expected x (B,in), W (out,in), b (out)");
  const auto B = x.shape()[0], in = x.shape()[1];
  const auto out_dim = weight.shape()[0];
  if (weight.shape()[1] != in || bias.shape()[0] != out_dim)
    throw ConfigError("dense: dimension mismatch");
  Tensor out = Tensor::zeros({B, out_dim});
  out.set_requires_grad(x.requires_grad() || weight.requires_grad() || bias.requires_grad());
  MapConstMat X(x.values().data(), B, in);
  MapConstMat W(weight.values().data(), out_dim, in);
  MapMat Y(out.values().data(), B, out_dim);
  Y.noalias() = X * W.transpose();
  for (std::size_t bi = 0; bi < B; ++bi)
    for (std::size_t o = 0; o < out_dim; ++o) out.values()[bi * out_dim + o] += bias.values()[o];
  tape.record(
      [x, weight, bias, out, B, in, out_dim]() mutable {
        MapConstMat X(x.values().data(), B, in);
        MapConstMat W(weight.values().data(), out_dim, in);
        MapConstMat dY(out.grad().data(), B, out_dim);
        if (x.requires_grad()) {
          MapMat dX(x.grad().data(), B, in);
          dX.noalias() += dY * W;
        }
        if (weight.requires_grad()) {
          MapMat dW(weight.grad().data(), out_dim, in);
          dW.noalias() += dY.transpose() * X;
        }
        if (bias.requires_grad())
          for (std::size_t bi = 0; bi < B; ++bi)
            for (std::size_t o = 0; o < out_dim; ++o)
              bias.grad()[o] += out.grad()[bi * out_dim + o];
      });
  return out;
}

Tensor conv1d(Tape& tape, Tensor x, Tensor weight, Tensor bias) {
  if (x.shape().size() != 3 || weight.shape().size() != 3 || bias.shape().size() != 1)
    throw ConfigError("conv1d: expected x (B,C,N), W (Cout,Cin,ks), b (Cout)");
  const auto B = x.shape()[0], cin = x.shape()[1], N = x.shape()[2];
  const auto cout = weight.shape()[0], ks = weight.shape()[2];
  if (weight.shape()[1] != cin || bias.shape()[0] != cout)
    throw ConfigError("conv1d: dimension mismatch");
  const long pad = static_cast<long>(ks / 2);

  Tensor out = Tensor::zeros({B, cout, N});
  out.set_requires_grad(x.requires_grad() || weight.requires_grad() || bias.requires_grad());

  // im2col: per batch, columns (cin*ks, N); y = W_mat * col
  Tensor cols = Tensor::zeros({B, cin * ks, N});
  for (std::size_t b = 0; b < B; ++b) {
    double* col = cols.values().data() + b * cin * ks * N;
    const double* xb = x.values().data() + b * cin * N;
    for (std::size_t c = 0; c < cin; ++c)
      for (std::size_t k = 0; k < ks; ++k)
        for (std::size_t n = 0; n < N; ++n) {
          const long src = static_cast<long>(n) + static_cast<long>(k) - pad;
          col[(c * ks + k) * N + n] =
              (src >= 0 && src < static_cast<long>(N)) ? xb[c * N + src] : 0.0;
        }
    MapConstMat W(weight.values().data(), cout, cin * ks);
    MapConstMat C(col, cin * ks, N);
    MapMat Y(out.values().data() + b * cout * N, cout, N);
    Y.noalias() = W * C;
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t n = 0; n < N; ++n) out.values()[(b * cout + o) * N + n] += bias.values()[o];
  }

  tape.record(
      [x, weight, bias, out, cols, B, cin, cout, N, ks, pad]() mutable {
        for (std::size_t b = 0; b < B; ++b) {
          MapConstMat dY(out.grad().data() + b * cout * N, cout, N);
          if (weight.requires_grad()) {
            MapConstMat C(cols.values().data() + b * cin * ks * N, cin * ks, N);
            MapMat dW(weight.grad().data(), cout, cin * ks);
            dW.noalias() += dY * C.transpose();
          }
          if (bias.requires_grad())
            for (std::size_t o = 0; o < cout; ++o)
              for (std::size_t n = 0; n < N; ++n) bias.grad()[o] += dY(o, n);
          if (x.requires_grad()) {
            MapConstMat W(weight.values().data(), cout, cin * ks);
            RowMat dC = W.transpose() * dY;  // (cin*ks, N)
            double* dxb = x.grad().data() + b * cin * N;
            for (std::size_t c = 0; c < cin; ++c)
              for (std::size_t k = 0; k < ks; ++k)
                for (std::size_t n = 0; n < N; ++n) {
                  const long src = static_cast<long>(n) + static_cast<long>(k) - pad;
                  if (src >= 0 && src < static_cast<long>(N))
                    dxb[c * N + src] += dC(c * ks + k, n);
                }
          }
        }
      });
  return out;
}

Tensor reshape(Tape& tape, Tensor x, std::vector<std::size_t> shape) {
  Tensor out = Tensor::from(x.values(), std::move(shape));
  if (out.size() != x.size()) throw ConfigError("reshape: element count mismatch");
  out.set_requires_grad(x.requires_grad());
  tape.record(
      [x, out]() mutable {
        if (x.requires_grad())
          for (std::size_t i = 0; i < x.size(); ++i) x.grad()[i] += out.grad()[i];
      });
  return out;
}

Tensor matmul_complex(Tape& tape, Tensor a, Tensor b) {
  if (a.shape().size() != 3 || b.shape().size() != 3 || !is_complex(a) || !is_complex(b))
    throw ConfigError("matmul_complex: expected (m,k,2) x (k,n,2)");
  const auto m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) throw ConfigError("matmul_complex: inner dimension mismatch");
  Tensor out = Tensor::zeros({m, n, 2});
  out.set_requires_grad(a.requires_grad() || b.requires_grad());
  MapConstMatC A(reinterpret_cast<const cplx*>(a.values().data()), m, k);
  MapConstMatC B(reinterpret_cast<const cplx*>(b.values().data()), k, n);
  MapMatC C(reinterpret_cast<cplx*>(out.values().data()), m, n);
  C.noalias() = A * B;
  tape.record(
      [a, b, out, m, k, n]() mutable {
        MapConstMatC A(reinterpret_cast<const cplx*>(a.values().data()), m, k);
        MapConstMatC B(reinterpret_cast<const cplx*>(b.values().data()), k, n);
        MapConstMatC dC(reinterpret_cast<const cplx*>(out.grad().data()), m, n);
        if (a.requires_grad()) {
          MapMatC dA(reinterpret_cast<cplx*>(a.grad().data()), m, k);
          dA.noalias() += dC * B.adjoint();
        }
        if (b.requires_grad()) {
          MapMatC dB(reinterpret_cast<cplx*>(b.grad().data()), k, n);
          dB.noalias() += A.adjoint() * dC;
        }
      });
  return out;
}

Tensor frobenius_sq(Tape& tape, Tensor x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v * v;
  Tensor out = Tensor::scalar(acc);
  out.set_requires_grad(x.requires_grad());
  tape.record(
      [x, out]() mutable {
        if (x.requires_grad()) {
          const double g = out.grad()[0];
          for (std::size_t i = 0; i < x.size(); ++i) x.grad()[i] += 2.0 * x.values()[i] * g;
        }
      });
  return out;
}

Tensor squared_error(Tape& tape, Tensor a, Tensor b) {
  check_same_shape(a, b, "squared_error");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    acc += d * d;
  }
  Tensor out = Tensor::scalar(acc);
  out.set_requires_grad(a.requires_grad() || b.requires_grad());
  tape.record(
      [a, b, out]() mutable {
        const double g = out.grad()[0];
        for (std::size_t i = 0; i < a.size(); ++i) {
          const double d = 2.0 * (a.values()[i] - b.values()[i]) * g;
          if (a.requires_grad()) a.grad()[i] += d;
          if (b.requires_grad()) b.grad()[i] -= d;
        }
      });
  return out;
}

// ---------------------------------------------------------------------------

Tensor svd_soft_threshold(Tape& tape, Tensor x, int K, Tensor mu) {
  if (x.shape().size() != 3 || !is_complex(x))
    throw ConfigError("svd_soft_threshold: expected complex (rows, cols, 2)");
  if (mu.size() != 1) throw ConfigError("svd_soft_threshold: mu must be scalar");
  const auto rows = x.shape()[0], cols = x.shape()[1];
  const bool transposed = rows < cols;  // work with m >= n
  Eigen::MatrixXcd X = MapConstMatC(reinterpret_cast<const cplx*>(x.values().data()), rows, cols);
  if (transposed) X = X.adjoint().eval();
  const int m = static_cast<int>(X.rows());
  const int n = static_cast<int>(X.cols());
  if (K + 1 > n) throw ConfigError("svd_soft_threshold: need K+1 <= min(rows, cols)");

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(X, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw NumericalError("svd_soft_threshold: SVD failed");
  const Eigen::MatrixXcd U = svd.matrixU();  // m x m
  const Eigen::MatrixXcd V = svd.matrixV();  // n x n
  const Eigen::VectorXd s = svd.singularValues();
  const double mu_val = mu.values()[0];
  const double tau = mu_val * s(K);
  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i) g(i) = std::max(0.0, s(i) - tau);

  Eigen::MatrixXcd Y = U.leftCols(n) * g.asDiagonal() * V.adjoint();
  if (transposed) Y = Y.adjoint().eval();
  Tensor out = Tensor::zeros({rows, cols, 2});
  out.set_requires_grad(x.requires_grad() || mu.requires_grad());
  MapMatC(reinterpret_cast<cplx*>(out.values().data()), rows, cols) = Y;

  tape.record(
      [x, mu, out, U, V, s, g, K, m, n, mu_val, tau, rows, cols, transposed]() mutable {
        Eigen::MatrixXcd W =
            MapConstMatC(reinterpret_cast<const cplx*>(out.grad().data()), rows, cols);
        if (transposed) W = W.adjoint().eval();
        const Eigen::MatrixXcd P = U.adjoint() * W * V;  // m x n
        Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(m, n);
        double sum_a_re_p = 0.0;
        for (int i = 0; i < n; ++i)
          if (s(i) > tau) sum_a_re_p += P(i, i).real();
        for (int i = 0; i < n; ++i) {
          double re = (s(i) > tau) ? P(i, i).real() : 0.0;
          double im = (s(i) > 1e-300) ? g(i) * P(i, i).imag() / s(i) : 0.0;
          C(i, i) = cplx(re, im);
        }
        C(K, K) += cplx(-mu_val * sum_a_re_p, 0.0);
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) {
            if (a == b) continue;
            if (std::abs(s(a) - s(b)) < 1e-8) continue;  // degenerate pair: contribution zeroed
            const double D = s(a) * s(a) - s(b) * s(b);
            C(a, b) += (P(a, b) * (g(a) * s(a) - g(b) * s(b)) +
                        std::conj(P(b, a)) * (g(a) * s(b) - g(b) * s(a))) /
                       D;
          }
        for (int j = n; j < m; ++j)
          for (int i = 0; i < n; ++i)
            if (s(i) > 1e-300) C(j, i) += g(i) * P(j, i) / s(i);
        Eigen::MatrixXcd Xbar = U * C * V.adjoint();
        if (transposed) Xbar = Xbar.adjoint().eval();
        if (x.requires_grad()) {
          MapMatC dX(reinterpret_cast<cplx*>(x.grad().data()), rows, cols);
          dX += Xbar;
        }
        if (mu.requires_grad()) mu.grad()[0] += -s(K) * sum_a_re_p;
      });
  return out;
}

Tensor toeplitz_project_op(Tape& tape, Tensor x) {
  if (x.shape().size() != 3 || !is_complex(x))
    throw ConfigError("toeplitz_project_op: expected complex (rows, cols, 2)");
  const auto rows = static_cast<int>(x.shape()[0]);
  const auto cols = static_cast<int>(x.shape()[1]);
  auto project = [rows, cols](const double* src, double* dst) {
    // averaging each diagonal; self-adjoint, so backward reuses the same map
    for (int d = -(cols - 1); d <= rows - 1; ++d) {
      double acc_re = 0.0, acc_im = 0.0;
      int count = 0;
      for (int i = std::max(0, d); i < rows && i - d < cols; ++i) {
        acc_re += src[(i * cols + (i - d)) * 2];
        acc_im += src[(i * cols + (i - d)) * 2 + 1];
        ++count;
      }
      const double mre = acc_re / count, mim = acc_im / count;
      for (int i = std::max(0, d); i < rows && i - d < cols; ++i) {
        dst[(i * cols + (i - d)) * 2] = mre;
        dst[(i * cols + (i - d)) * 2 + 1] = mim;
      }
    }
  };
  Tensor out = Tensor::zeros(x.shape());
  out.set_requires_grad(x.requires_grad());
  project(x.values().data(), out.values().data());
  tape.record(
      [x, out, project]() mutable {
        if (!x.requires_grad()) return;
        std::vector<double> tmp(out.grad().size());
        project(out.grad().data(), tmp.data());
        for (std::size_t i = 0; i < tmp.size(); ++i) x.grad()[i] += tmp[i];
      });
  return out;
}

Tensor toeplitz_reshape_op(Tape& tape, Tensor x, int M, int K) {
  if (x.shape().size() != 3 || !is_complex(x))
    throw ConfigError("toeplitz_reshape_op: expected complex (rows, cols, 2)");
  const int rows = static_cast<int>(x.shape()[0]);
  const int cols = static_cast<int>(x.shape()[1]);
  const int P = rows + cols - 2;
  if (M != cols - 1) throw ConfigError("toeplitz_reshape_op: M inconsistent with input shape");
  if (K < 1 || K > P) throw ConfigError("toeplitz_reshape_op: bad K");
  const int orows = P - K + 1, ocols = K + 1;

  // counts per moment index
  std::vector<int> count(P + 1, 0);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) ++count[M + i - j];

  Tensor out = Tensor::zeros({std::size_t(orows), std::size_t(ocols), 2});
  out.set_requires_grad(x.requires_grad());
  std::vector<double> sre(P + 1, 0.0), sim(P + 1, 0.0);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const int mm = M + i - j;
      sre[mm] += x.values()[(i * cols + j) * 2];
      sim[mm] += x.values()[(i * cols + j) * 2 + 1];
    }
  for (int mm = 0; mm <= P; ++mm) {
    sre[mm] /= count[mm];
    sim[mm] /= count[mm];
  }
  for (int i = 0; i < orows; ++i)
    for (int j = 0; j < ocols; ++j) {
      const int mm = K + i - j;
      out.values()[(i * ocols + j) * 2] = sre[mm];
      out.values()[(i * ocols + j) * 2 + 1] = sim[mm];
    }

  tape.record(
      [x, out, rows, cols, orows, ocols, M, K, P, count]() mutable {
        if (!x.requires_grad()) return;
        std::vector<double> gre(P + 1, 0.0), gim(P + 1, 0.0);
        for (int i = 0; i < orows; ++i)
          for (int j = 0; j < ocols; ++j) {
            const int mm = K + i - j;
            gre[mm] += out.grad()[(i * ocols + j) * 2];
            gim[mm] += out.grad()[(i * ocols + j) * 2 + 1];
          }
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < cols; ++j) {
            const int mm = M + i - j;
            x.grad()[(i * cols + j) * 2] += gre[mm] / count[mm];
            x.grad()[(i * cols + j) * 2 + 1] += gim[mm] / count[mm];
          }
      });
  return out;
}

Tensor decoder_synth(Tape& tape, Tensor t, Tensor a, Tensor d, double T,
                     int n0, int N, double delta) {
  if (t.shape().size() != 2 || a.shape() != t.shape() || d.shape().size() != 1)
    throw ConfigError("decoder_synth: expected t (B,K), a (B,K), d (I)");
  const auto B = t.shape()[0], K = t.shape()[1];
  const auto I = d.shape()[0];
  Tensor out = Tensor::zeros({B, std::size_t(N)});
  out.set_requires_grad(t.requires_grad() || a.requires_grad() || d.requires_grad());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t k = 0; k < K; ++k) {
      const double base = t.values()[b * K + k] / T;
      const double amp = a.values()[b * K + k];
      for (int n = 0; n < N; ++n) {
        const double arg = base - double(n0 + n);
        double acc = 0.0;
        for (std::size_t i = 0; i < I; ++i) {
          const double z = arg - delta * double(i);
          if (z <= 0.0) break;
          acc += d.values()[i] * z;
        }
        out.values()[b * N + n] += amp * acc;
      }
    }
  tape.record(
      [t, a, d, out, T, n0, N, delta, B, K, I]() mutable {
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t k = 0; k < K; ++k) {
            const double base = t.values()[b * K + k] / T;
            const double amp = a.values()[b * K + k];
            for (int n = 0; n < N; ++n) {
              const double g = out.grad()[b * N + n];
              if (g == 0.0) continue;
              const double arg = base - double(n0 + n);
              double slope = 0.0, value = 0.0;
              for (std::size_t i = 0; i < I; ++i) {
                const double z = arg - delta * double(i);
                if (z <= 0.0) break;
                slope += d.values()[i];
                value += d.values()[i] * z;
                if (d.requires_grad()) d.grad()[i] += g * amp * z;
              }
              if (t.requires_grad()) t.grad()[b * K + k] += g * amp * slope / T;
              if (a.requires_grad()) a.grad()[b * K + k] += g * value;
            }
          }
      });
  return out;
}

double gradient_check(const std::function<Tensor(Tape&)>& build_loss,
                      const std::vector<Tensor>& params, double step) {
  for (const auto& p : params) Tensor(p).zero_grad();
  Tape tape;
  Tensor loss = build_loss(tape);
  tape.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) analytic.push_back(p.grad());
  tape.reset();

  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double keep = p.values()[i];
      p.values()[i] = keep + step;
      Tape t1;
      const double fp = build_loss(t1).value();
      p.values()[i] = keep - step;
      Tape t2;
      const double fm = build_loss(t2).value();
      p.values()[i] = keep;
      const double fd = (fp - fm) / (2.0 * step);
      const double an = analytic[pi][i];
      const double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace fri::nn
