#include "fri/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "fri/csv.hpp"
#include "fri/errors.hpp"

namespace fri {

MomentSequence moments(const SampleSet& samples, const ExpReproCoeffs& coeffs) {
  const int N = static_cast<int>(samples.values.size());
  if (N != coeffs.sample_count()) throw ConfigError("moments: sample count mismatch");
  MomentSequence out;
  out.lambda = coeffs.lambda;
  out.omega0 = coeffs.omega0;
  out.sampling_period = samples.config.sampling_period();
  Eigen::Map<const Eigen::VectorXd> y(samples.values.data(), N);
  out.s = coeffs.c * y;
  return out;
}

Eigen::MatrixXcd build_toeplitz(const MomentSequence& seq, int M) {
  const int P = seq.order();
  if (M < 1 || M > P) throw ConfigError("build_toeplitz: require 1 <= M <= P");
  const int rows = P - M + 1;
  const int cols = M + 1;
  Eigen::MatrixXcd out(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out(i, j) = seq.s(M + i - j);
  return out;
}

Eigen::VectorXcd diagonal_moments(const Eigen::MatrixXcd& mat, int M) {
  const int rows = static_cast<int>(mat.rows());
  const int cols = static_cast<int>(mat.cols());
  const int P = rows + cols - 2;  // rows = P-M+1, cols = M+1
  Eigen::VectorXcd s(P + 1);
  for (int m = 0; m <= P; ++m) {
    cplx acc(0.0);
    int count = 0;
    for (int i = 0; i < rows; ++i) {
      const int j = M + i - m;
      if (j >= 0 && j < cols) {
        acc += mat(i, j);
        ++count;
      }
    }
    if (count == 0) throw ConfigError("diagonal_moments: matrix/M mismatch");
    s(m) = acc / double(count);
  }
  return s;
}

Eigen::MatrixXcd rank_project(const Eigen::MatrixXcd& mat, int K) {
  if (K > std::min(mat.rows(), mat.cols())) throw ConfigError("rank_project: K too large");
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("rank_project: SVD failed");
  Eigen::VectorXd sv = svd.singularValues();
  for (int i = K; i < sv.size(); ++i) sv(i) = 0.0;
  return svd.matrixU() * sv.asDiagonal() * svd.matrixV().adjoint();
}

Eigen::MatrixXcd toeplitz_project(const Eigen::MatrixXcd& mat) {
  const int rows = static_cast<int>(mat.rows());
  const int cols = static_cast<int>(mat.cols());
  Eigen::MatrixXcd out(rows, cols);
  for (int d = -(cols - 1); d <= rows - 1; ++d) {
    cplx acc(0.0);
    int count = 0;
    for (int i = std::max(0, d); i < rows && i - d < cols; ++i) {
      acc += mat(i, i - d);
      ++count;
    }
    const cplx mean = acc / double(count);
    for (int i = std::max(0, d); i < rows && i - d < cols; ++i) out(i, i - d) = mean;
  }
  return out;
}

Eigen::MatrixXcd svd_soft_threshold_value(const Eigen::MatrixXcd& mat, int K, double mu) {
  if (K + 1 > std::min(mat.rows(), mat.cols()))
    throw ConfigError("svd_soft_threshold: need K+1 <= min(rows, cols)");
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("svd_soft_threshold: SVD failed");
  Eigen::VectorXd sv = svd.singularValues();
  const double tau = mu * sv(K);
  for (int i = 0; i < sv.size(); ++i) sv(i) = std::max(0.0, sv(i) - tau);
  return svd.matrixU() * sv.asDiagonal() * svd.matrixV().adjoint();
}

Eigen::MatrixXcd pwgd(const Eigen::MatrixXcd& noisy, int K, const PwgdOptions& opt,
                      std::vector<Eigen::MatrixXcd>* iterates) {
  if (opt.delta1 <= 0.0 || opt.delta1 > 1.0 || opt.delta2 <= 0.0 || opt.delta2 > 1.0)
    throw ConfigError("pwgd: delta1, delta2 must lie in (0, 1]");
  if (opt.iterations < 1) throw ConfigError("pwgd: need at least one iteration");
  Eigen::MatrixXcd L = Eigen::MatrixXcd::Zero(noisy.rows(), noisy.cols());
  Eigen::MatrixXcd H = noisy;
  for (int l = 0; l < opt.iterations; ++l) {
    const Eigen::MatrixXcd pre = (1.0 - opt.delta1) * L + opt.delta1 * H;
    L = opt.soft_threshold ? svd_soft_threshold_value(pre, K, opt.mu) : rank_project(pre, K);
    H = toeplitz_project(opt.delta2 * L + (1.0 - opt.delta2) * H);
    if (iterates) iterates->push_back(H);
  }
  return H;
}

AnnihilatingFilter true_annihilating_filter(const DiracStream& stream, double lambda, double T) {
  const int K = stream.size();
  // h(x) = prod_k (x - u_k), coefficients in descending powers: h[0] = 1
  Eigen::VectorXcd h = Eigen::VectorXcd::Zero(K + 1);
  h(0) = 1.0;
  for (int k = 0; k < K; ++k) {
    const cplx u = std::polar(1.0, lambda * stream.locations[k] / T);
    for (int i = k + 1; i >= 1; --i) h(i) -= u * h(i - 1);
  }
  AnnihilatingFilter out;
  out.h = h / h.norm();
  return out;
}

std::vector<cplx> polynomial_roots(const Eigen::VectorXcd& coeffs) {
  // coeffs in descending powers; companion-matrix eigenvalues
  const int deg = static_cast<int>(coeffs.size()) - 1;
  if (deg < 1) return {};
  if (std::abs(coeffs(0)) < 1e-14 * coeffs.norm())
    throw NumericalError("polynomial_roots: leading coefficient vanishes");
  Eigen::MatrixXcd comp = Eigen::MatrixXcd::Zero(deg, deg);
  for (int i = 0; i < deg; ++i) comp(0, i) = -coeffs(i + 1) / coeffs(0);
  for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eig(comp, false);
  if (eig.info() != Eigen::Success) throw NumericalError("polynomial_roots: eigensolver failed");
  std::vector<cplx> roots(eig.eigenvalues().data(), eig.eigenvalues().data() + deg);
  return roots;
}

std::vector<double> prony_locations(const Eigen::MatrixXcd& denoised, int M, int K, double lambda,
                                    double omega0, double T, double tau) {
  (void)omega0;
  if (denoised.squaredNorm() == 0.0) throw NumericalError("prony_locations: zero matrix");
  const Eigen::VectorXcd s = diagonal_moments(denoised, M);
  const int P = static_cast<int>(s.size()) - 1;
  if (K < 1 || 2 * K > P) throw ConfigError("prony_locations: require 1 <= K <= P/2");
  // rows [s[m], s[m-1], ..., s[m-K]] for m = K..P
  Eigen::MatrixXcd S(P - K + 1, K + 1);
  for (int i = 0; i <= P - K; ++i)
    for (int j = 0; j <= K; ++j) S(i, j) = s(K + i - j);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(S, Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw NumericalError("prony_locations: SVD failed");
  Eigen::VectorXcd h = svd.matrixV().col(K);  // smallest singular value
  const auto roots = polynomial_roots(h);
  if (static_cast<int>(roots.size()) != K) throw NumericalError("prony_locations: missing roots");
  // reject (near-)coincident roots: the filter is degenerate
  for (std::size_t a = 0; a < roots.size(); ++a)
    for (std::size_t b = a + 1; b < roots.size(); ++b)
      if (std::abs(roots[a] - roots[b]) < 1e-12)
        throw NumericalError("prony_locations: degenerate roots");
  std::vector<double> locations;
  for (const auto& u : roots) {
    double t = T * std::arg(u) / lambda;
    while (t < -tau / 2) t += tau;
    while (t >= tau / 2) t -= tau;
    locations.push_back(t);
  }
  std::sort(locations.begin(), locations.end());
  return locations;
}

AmplitudeFit amplitudes_ls(const std::vector<double>& locations, const SampleSet& samples,
                           const Kernel& kernel) {
  const int N = static_cast<int>(samples.values.size());
  const int K = static_cast<int>(locations.size());
  const int n0 = samples.config.first_index();
  const double T = samples.config.sampling_period();
  const auto sup = kernel.support();
  Eigen::MatrixXd design(N, K);
  for (int k = 0; k < K; ++k) {
    const double base = locations[k] / T;
    for (int n = 0; n < N; ++n) {
      const double arg0 = base - double(n0 + n);
      double v = 0.0;
      if (samples.config.periodic) {
        const int l_lo = static_cast<int>(std::ceil((sup.lo - arg0) / N - 1e-12));
        const int l_hi = static_cast<int>(std::floor((sup.hi - arg0) / N + 1e-12));
        for (int l = l_lo; l <= l_hi; ++l) v += kernel(arg0 + double(l) * N);
      } else {
        v = kernel(arg0);
      }
      design(n, k) = v;
    }
  }
  Eigen::Map<const Eigen::VectorXd> y(samples.values.data(), N);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  AmplitudeFit fit;
  fit.degenerate = cod.rank() < K;
  const Eigen::VectorXd a = cod.solve(y);
  fit.amplitudes.assign(a.data(), a.data() + K);
  return fit;
}

void write_moments_csv(const std::filesystem::path& path, const MomentSequence& m) {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < m.s.size(); ++i)
    rows.push_back({double(i), m.s(i).real(), m.s(i).imag()});
  csv::write_table(path, "m,re,im", rows);
}

}  // namespace fri
