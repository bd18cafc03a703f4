#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fri/errors.hpp"
#include "fri/kernels.hpp"
#include "oracles.hpp"

using namespace fri;
namespace {
constexpr double kPi = std::numbers::pi;

std::vector<double> paper_espline_freqs(int P = 6, double scale = 3.5) {
  std::vector<double> omegas;
  for (int m = 0; m <= P; ++m)
    omegas.push_back(-P * kPi / (scale * (P + 1)) + m * 2.0 * kPi / (scale * (P + 1)));
  return omegas;
}
}  // namespace

TEST_CASE("espline order 1 is the box") {
  Kernel k = Kernel::espline({0.0});
  CHECK(k(0.25) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(k(0.75) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(k(1.2) == 0.0);
  CHECK(k(-0.1) == 0.0);
}

TEST_CASE("espline with repeated zero frequency is the triangle") {
  Kernel k = Kernel::espline({0.0, 0.0});
  CHECK(k(0.5) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(k(1.0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(k(1.5) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(k(2.5) == 0.0);
}

TEST_CASE("espline matches the grid-convolution oracle") {
  // conjugate-symmetric experiment frequencies
  const auto freqs = paper_espline_freqs();
  Kernel k = Kernel::espline(freqs);
  auto grid = oracle::grid_espline(freqs);
  // oracle carries O(h) rectangle-rule error
  for (double t : {0.3, 1.1, 2.7, 3.5, 4.2, 5.9, 6.4}) {
    const auto expect = grid.eval(t);
    CHECK(std::abs(k.eval_complex(t) - expect) < 2e-3);
  }
  CHECK(k.real_valued());

  // literal non-symmetric frequency set evaluates complex and still matches
  std::vector<double> raw;
  for (int m = 0; m <= 6; ++m) raw.push_back(-6.0 * kPi / 7.0 + m * 2.0 * kPi / 24.5);
  Kernel k2 = Kernel::espline(raw);
  CHECK_FALSE(k2.real_valued());
  auto grid2 = oracle::grid_espline(raw);
  for (double t : {0.9, 2.2, 4.8, 6.1})
    CHECK(std::abs(k2.eval_complex(t) - grid2.eval(t)) < 2e-3);
}

TEST_CASE("espline of conjugate-symmetric frequencies is real everywhere") {
  Kernel k = Kernel::espline(paper_espline_freqs());
  for (double t = -0.5; t < 7.6; t += 0.0371)
    CHECK(std::abs(k.eval_complex(t).imag()) < 1e-12);
}

TEST_CASE("emoms reproduces its exponentials below 1e-8") {
  const int P = 20, N = 21;
  Kernel k = Kernel::emoms(P);
  const double omega0 = -P * kPi / (P + 1);
  const double lambda = 2.0 * kPi / (P + 1);
  const auto coeffs = exp_repro_coeffs(k, P, omega0, lambda, N, -(N / 2));
  CHECK(coeffs.residual < 1e-8);
  CHECK(k(-0.5) == 0.0);
  CHECK(k(21.5) == 0.0);
  // bounded on the support
  double peak = 0.0;
  for (double t = 0.0; t < 21.0; t += 0.01) peak = std::max(peak, std::abs(k(t)));
  CHECK(peak <= 1.0 + 1e-9);
}

TEST_CASE("emoms matches an independent frequency-domain synthesis") {
  // the tabulation must agree with a directly-written cosine-sum construction
  const int P = 20;
  Kernel k = Kernel::emoms(P);
  const double centre = (P + 1) / 2.0;
  for (double t = 0.01; t < 21.0; t += 0.317) {
    double acc = 0.0;
    for (int m = 0; m <= P; ++m) {
      const double w = -P * kPi / (P + 1) + m * 2.0 * kPi / (P + 1);
      acc += std::cos(w * (t - centre));
    }
    CHECK(k(t) == doctest::Approx(acc / (P + 1)).epsilon(1e-12));
  }
}

TEST_CASE("espline reproduction coefficients pass the residual gate") {
  const auto freqs = paper_espline_freqs();
  Kernel k = Kernel::espline(freqs);
  const auto coeffs = exp_repro_coeffs(k, 6, freqs[0], freqs[1] - freqs[0], 21, -10);
  CHECK(coeffs.residual < 1e-8);
  // c_{m,n}/c_{m,0} = e^{j omega_m n} by construction
  for (int m = 0; m <= 6; ++m)
    for (int n = 0; n < 21; ++n) {
      const cplx expected = coeffs.c0[m] * std::polar(1.0, (freqs[0] + m * (freqs[1] - freqs[0])) *
                                                               double(-10 + n));
      CHECK(std::abs(coeffs.c(m, n) - expected) < 1e-12);
    }
}

TEST_CASE("reproduction failure raises on frequency mismatch") {
  Kernel k = Kernel::espline(paper_espline_freqs());
  CHECK_THROWS_AS(exp_repro_coeffs(k, 6, -0.9, 0.35, 21, -10), NumericalError);
}

TEST_CASE("moments of a unit stream have constant modulus") {
  // Eq.-(4) with K=1: |s[m]| = |a_0| for every m
  const int P = 20, N = 21;
  Kernel k = Kernel::emoms(P);
  const double omega0 = -P * kPi / (P + 1), lambda = 2.0 * kPi / (P + 1);
  const auto coeffs = exp_repro_coeffs(k, P, omega0, lambda, N, -(N / 2));
  SamplingConfig cfg(N, 1.0);
  const DiracStream stream(1.0, {0.173}, {2.5});
  const SampleSet samples = synthesize(stream, k, cfg);
  Eigen::Map<const Eigen::VectorXd> y(samples.values.data(), N);
  const Eigen::VectorXcd s = coeffs.c * y;
  for (int m = 0; m <= P; ++m) CHECK(std::abs(s(m)) == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("piecewise_from_kernel interpolates at the grid nodes") {
  Kernel smooth = Kernel::espline(paper_espline_freqs());
  const double delta = 1.0 / 64.0;
  const auto d = piecewise_from_kernel(smooth, delta);
  CHECK(d[0] == 0.0);
  for (std::size_t i = 0; i <= d.size(); i += 7) {
    const double t = delta * double(i);
    CHECK(std::abs(eval_piecewise(d, delta, t) - smooth(t)) < 1e-12);
  }
}

TEST_CASE("a linear kernel is represented exactly for any step") {
  std::vector<double> ramp_d = {1.0};
  Kernel ramp = Kernel::piecewise_linear(ramp_d, 4.0);
  for (double delta : {0.5, 1.0, 2.0}) {
    const auto d = piecewise_from_kernel(ramp, delta);
    for (double t = 0.0; t <= 4.0; t += 0.31)
      CHECK(eval_piecewise(d, delta, t) == doctest::Approx(ramp(t)).epsilon(1e-13));
  }
}

TEST_CASE("halving the step shrinks the dense-grid error about 4x") {
  Kernel smooth = Kernel::espline(paper_espline_freqs());
  auto max_err = [&](double delta) {
    const auto d = piecewise_from_kernel(smooth, delta);
    double worst = 0.0;
    for (double t = 0.0; t < 7.0; t += 1e-3)
      worst = std::max(worst, std::abs(eval_piecewise(d, delta, t) - smooth(t)));
    return worst;
  };
  const double e1 = max_err(1.0 / 8.0);
  const double e2 = max_err(1.0 / 16.0);
  const double ratio = e1 / e2;
  CHECK(ratio > 3.0);
  CHECK(ratio < 5.0);
}

TEST_CASE("eval_piecewise basics") {
  CHECK(eval_piecewise({0.0, 0.0, 0.0}, 0.5, 1.0) == 0.0);
  CHECK(eval_piecewise({1.0}, 0.25, 2.0) == doctest::Approx(2.0));  // ramp max(0, t)
  CHECK(eval_piecewise({1.0}, 0.25, -1.0) == 0.0);
  // zero for t <= 0 with arbitrary coefficients
  CHECK(eval_piecewise({3.0, -2.0, 0.7}, 0.1, 0.0) == 0.0);
  CHECK(eval_piecewise({3.0, -2.0, 0.7}, 0.1, -0.3) == 0.0);
}

TEST_CASE("tabulated kernel round-trips through csv") {
  Kernel k = Kernel::emoms(8);
  const auto path = std::filesystem::temp_directory_path() / "fri_kernel_io.csv";
  k.to_csv(path, 1.0 / 32.0);
  Kernel back = Kernel::from_csv(path);
  for (double t = 0.1; t < 9.0; t += 0.37) CHECK(back(t) == doctest::Approx(k(t)).epsilon(1e-3));
  std::filesystem::remove(path);
}
