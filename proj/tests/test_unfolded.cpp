#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fri/unfolded.hpp"
#include "oracles.hpp"

using namespace fri;
namespace {
constexpr double kPi = std::numbers::pi;

struct Setup {
  Kernel kernel;
  ExpReproCoeffs coeffs;
  SamplingConfig config;
};

Setup emoms21() {
  Setup s{Kernel::emoms(20), {}, SamplingConfig(21, 1.0)};
  s.coeffs = exp_repro_coeffs(s.kernel, 20, -20.0 * kPi / 21.0, 2.0 * kPi / 21.0, 21, -10);
  return s;
}

Eigen::MatrixXcd noisy_matrix(const Setup& s, double psnr, std::uint64_t seed,
                              DiracStream* truth = nullptr) {
  RngStream rng = RngStream::substream(seed, 0);
  const DiracStream stream(1.0, {rng.uniform(-0.5, 0.0), rng.uniform(0.0, 0.5)},
                           {rng.uniform(0.5, 10.0), rng.uniform(0.5, 10.0)});
  if (truth) *truth = stream;
  const SampleSet clean = synthesize(stream, s.kernel, s.config);
  NoiseSpec noise{psnr, stream.peak_amplitude()};
  RngStream nrng = RngStream::substream(seed, 1);
  const SampleSet noisy = add_noise(clean, noise, nrng);
  return build_toeplitz(moments(noisy, s.coeffs), 10);
}
}  // namespace

TEST_CASE("untrained network reproduces PWGD with soft thresholding layer-for-layer") {
  const Setup s = emoms21();
  const Eigen::MatrixXcd noisy = noisy_matrix(s, 15.0, 7);
  UnfoldedNetwork net = init_unfolded(20, 10, 2, 5, 0.9999, 0.9999, 0.25);

  PwgdOptions opt;
  opt.delta1 = 0.9999;
  opt.delta2 = 0.9999;
  opt.iterations = 5;
  opt.soft_threshold = true;
  opt.mu = 0.25;
  const Eigen::MatrixXcd reference = pwgd(noisy, 2, opt);
  const Eigen::MatrixXcd out = unfolded_denoise(net, noisy);
  CHECK((out - reference).norm() < 1e-10);
}

TEST_CASE("delta = 1 init with vanishing threshold matches Cadzow") {
  const Setup s = emoms21();
  const Eigen::MatrixXcd noisy = noisy_matrix(s, 20.0, 9);
  // mu0 ~ 0 makes soft thresholding vanish; delta = 1 collapses the mixing
  UnfoldedNetwork net = init_unfolded(20, 10, 2, 4, 1.0, 1.0, 1e-12);
  const Eigen::MatrixXcd out = unfolded_denoise(net, noisy);
  const auto cadzow = oracle::cadzow_iterates(noisy, 2, 4);
  CHECK((out - cadzow.back()).norm() < 1e-7);
}

TEST_CASE("forward output is exactly Toeplitz; zero maps to zero") {
  const Setup s = emoms21();
  UnfoldedNetwork net = init_unfolded(20, 10, 2, 3);
  const Eigen::MatrixXcd out = unfolded_denoise(net, noisy_matrix(s, 10.0, 11));
  CHECK((out - toeplitz_project(out)).norm() < 1e-13);

  const Eigen::MatrixXcd zero_out = unfolded_denoise(net, Eigen::MatrixXcd::Zero(11, 11));
  CHECK(zero_out.norm() == doctest::Approx(0.0));
}

TEST_CASE("rank-K Toeplitz input stays near the fixed point at init") {
  const Setup s = emoms21();
  const DiracStream stream(1.0, {-0.1, 0.22}, {3.0, 4.0});
  const SampleSet clean = synthesize(stream, s.kernel, s.config);
  const Eigen::MatrixXcd noiseless = build_toeplitz(moments(clean, s.coeffs), 10);
  UnfoldedNetwork net = init_unfolded(20, 10, 2, 5);
  const Eigen::MatrixXcd out = unfolded_denoise(net, noiseless);
  // (1 - delta) mixing and the soft threshold leave a small residual
  CHECK((out - noiseless).norm() / noiseless.norm() < 2e-3);
}

TEST_CASE("zero-eig loss values") {
  const Setup s = emoms21();
  DiracStream truth(1.0, {0.07, 0.29}, {2.0, 6.0});
  const SampleSet clean = synthesize(truth, s.kernel, s.config);
  const MomentSequence m = moments(clean, s.coeffs);
  const AnnihilatingFilter h = true_annihilating_filter(truth, m.lambda, m.sampling_period);
  UnfoldedNetwork net = init_unfolded(20, 10, 2, 1);
  ZeroEigLossConfig cfg;

  SUBCASE("zero matrix collapses to the regularizer ceiling alpha") {
    nn::Tape tape;
    nn::Tensor zero = complex_matrix_tensor(Eigen::MatrixXcd::Zero(11, 11));
    nn::Tensor loss = zero_eig_loss(tape, net, zero, h, cfg);
    CHECK(loss.value() == doctest::Approx(10.0).epsilon(1e-12));
  }
  SUBCASE("noiseless moments annihilate: fit term vanishes") {
    nn::Tape tape;
    nn::Tensor denoised = complex_matrix_tensor(build_toeplitz(m, 10));
    nn::Tensor loss = zero_eig_loss(tape, net, denoised, h, cfg);
    // S built from true moments: ||S h||^2 ~ 0, so loss ~ alpha * exp(-beta ||Sbar||^2)
    Eigen::MatrixXcd S(19, 3);
    for (int i = 0; i <= 18; ++i)
      for (int j = 0; j <= 2; ++j) S(i, j) = m.s(2 + i - j);
    const double expected =
        10.0 * std::exp(-0.005 * (S * (Eigen::MatrixXcd::Identity(3, 3) -
                                       h.h * h.h.adjoint()))
                                     .squaredNorm());
    CHECK(loss.value() == doctest::Approx(expected).epsilon(1e-6));
  }
  SUBCASE("denoising along the signal subspace lowers the loss") {
    RngStream rng(3);
    Eigen::MatrixXcd noisy = build_toeplitz(m, 10);
    Eigen::MatrixXcd perturbed = noisy;
    for (int i = 0; i < perturbed.rows(); ++i)
      for (int j = 0; j < perturbed.cols(); ++j)
        perturbed(i, j) += 0.3 * cplx(rng.normal(), rng.normal());
    nn::Tape t1, t2;
    const double clean_loss =
        zero_eig_loss(t1, net, complex_matrix_tensor(noisy), h, cfg).value();
    const double perturbed_loss =
        zero_eig_loss(t2, net, complex_matrix_tensor(perturbed), h, cfg).value();
    CHECK(clean_loss < perturbed_loss);
  }
}

TEST_CASE("gradients flow through the full unfolded forward") {
  UnfoldedNetwork net = init_unfolded(5, 3, 1, 2);  // small 3x4 matrices
  RngStream rng(13);
  Eigen::MatrixXcd noisy(3, 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) noisy(i, j) = cplx(rng.normal(), rng.normal());
  DiracStream truth(1.0, {-0.2}, {1.0});
  const AnnihilatingFilter h = true_annihilating_filter(truth, 2.0 * kPi / 6.0, 1.0 / 6.0);
  auto build = [&](nn::Tape& tape) {
    nn::Tensor out = unfolded_forward(tape, net, complex_matrix_tensor(noisy));
    return zero_eig_loss(tape, net, out, h, {});
  };
  CHECK(nn::gradient_check(build, net.parameters(), 1e-6) < 1e-4);
}

TEST_CASE("training reduces the loss and is reproducible per seed") {
  const Setup s = emoms21();
  std::vector<UnfoldedExample> data;
  for (int i = 0; i < 48; ++i) {
    DiracStream truth(1.0, {0.0}, {1.0});
    UnfoldedExample ex;
    ex.noisy = noisy_matrix(s, 15.0, 1000 + i, &truth);
    ex.filter = true_annihilating_filter(truth, s.coeffs.lambda, s.config.sampling_period());
    data.push_back(std::move(ex));
  }
  UnfoldedTrainConfig cfg;
  cfg.epochs = 4;
  cfg.seed = 5;

  UnfoldedNetwork net = init_unfolded(20, 10, 2, 3);
  const auto losses = train_unfolded(net, data, cfg);
  REQUIRE(losses.size() == 4);
  CHECK(losses.back() < losses.front());

  SUBCASE("zero learning rate keeps parameters") {
    UnfoldedNetwork frozen = init_unfolded(20, 10, 2, 3);
    const auto before = frozen.layers[0].w1.values();
    UnfoldedTrainConfig zero_cfg = cfg;
    zero_cfg.learning_rate = 0.0;
    zero_cfg.epochs = 2;
    train_unfolded(frozen, data, zero_cfg);
    CHECK(frozen.layers[0].w1.values() == before);
  }
  SUBCASE("identical seeds, identical final loss") {
    UnfoldedNetwork n1 = init_unfolded(20, 10, 2, 3);
    UnfoldedNetwork n2 = init_unfolded(20, 10, 2, 3);
    const auto l1 = train_unfolded(n1, data, cfg);
    const auto l2 = train_unfolded(n2, data, cfg);
    CHECK(l1.back() == l2.back());
  }
}

TEST_CASE("reconstruct_unfolded round trip on noiseless input") {
  const Setup s = emoms21();
  UnfoldedNetwork net = init_unfolded(20, 10, 2, 5);
  const DiracStream stream(1.0, {-0.31, 0.12}, {2.5, 7.0});
  const SampleSet clean = synthesize(stream, s.kernel, s.config);
  const ReconstructionResult rec = reconstruct_unfolded(net, clean, s.coeffs, s.kernel);
  REQUIRE(rec.locations.size() == 2);
  CHECK(std::abs(rec.locations[0] + 0.31) < 1e-6);
  CHECK(std::abs(rec.locations[1] - 0.12) < 1e-6);
  for (double t : rec.locations) {
    CHECK(t >= -0.5);
    CHECK(t < 0.5);
  }
}
