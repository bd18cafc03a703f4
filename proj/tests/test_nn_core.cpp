#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fri/nn/adam.hpp"
#include "fri/nn/checkpoint.hpp"
#include "fri/nn/ops.hpp"
#include "fri/rng.hpp"
#include "fri/unfolded.hpp"

using namespace fri;
using nn::Tensor;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, RngStream& rng, bool rg = true,
                     double scale = 1.0) {
  std::size_t total = 1;
  for (auto d : shape) total *= d;
  std::vector<double> v(total);
  for (auto& x : v) x = scale * rng.normal();
  return Tensor::from(std::move(v), std::move(shape), rg);
}

}  // namespace

TEST_CASE("relu forward and gradient") {
  nn::Tape tape;
  Tensor x = Tensor::from({-2.0, 0.0, 3.0}, {3}, true);
  Tensor y = nn::relu(tape, x);
  CHECK(y.values() == std::vector<double>{0.0, 0.0, 3.0});
  Tensor loss = nn::frobenius_sq(tape, y);
  tape.backward(loss);
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 0.0);  // subgradient at 0 is 0
  CHECK(x.grad()[2] == doctest::Approx(6.0));
}

TEST_CASE("dense with identity weights is a passthrough") {
  nn::Tape tape;
  Tensor x = Tensor::from({1.0, -2.0, 0.5}, {1, 3}, true);
  Tensor w = Tensor::from({1, 0, 0, 0, 1, 0, 0, 0, 1}, {3, 3}, true);
  Tensor b = Tensor::zeros({3}, true);
  Tensor y = nn::dense(tape, x, w, b);
  CHECK(y.values() == x.values());
  Tensor loss = nn::frobenius_sq(tape, y);
  tape.backward(loss);
  for (std::size_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == doctest::Approx(2.0 * x.values()[i]));
}

TEST_CASE("conv1d with a delayed delta kernel shifts the input") {
  nn::Tape tape;
  Tensor x = Tensor::from({1, 2, 3, 4, 5}, {1, 1, 5}, true);
  // kernel (1, 0, 0) at "same" padding: y[n] = x[n-1]
  Tensor w = Tensor::from({1.0, 0.0, 0.0}, {1, 1, 3}, true);
  Tensor b = Tensor::zeros({1}, true);
  Tensor y = nn::conv1d(tape, x, w, b);
  CHECK(y.values() == std::vector<double>{0, 1, 2, 3, 4});
}

TEST_CASE("finite-difference checks for every primitive") {
  RngStream rng(21);

  SUBCASE("dense + relu + squared_error") {
    Tensor x = random_tensor({2, 4}, rng);
    Tensor w = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({3}, rng);
    Tensor target = random_tensor({2, 3}, rng, false);
    auto build = [&](nn::Tape& tape) {
      return nn::squared_error(tape, nn::relu(tape, nn::dense(tape, x, w, b)), target);
    };
    CHECK(nn::gradient_check(build, {x, w, b}) < 1e-6);
  }
  SUBCASE("conv1d against central differences") {
    Tensor x = random_tensor({2, 2, 6}, rng);
    Tensor w = random_tensor({3, 2, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    auto build = [&](nn::Tape& tape) {
      return nn::frobenius_sq(tape, nn::conv1d(tape, x, w, b));
    };
    CHECK(nn::gradient_check(build, {x, w, b}) < 1e-6);
  }
  SUBCASE("sigmoid, exp, scale, add, sub") {
    Tensor a = random_tensor({5}, rng);
    Tensor b = random_tensor({5}, rng);
    auto build = [&](nn::Tape& tape) {
      Tensor s = nn::sigmoid(tape, a);
      Tensor e = nn::exp(tape, nn::scale(tape, b, -0.37));
      return nn::frobenius_sq(tape, nn::sub(tape, nn::add(tape, s, e), b));
    };
    CHECK(nn::gradient_check(build, {a, b}) < 1e-6);
  }
  SUBCASE("complex matmul") {
    Tensor a = random_tensor({3, 4, 2}, rng);
    Tensor b = random_tensor({4, 2, 2}, rng);
    auto build = [&](nn::Tape& tape) {
      return nn::frobenius_sq(tape, nn::matmul_complex(tape, a, b));
    };
    CHECK(nn::gradient_check(build, {a, b}) < 1e-6);
  }
  SUBCASE("toeplitz projection and reshape") {
    Tensor x = random_tensor({5, 4, 2}, rng);
    Tensor h = random_tensor({3, 1, 2}, rng, false);
    auto build = [&](nn::Tape& tape) {
      Tensor p = nn::toeplitz_project_op(tape, x);
      Tensor s = nn::toeplitz_reshape_op(tape, p, 3, 2);
      return nn::frobenius_sq(tape, nn::matmul_complex(tape, s, h));
    };
    CHECK(nn::gradient_check(build, {x}) < 1e-6);
  }
  SUBCASE("decoder synthesis away from the ReLU knots") {
    Tensor t = Tensor::from({0.101, -0.2035}, {1, 2}, true);
    Tensor a = Tensor::from({2.0, -1.3}, {1, 2}, true);
    Tensor d = random_tensor({24}, rng, true, 0.3);
    auto build = [&](nn::Tape& tape) {
      Tensor y = nn::decoder_synth(tape, t, a, d, 1.0 / 8.0, -4, 8, 0.25);
      return nn::frobenius_sq(tape, y);
    };
    CHECK(nn::gradient_check(build, {t, a, d}) < 1e-5);
  }
}

TEST_CASE("svd soft threshold values") {
  SUBCASE("rank <= K input is untouched for any mu") {
    // diag(3, 2, 0): K = 2 means sigma_3 = 0, threshold 0
    Tensor x = Tensor::zeros({3, 3, 2});
    x.values()[(0 * 3 + 0) * 2] = 3.0;
    x.values()[(1 * 3 + 1) * 2] = 2.0;
    nn::Tape tape;
    Tensor y = nn::svd_soft_threshold(tape, x, 2, Tensor::scalar(0.9));
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(y.values()[i] == doctest::Approx(x.values()[i]).scale(1.0).epsilon(1e-12));
  }
  SUBCASE("diag(3,2,1) with K=2, mu=1 becomes diag(2,1,0)") {
    Tensor x = Tensor::zeros({3, 3, 2});
    x.values()[(0 * 3 + 0) * 2] = 3.0;
    x.values()[(1 * 3 + 1) * 2] = 2.0;
    x.values()[(2 * 3 + 2) * 2] = 1.0;
    nn::Tape tape;
    Tensor y = nn::svd_soft_threshold(tape, x, 2, Tensor::scalar(1.0));
    CHECK(y.values()[(0 * 3 + 0) * 2] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(y.values()[(1 * 3 + 1) * 2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(y.values()[(2 * 3 + 2) * 2] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  }
  SUBCASE("mu -> 0 approaches the identity") {
    RngStream rng(5);
    Tensor x = random_tensor({4, 3, 2}, rng, false);
    nn::Tape tape;
    Tensor y = nn::svd_soft_threshold(tape, x, 1, Tensor::scalar(1e-12));
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(y.values()[i] == doctest::Approx(x.values()[i]).scale(1.0).epsilon(1e-9));
  }
}

TEST_CASE("svd soft threshold gradient vs finite differences") {
  RngStream rng(31);
  SUBCASE("tall complex input") {
    Tensor x = random_tensor({5, 4, 2}, rng);
    Tensor mu_raw = Tensor::scalar(0.1, true);
    Tensor w = random_tensor({5, 4, 2}, rng, false);
    auto build = [&](nn::Tape& tape) {
      Tensor mu = nn::sigmoid(tape, mu_raw);
      Tensor y = nn::svd_soft_threshold(tape, x, 2, mu);
      return nn::squared_error(tape, y, w);
    };
    CHECK(nn::gradient_check(build, {x, mu_raw}) < 1e-4);
  }
  SUBCASE("wide complex input goes through the transpose path") {
    Tensor x = random_tensor({3, 6, 2}, rng);
    Tensor mu_raw = Tensor::scalar(-0.4, true);
    Tensor w = random_tensor({3, 6, 2}, rng, false);
    auto build = [&](nn::Tape& tape) {
      Tensor mu = nn::sigmoid(tape, mu_raw);
      Tensor y = nn::svd_soft_threshold(tape, x, 1, mu);
      return nn::squared_error(tape, y, w);
    };
    CHECK(nn::gradient_check(build, {x, mu_raw}) < 1e-4);
  }
}

TEST_CASE("gradient check on a quadratic is exact to FD truncation") {
  RngStream rng(17);
  Tensor x = random_tensor({6}, rng);
  auto build = [&](nn::Tape& tape) { return nn::frobenius_sq(tape, x); };
  CHECK(nn::gradient_check(build, {x}) < 1e-7);
}

TEST_CASE("random 3-layer relu net passes the FD oracle") {
  RngStream rng(23);
  Tensor x = random_tensor({1, 6}, rng, false);
  Tensor w1 = random_tensor({8, 6}, rng), b1 = random_tensor({8}, rng);
  Tensor w2 = random_tensor({8, 8}, rng), b2 = random_tensor({8}, rng);
  Tensor w3 = random_tensor({2, 8}, rng), b3 = random_tensor({2}, rng);
  auto build = [&](nn::Tape& tape) {
    Tensor h1 = nn::relu(tape, nn::dense(tape, x, w1, b1));
    Tensor h2 = nn::relu(tape, nn::dense(tape, h1, w2, b2));
    return nn::frobenius_sq(tape, nn::dense(tape, h2, w3, b3));
  };
  CHECK(nn::gradient_check(build, {w1, b1, w2, b2, w3, b3}) < 1e-4);
}

TEST_CASE("adam behavior") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor p = Tensor::from({1.0, -2.0}, {2}, true);
    std::vector<Tensor> params = {p};
    nn::AdamState adam(0.01);
    adam.attach(params);
    p.zero_grad();
    adam.step(params);
    CHECK(p.values()[0] == doctest::Approx(1.0));
    CHECK(p.values()[1] == doctest::Approx(-2.0));
  }
  SUBCASE("first step from zero state is -lr * g / (|g| + eps)") {
    Tensor p = Tensor::from({0.0, 0.0}, {2}, true);
    std::vector<Tensor> params = {p};
    nn::AdamState adam(0.05);
    adam.attach(params);
    p.grad()[0] = 0.3;
    p.grad()[1] = -4.0;
    adam.step(params);
    CHECK(p.values()[0] == doctest::Approx(-0.05 * 0.3 / (0.3 + 1e-8)).epsilon(1e-9));
    CHECK(p.values()[1] == doctest::Approx(0.05 * 4.0 / (4.0 + 1e-8)).epsilon(1e-9));
  }
  SUBCASE("constant gradient drives sign-descent updates of size lr") {
    Tensor p = Tensor::from({0.0}, {1}, true);
    std::vector<Tensor> params = {p};
    nn::AdamState adam(0.01);
    adam.attach(params);
    double prev = 0.0;
    for (int i = 0; i < 50; ++i) {
      p.zero_grad();
      p.grad()[0] = 2.5;
      adam.step(params);
      if (i > 40) CHECK(prev - p.values()[0] == doctest::Approx(0.01).epsilon(1e-3));
      prev = p.values()[0];
    }
  }
}

TEST_CASE("checkpoint round trip preserves names, shapes, bits") {
  RngStream rng(77);
  std::vector<std::pair<std::string, Tensor>> named;
  named.emplace_back("a.w", random_tensor({3, 4}, rng));
  named.emplace_back("b", random_tensor({7}, rng));
  const auto path = std::filesystem::temp_directory_path() / "fri_ckpt_test.bin";
  nn::save_checkpoint(path, named);
  const auto back = nn::load_checkpoint(path);
  REQUIRE(back.size() == named.size());
  for (std::size_t i = 0; i < named.size(); ++i) {
    CHECK(back[i].first == named[i].first);
    CHECK(back[i].second.shape() == named[i].second.shape());
    CHECK(back[i].second.values() == named[i].second.values());
  }
  std::filesystem::remove(path);
}

TEST_CASE("complex pair representation is consistent with an all-real computation") {
  // (a + jb)(c + jd) via matmul_complex matches the hand-written real pairs
  nn::Tape tape;
  Tensor a = Tensor::from({1.0, 2.0}, {1, 1, 2}, true);   // 1 + 2j
  Tensor b = Tensor::from({-0.5, 3.0}, {1, 1, 2}, true);  // -0.5 + 3j
  Tensor c = nn::matmul_complex(tape, a, b);
  CHECK(c.values()[0] == doctest::Approx(1.0 * -0.5 - 2.0 * 3.0));
  CHECK(c.values()[1] == doctest::Approx(1.0 * 3.0 + 2.0 * -0.5));
  Tensor loss = nn::frobenius_sq(tape, c);
  tape.backward(loss);
  // gradient of |ab|^2 wrt a in pair form equals 2 * conj(b) * (ab) components
  const std::complex<double> av(1.0, 2.0), bv(-0.5, 3.0);
  const std::complex<double> g = 2.0 * std::conj(bv) * (av * bv);
  CHECK(a.grad()[0] == doctest::Approx(g.real()));
  CHECK(a.grad()[1] == doctest::Approx(g.imag()));
}

TEST_CASE("deterministic tape replay") {
  auto run = [](std::uint64_t seed) {
    RngStream rng(seed);
    Tensor x = random_tensor({4, 3}, rng, false);
    Tensor w = random_tensor({2, 3}, rng);
    Tensor b = random_tensor({2}, rng);
    std::vector<Tensor> params = {w, b};
    nn::AdamState adam(1e-2);
    adam.attach(params);
    for (int i = 0; i < 5; ++i) {
      for (auto& p : params) p.zero_grad();
      nn::Tape tape;
      Tensor loss = nn::frobenius_sq(tape, nn::dense(tape, x, w, b));
      tape.backward(loss);
      adam.step(params);
    }
    return std::make_pair(w.values(), b.values());
  };
  const auto r1 = run(123);
  const auto r2 = run(123);
  CHECK(r1.first == r2.first);
  CHECK(r1.second == r2.second);
}
