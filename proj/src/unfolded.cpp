#include "fri/unfolded.hpp"

#include <cmath>

#include "fri/csv.hpp"
#include "fri/errors.hpp"
#include "fri/rng.hpp"

namespace fri {

nn::Tensor complex_matrix_tensor(const Eigen::MatrixXcd& m, bool requires_grad) {
  nn::Tensor t = nn::Tensor::zeros(
      {std::size_t(m.rows()), std::size_t(m.cols()), 2}, requires_grad);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      t.values()[(std::size_t(i) * m.cols() + j) * 2] = m(i, j).real();
      t.values()[(std::size_t(i) * m.cols() + j) * 2 + 1] = m(i, j).imag();
    }
  return t;
}

Eigen::MatrixXcd tensor_to_complex(const nn::Tensor& t) {
  if (t.shape().size() != 3 || t.shape()[2] != 2)
    throw ConfigError("tensor_to_complex: expected (rows, cols, 2)");
  Eigen::MatrixXcd m(t.shape()[0], t.shape()[1]);
  for (std::size_t i = 0; i < t.shape()[0]; ++i)
    for (std::size_t j = 0; j < t.shape()[1]; ++j)
      m(i, j) = cplx(t.values()[(i * t.shape()[1] + j) * 2],
                     t.values()[(i * t.shape()[1] + j) * 2 + 1]);
  return m;
}

std::vector<nn::Tensor> UnfoldedNetwork::parameters() {
  std::vector<nn::Tensor> out;
  for (auto& l : layers) {
    out.push_back(l.w1);
    out.push_back(l.w2);
    out.push_back(l.w3);
    out.push_back(l.w4);
    out.push_back(l.mu_raw);
  }
  return out;
}

std::vector<std::pair<std::string, nn::Tensor>> UnfoldedNetwork::named_parameters() {
  std::vector<std::pair<std::string, nn::Tensor>> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    out.emplace_back(p + "w1", layers[i].w1);
    out.emplace_back(p + "w2", layers[i].w2);
    out.emplace_back(p + "w3", layers[i].w3);
    out.emplace_back(p + "w4", layers[i].w4);
    out.emplace_back(p + "mu_raw", layers[i].mu_raw);
  }
  return out;
}

UnfoldedNetwork init_unfolded(int P, int M, int K, int layer_count, double delta1, double delta2,
                              double mu0) {
  if (layer_count < 1) throw ConfigError("init_unfolded: need at least one layer");
  if (M < 1 || M > P || K < 1) throw ConfigError("init_unfolded: bad dimensions");
  if (mu0 <= 0.0 || mu0 >= 1.0) throw ConfigError("init_unfolded: mu0 must lie in (0, 1)");
  const int R = P - M + 1;
  UnfoldedNetwork net;
  net.P = P;
  net.M = M;
  net.K = K;
  const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(R, R);
  const double mu_raw = std::log(mu0 / (1.0 - mu0));
  for (int l = 0; l < layer_count; ++l) {
    UnfoldedLayer layer;
    layer.w1 = complex_matrix_tensor((1.0 - delta1) * eye, true);
    layer.w2 = complex_matrix_tensor(delta1 * eye, true);
    layer.w3 = complex_matrix_tensor(delta2 * eye, true);
    layer.w4 = complex_matrix_tensor((1.0 - delta2) * eye, true);
    layer.mu_raw = nn::Tensor::scalar(mu_raw, true);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

nn::Tensor unfolded_forward(nn::Tape& tape, const UnfoldedNetwork& net, const nn::Tensor& noisy) {
  if (noisy.shape().size() != 3 || noisy.shape()[2] != 2)
    throw ConfigError("unfolded_forward: expected complex (rows, cols, 2)");
  nn::Tensor H = noisy;
  nn::Tensor L = nn::Tensor::zeros(noisy.shape());
  for (const auto& layer : net.layers) {
    nn::Tensor mu = nn::sigmoid(tape, layer.mu_raw);
    nn::Tensor pre =
        nn::add(tape, nn::matmul_complex(tape, layer.w1, L), nn::matmul_complex(tape, layer.w2, H));
    L = nn::svd_soft_threshold(tape, pre, net.K, mu);
    nn::Tensor mix =
        nn::add(tape, nn::matmul_complex(tape, layer.w3, L), nn::matmul_complex(tape, layer.w4, H));
    H = nn::toeplitz_project_op(tape, mix);
  }
  return H;
}

nn::Tensor zero_eig_loss(nn::Tape& tape, const UnfoldedNetwork& net, const nn::Tensor& denoised,
                         const AnnihilatingFilter& h_true, const ZeroEigLossConfig& cfg) {
  if (cfg.alpha <= 0.0 || cfg.beta <= 0.0) throw ConfigError("zero_eig_loss: alpha, beta > 0");
  nn::Tensor S = nn::toeplitz_reshape_op(tape, denoised, net.M, net.K);
  const int hk = static_cast<int>(h_true.h.size());
  if (hk != net.K + 1) throw ConfigError("zero_eig_loss: filter length mismatch");

  Eigen::MatrixXcd h_col = h_true.h;
  nn::Tensor h_tensor = complex_matrix_tensor(h_col);
  nn::Tensor Sh = nn::matmul_complex(tape, S, h_tensor);
  nn::Tensor fit = nn::frobenius_sq(tape, Sh);

  const Eigen::MatrixXcd proj =
      Eigen::MatrixXcd::Identity(hk, hk) - h_true.h * h_true.h.adjoint();
  nn::Tensor S_orth = nn::matmul_complex(tape, S, complex_matrix_tensor(proj));
  nn::Tensor reg =
      nn::scale(tape, nn::exp(tape, nn::scale(tape, nn::frobenius_sq(tape, S_orth), -cfg.beta)),
                cfg.alpha);
  return nn::add(tape, fit, reg);
}

std::vector<double> train_unfolded(UnfoldedNetwork& net, const std::vector<UnfoldedExample>& data,
                                   const UnfoldedTrainConfig& cfg) {
  if (data.empty()) throw ConfigError("train_unfolded: empty dataset");
  auto params = net.parameters();
  nn::AdamState adam(cfg.learning_rate);
  adam.attach(params);
  RngStream order_rng = RngStream::substream(cfg.seed, 0xabcdefull);

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> epoch_losses;
  std::vector<std::vector<double>> log_rows;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the dedicated stream keeps runs reproducible per seed
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[order_rng.below(i)]);

    double epoch_loss = 0.0;
    std::size_t pos = 0;
    while (pos < order.size()) {
      const std::size_t batch = std::min<std::size_t>(cfg.batch_size, order.size() - pos);
      for (auto& p : params) p.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t bi = 0; bi < batch; ++bi) {
        const auto& ex = data[order[pos + bi]];
        nn::Tape tape;
        nn::Tensor input = complex_matrix_tensor(ex.noisy);
        nn::Tensor denoised = unfolded_forward(tape, net, input);
        nn::Tensor loss =
            nn::scale(tape, zero_eig_loss(tape, net, denoised, ex.filter, cfg.loss), 1.0 / batch);
        if (!std::isfinite(loss.value()))
          throw NumericalError("train_unfolded: loss diverged (NaN/inf)");
        tape.backward(loss);
        batch_loss += loss.value();
      }
      adam.step(params);
      epoch_loss += batch_loss * double(batch);
      pos += batch;
    }
    epoch_loss /= double(order.size());
    epoch_losses.push_back(epoch_loss);
    log_rows.push_back({double(epoch), epoch_loss});
  }
  if (!cfg.log_csv.empty()) csv::write_table(cfg.log_csv, "epoch,mean_loss", log_rows);
  return epoch_losses;
}

Eigen::MatrixXcd unfolded_denoise(const UnfoldedNetwork& net, const Eigen::MatrixXcd& noisy) {
  nn::Tape tape;
  nn::Tensor out = unfolded_forward(tape, net, complex_matrix_tensor(noisy));
  return tensor_to_complex(out);
}

ReconstructionResult reconstruct_unfolded(const UnfoldedNetwork& net, const SampleSet& samples,
                                          const ExpReproCoeffs& coeffs, const Kernel& kernel) {
  const MomentSequence seq = moments(samples, coeffs);
  const Eigen::MatrixXcd noisy = build_toeplitz(seq, net.M);
  const Eigen::MatrixXcd denoised = unfolded_denoise(net, noisy);
  ReconstructionResult result;
  result.method = "unfolded";
  result.locations = prony_locations(denoised, net.M, net.K, seq.lambda, seq.omega0,
                                     seq.sampling_period, samples.config.period);
  auto fit = amplitudes_ls(result.locations, samples, kernel);
  result.amplitudes = std::move(fit.amplitudes);
  result.degenerate_design = fit.degenerate;
  return result;
}

}  // namespace fri
