#include "fri/friednet.hpp"

#include <algorithm>
#include <cmath>

#include "fri/csv.hpp"
#include "fri/errors.hpp"
#include "fri/nn/checkpoint.hpp"

namespace fri {

namespace {

constexpr int kFilters = 100;
constexpr int kKernelSize = 3;
constexpr int kFcWidth = 100;

nn::Tensor he_uniform(std::vector<std::size_t> shape, std::size_t fan_in, RngStream& rng) {
  const double bound = std::sqrt(6.0 / double(fan_in));
  std::size_t total = 1;
  for (auto d : shape) total *= d;
  std::vector<double> v(total);
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return nn::Tensor::from(std::move(v), std::move(shape), true);
}

}  // namespace

EncoderParams EncoderParams::init(int N, int K, RngStream& rng) {
  EncoderParams enc;
  enc.input_size = N;
  enc.output_size = K;
  int cin = 1;
  for (int layer = 0; layer < 3; ++layer) {
    enc.conv_w.push_back(he_uniform({kFilters, std::size_t(cin), kKernelSize},
                                    std::size_t(cin) * kKernelSize, rng));
    enc.conv_b.push_back(nn::Tensor::zeros({kFilters}, true));
    cin = kFilters;
  }
  const std::size_t flat = std::size_t(kFilters) * std::size_t(N);
  enc.fc_w.push_back(he_uniform({kFcWidth, flat}, flat, rng));
  enc.fc_b.push_back(nn::Tensor::zeros({kFcWidth}, true));
  enc.fc_w.push_back(he_uniform({kFcWidth, kFcWidth}, kFcWidth, rng));
  enc.fc_b.push_back(nn::Tensor::zeros({kFcWidth}, true));
  enc.fc_w.push_back(he_uniform({std::size_t(K), kFcWidth}, kFcWidth, rng));
  enc.fc_b.push_back(nn::Tensor::zeros({std::size_t(K)}, true));
  return enc;
}

std::vector<nn::Tensor> EncoderParams::parameters() {
  std::vector<nn::Tensor> out;
  for (int i = 0; i < 3; ++i) {
    out.push_back(conv_w[i]);
    out.push_back(conv_b[i]);
  }
  for (int i = 0; i < 3; ++i) {
    out.push_back(fc_w[i]);
    out.push_back(fc_b[i]);
  }
  return out;
}

std::vector<std::pair<std::string, nn::Tensor>> EncoderParams::named_parameters() {
  std::vector<std::pair<std::string, nn::Tensor>> out;
  for (int i = 0; i < 3; ++i) {
    out.emplace_back("conv" + std::to_string(i) + ".w", conv_w[i]);
    out.emplace_back("conv" + std::to_string(i) + ".b", conv_b[i]);
  }
  for (int i = 0; i < 3; ++i) {
    out.emplace_back("fc" + std::to_string(i) + ".w", fc_w[i]);
    out.emplace_back("fc" + std::to_string(i) + ".b", fc_b[i]);
  }
  return out;
}

void EncoderParams::set_trainable(bool trainable) {
  for (auto& p : parameters()) p.set_requires_grad(trainable);
}

DecoderParams DecoderParams::fixed_from_kernel(const Kernel& kernel, double delta,
                                               const SamplingConfig& config) {
  DecoderParams dec;
  dec.delta = delta;
  dec.sampling_period = config.sampling_period();
  dec.first_index = config.first_index();
  dec.sample_count = config.sample_count;
  dec.learnable = false;
  auto d = piecewise_from_kernel(kernel, delta);
  const std::size_t segments = d.size();
  dec.d = nn::Tensor::from(std::move(d), {segments}, false);
  return dec;
}

DecoderParams DecoderParams::random_init(double support_length, double delta,
                                       const SamplingConfig& config, RngStream& rng) {
  const double count = support_length / delta;
  const auto I = static_cast<std::size_t>(std::llround(count));
  if (std::abs(count - double(I)) > 1e-9 || I == 0)
    throw ConfigError("DecoderParams: delta must divide the support length");
  DecoderParams dec;
  dec.delta = delta;
  dec.sampling_period = config.sampling_period();
  dec.first_index = config.first_index();
  dec.sample_count = config.sample_count;
  dec.learnable = true;
  std::vector<double> d(I);
  for (auto& x : d) x = rng.uniform(-0.01, 0.01);
  dec.d = nn::Tensor::from(std::move(d), {I}, true);
  return dec;
}

Kernel DecoderParams::kernel() const {
  return Kernel::piecewise_linear(d.values(), delta);
}

void DecoderParams::normalize_peak() {
  // extrema of a piecewise-linear function lie on the knot grid
  const auto& dv = d.values();
  const auto I = dv.size();
  double vmax = 0.0, vmin = 0.0;
  double value = 0.0, slope = 0.0;
  for (std::size_t i = 1; i <= I; ++i) {
    slope += dv[i - 1];
    value += slope * delta;  // phi at knot i
    vmax = std::max(vmax, value);
    vmin = std::min(vmin, value);
  }
  const double div = (std::abs(vmax) >= std::abs(vmin)) ? vmax : vmin;
  if (div == 0.0) throw NumericalError("normalize_peak: estimated kernel is identically zero");
  for (auto& x : d.values()) x /= div;
}

nn::Tensor encoder_forward(nn::Tape& tape, EncoderParams& enc, const nn::Tensor& x) {
  if (x.shape().size() != 2 || static_cast<int>(x.shape()[1]) != enc.input_size)
    throw ConfigError("encoder_forward: input shape mismatch");
  const auto B = x.shape()[0];
  nn::Tensor h = nn::reshape(tape, x, {B, 1, std::size_t(enc.input_size)});
  for (int i = 0; i < 3; ++i)
    h = nn::relu(tape, nn::conv1d(tape, h, enc.conv_w[i], enc.conv_b[i]));
  h = nn::reshape(tape, h, {B, std::size_t(kFilters) * std::size_t(enc.input_size)});
  h = nn::relu(tape, nn::dense(tape, h, enc.fc_w[0], enc.fc_b[0]));
  h = nn::relu(tape, nn::dense(tape, h, enc.fc_w[1], enc.fc_b[1]));
  return nn::dense(tape, h, enc.fc_w[2], enc.fc_b[2]);
}

nn::Tensor decoder_forward(nn::Tape& tape, const DecoderParams& dec, const nn::Tensor& locations,
                           const nn::Tensor& amplitudes) {
  return nn::decoder_synth(tape, locations, amplitudes, dec.d, dec.sampling_period,
                           dec.first_index, dec.sample_count, dec.delta);
}

nn::Tensor friednet_loss(nn::Tape& tape, const nn::Tensor& y_hat, const nn::Tensor& y_target,
                         const nn::Tensor& t_hat, const nn::Tensor& t_true, double gamma) {
  nn::Tensor sample_term = nn::squared_error(tape, y_hat, y_target);
  nn::Tensor location_term = nn::squared_error(tape, t_hat, t_true);
  return nn::add(tape, sample_term, nn::scale(tape, location_term, gamma));
}

namespace {

nn::Tensor rows_tensor(const Eigen::MatrixXd& m, const std::vector<std::size_t>& idx,
                       std::size_t lo, std::size_t hi) {
  const auto cols = std::size_t(m.cols());
  std::vector<double> v;
  v.reserve((hi - lo) * cols);
  for (std::size_t r = lo; r < hi; ++r)
    for (std::size_t c = 0; c < cols; ++c) v.push_back(m(idx[r], c));
  return nn::Tensor::from(std::move(v), {hi - lo, cols});
}

struct BatchIterator {
  std::vector<std::size_t> order;
  RngStream rng;
  explicit BatchIterator(std::size_t n, std::uint64_t seed)
      : rng(RngStream::substream(seed, 0x517Fu)) {
    order.resize(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
  }
  void shuffle() {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  }
};

// amplitudes fitted example-by-example against the current estimated kernel;
// treated as constants by the graph
nn::Tensor ls_amplitude_tensor(const DecoderParams& dec, const nn::Tensor& noisy,
                               const nn::Tensor& t_hat) {
  const auto B = t_hat.shape()[0];
  const auto K = t_hat.shape()[1];
  const auto N = noisy.shape()[1];
  std::vector<double> out(B * K);
  std::vector<double> locs(K), samples(N);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t k = 0; k < K; ++k) locs[k] = t_hat.values()[b * K + k];
    for (std::size_t n = 0; n < N; ++n) samples[n] = noisy.values()[b * N + n];
    const auto amps = decoder_amplitudes_ls(dec, locs, samples);
    for (std::size_t k = 0; k < K; ++k) out[b * K + k] = amps[k];
  }
  return nn::Tensor::from(std::move(out), {B, K});
}

void log_append(std::vector<std::vector<double>>& rows, int stage, int epoch, double loss) {
  rows.push_back({double(stage), double(epoch), loss});
}

void check_finite(double loss, const char* stage) {
  if (!std::isfinite(loss))
    throw NumericalError(std::string("friednet training diverged at ") + stage);
}

// encoder-only warm start on the location loss
void stage_direct_inference(EncoderParams& enc, const FriedDataset& data,
                            const FriedTrainConfig& cfg,
                            std::vector<std::vector<double>>& log_rows) {
  auto params = enc.parameters();
  nn::AdamState adam(cfg.lr_encoder);
  adam.attach(params);
  BatchIterator batches(data.count(), cfg.seed);
  std::vector<std::size_t> idx(data.count());
  for (int epoch = 0; epoch < cfg.epochs_stage1; ++epoch) {
    batches.shuffle();
    double epoch_loss = 0.0;
    std::size_t pos = 0;
    while (pos < batches.order.size()) {
      const std::size_t hi = std::min(pos + cfg.batch_size, batches.order.size());
      for (auto& p : params) p.zero_grad();
      nn::Tape tape;
      nn::Tensor x = rows_tensor(data.noisy, batches.order, pos, hi);
      nn::Tensor t_true = rows_tensor(data.locations, batches.order, pos, hi);
      nn::Tensor t_hat = encoder_forward(tape, enc, x);
      nn::Tensor loss =
          nn::scale(tape, nn::squared_error(tape, t_hat, t_true), 1.0 / double(hi - pos));
      check_finite(loss.value(), "stage 1");
      tape.backward(loss);
      adam.step(params);
      epoch_loss += loss.value() * double(hi - pos);
      pos = hi;
    }
    log_append(log_rows, 1, epoch, epoch_loss / data.count());
  }
}

}  // namespace

void train_encoder_only(EncoderParams& enc, const FriedDataset& data,
                        const FriedTrainConfig& cfg) {
  std::vector<std::vector<double>> log_rows;
  stage_direct_inference(enc, data, cfg, log_rows);
  if (!cfg.log_csv.empty()) csv::write_table(cfg.log_csv, "stage,epoch,mean_loss", log_rows);
}

void train_known_kernel(EncoderParams& enc, const DecoderParams& dec_fixed,
                        const FriedDataset& data, const FriedTrainConfig& cfg) {
  if (data.clean.rows() != data.noisy.rows() || data.amplitudes.rows() != data.noisy.rows())
    throw ConfigError("train_known_kernel: needs noiseless samples and true amplitudes");
  std::vector<std::vector<double>> log_rows;
  stage_direct_inference(enc, data, cfg, log_rows);

  auto params = enc.parameters();
  nn::AdamState adam(cfg.lr_encoder);
  adam.attach(params);
  BatchIterator batches(data.count(), cfg.seed + 1);
  for (int epoch = 0; epoch < cfg.epochs_stage2; ++epoch) {
    batches.shuffle();
    double epoch_loss = 0.0;
    std::size_t pos = 0;
    while (pos < batches.order.size()) {
      const std::size_t hi = std::min(pos + cfg.batch_size, batches.order.size());
      for (auto& p : params) p.zero_grad();
      nn::Tape tape;
      nn::Tensor x = rows_tensor(data.noisy, batches.order, pos, hi);
      nn::Tensor y_clean = rows_tensor(data.clean, batches.order, pos, hi);
      nn::Tensor t_true = rows_tensor(data.locations, batches.order, pos, hi);
      nn::Tensor amps = rows_tensor(data.amplitudes, batches.order, pos, hi);
      nn::Tensor t_hat = encoder_forward(tape, enc, x);
      nn::Tensor y_hat = decoder_forward(tape, dec_fixed, t_hat, amps);
      nn::Tensor loss = nn::scale(tape, friednet_loss(tape, y_hat, y_clean, t_hat, t_true, cfg.gamma),
                                  1.0 / double(hi - pos));
      check_finite(loss.value(), "stage 2");
      tape.backward(loss);
      adam.step(params);
      epoch_loss += loss.value() * double(hi - pos);
      pos = hi;
    }
    log_append(log_rows, 2, epoch, epoch_loss / data.count());
  }
  if (!cfg.log_csv.empty()) csv::write_table(cfg.log_csv, "stage,epoch,mean_loss", log_rows);
}

void train_unknown_kernel(EncoderParams& enc, DecoderParams& dec, const FriedDataset& data,
                          const FriedTrainConfig& cfg) {
  if (!dec.learnable) throw ConfigError("train_unknown_kernel: decoder must be learnable");
  std::vector<std::vector<double>> log_rows;
  stage_direct_inference(enc, data, cfg, log_rows);

  // stage 2: decoder only, encoder frozen
  enc.set_trainable(false);
  std::vector<nn::Tensor> dec_params = {dec.d};
  nn::AdamState adam_dec(cfg.lr_decoder);
  adam_dec.attach(dec_params);
  BatchIterator batches(data.count(), cfg.seed + 1);
  for (int epoch = 0; epoch < cfg.epochs_stage2; ++epoch) {
    batches.shuffle();
    double epoch_loss = 0.0;
    std::size_t pos = 0;
    while (pos < batches.order.size()) {
      const std::size_t hi = std::min(pos + cfg.batch_size, batches.order.size());
      dec.d.zero_grad();
      nn::Tape tape;
      nn::Tensor x = rows_tensor(data.noisy, batches.order, pos, hi);
      nn::Tensor t_true = rows_tensor(data.locations, batches.order, pos, hi);
      nn::Tensor t_hat = encoder_forward(tape, enc, x);
      nn::Tensor amps = ls_amplitude_tensor(dec, x, t_hat);
      nn::Tensor y_hat = decoder_forward(tape, dec, t_hat, amps);
      nn::Tensor loss = nn::scale(tape, friednet_loss(tape, y_hat, x, t_hat, t_true, cfg.gamma),
                                  1.0 / double(hi - pos));
      check_finite(loss.value(), "stage 2");
      tape.backward(loss);
      adam_dec.step(dec_params);
      epoch_loss += loss.value() * double(hi - pos);
      pos = hi;
    }
    dec.normalize_peak();
    log_append(log_rows, 2, epoch, epoch_loss / data.count());
  }

  // stage 3: joint
  enc.set_trainable(true);
  auto enc_params = enc.parameters();
  nn::AdamState adam_enc(cfg.lr_encoder);
  adam_enc.attach(enc_params);
  adam_dec.attach(dec_params);
  BatchIterator batches3(data.count(), cfg.seed + 2);
  for (int epoch = 0; epoch < cfg.epochs_stage3; ++epoch) {
    batches3.shuffle();
    double epoch_loss = 0.0;
    std::size_t pos = 0;
    while (pos < batches3.order.size()) {
      const std::size_t hi = std::min(pos + cfg.batch_size, batches3.order.size());
      for (auto& p : enc_params) p.zero_grad();
      dec.d.zero_grad();
      nn::Tape tape;
      nn::Tensor x = rows_tensor(data.noisy, batches3.order, pos, hi);
      nn::Tensor t_true = rows_tensor(data.locations, batches3.order, pos, hi);
      nn::Tensor t_hat = encoder_forward(tape, enc, x);
      nn::Tensor amps = ls_amplitude_tensor(dec, x, t_hat);
      nn::Tensor y_hat = decoder_forward(tape, dec, t_hat, amps);
      nn::Tensor loss = nn::scale(tape, friednet_loss(tape, y_hat, x, t_hat, t_true, cfg.gamma),
                                  1.0 / double(hi - pos));
      check_finite(loss.value(), "stage 3");
      tape.backward(loss);
      adam_enc.step(enc_params);
      adam_dec.step(dec_params);
      epoch_loss += loss.value() * double(hi - pos);
      pos = hi;
    }
    dec.normalize_peak();
    log_append(log_rows, 3, epoch, epoch_loss / data.count());
  }
  if (!cfg.log_csv.empty()) csv::write_table(cfg.log_csv, "stage,epoch,mean_loss", log_rows);
}

Eigen::MatrixXd encoder_infer(EncoderParams& enc, const Eigen::MatrixXd& samples) {
  const auto B = std::size_t(samples.rows());
  const auto N = std::size_t(samples.cols());
  const auto K = std::size_t(enc.output_size);
  Eigen::MatrixXd t(B, K);
  constexpr std::size_t kChunk = 128;
  for (std::size_t lo = 0; lo < B; lo += kChunk) {
    const std::size_t hi = std::min(B, lo + kChunk);
    std::vector<double> v((hi - lo) * N);
    for (std::size_t r = lo; r < hi; ++r)
      for (std::size_t c = 0; c < N; ++c) v[(r - lo) * N + c] = samples(long(r), long(c));
    nn::Tape tape;
    tape.set_recording(false);
    nn::Tensor out = encoder_forward(tape, enc, nn::Tensor::from(std::move(v), {hi - lo, N}));
    for (std::size_t r = lo; r < hi; ++r)
      for (std::size_t c = 0; c < K; ++c) t(long(r), long(c)) = out.values()[(r - lo) * K + c];
  }
  return t;
}

std::vector<double> decoder_amplitudes_ls(const DecoderParams& dec,
                                          const std::vector<double>& locations,
                                          const std::vector<double>& samples) {
  const int N = dec.sample_count;
  const int K = static_cast<int>(locations.size());
  if (static_cast<int>(samples.size()) != N)
    throw ConfigError("decoder_amplitudes_ls: sample count mismatch");
  Eigen::MatrixXd design(N, K);
  const auto& d = dec.d.values();
  for (int k = 0; k < K; ++k) {
    const double base = locations[k] / dec.sampling_period;
    for (int n = 0; n < N; ++n)
      design(n, k) = eval_piecewise(d, dec.delta, base - double(dec.first_index + n));
  }
  Eigen::Map<const Eigen::VectorXd> y(samples.data(), N);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  const Eigen::VectorXd a = cod.solve(y);
  return std::vector<double>(a.data(), a.data() + K);
}

std::vector<double> finetune_datum(const std::vector<double>& t_init, const DecoderParams& dec,
                                   const std::vector<double>& noisy_samples, int steps, double lr) {
  const auto K = t_init.size();
  std::vector<double> t = t_init;
  nn::Tensor target = nn::Tensor::from(noisy_samples, {1, noisy_samples.size()});

  auto sample_error = [&](const std::vector<double>& loc, const std::vector<double>& amp) {
    double acc = 0.0;
    for (int n = 0; n < dec.sample_count; ++n) {
      double y = 0.0;
      for (std::size_t k = 0; k < K; ++k)
        y += amp[k] * eval_piecewise(dec.d.values(), dec.delta,
                                     loc[k] / dec.sampling_period - double(dec.first_index + n));
      const double diff = y - noisy_samples[n];
      acc += diff * diff;
    }
    return acc;
  };

  std::vector<double> amps = decoder_amplitudes_ls(dec, t, noisy_samples);
  double best = sample_error(t, amps);
  double step_size = lr;
  for (int it = 0; it < steps; ++it) {
    nn::Tape tape;
    nn::Tensor t_var = nn::Tensor::from(t, {1, K}, true);
    nn::Tensor amp_var = nn::Tensor::from(amps, {1, K});
    nn::Tensor y_hat = decoder_forward(tape, dec, t_var, amp_var);
    nn::Tensor loss = nn::squared_error(tape, y_hat, target);
    t_var.zero_grad();
    tape.backward(loss);
    std::vector<double> cand(K);
    for (std::size_t k = 0; k < K; ++k) cand[k] = t[k] - step_size * t_var.grad()[k];
    const auto cand_amps = decoder_amplitudes_ls(dec, cand, noisy_samples);
    const double err = sample_error(cand, cand_amps);
    if (err <= best) {
      t = cand;
      amps = cand_amps;
      best = err;
    } else {
      step_size *= 0.5;  // reject and retry smaller
      if (step_size < 1e-12) break;
    }
  }
  return t;
}

void save_friednet(const std::filesystem::path& path, EncoderParams& enc, DecoderParams* dec) {
  auto named = enc.named_parameters();
  std::vector<double> meta = {double(enc.input_size), double(enc.output_size)};
  named.emplace_back("meta", nn::Tensor::from(meta, {2}));
  if (dec) {
    named.emplace_back("decoder.d", dec->d);
    named.emplace_back("decoder.meta",
                       nn::Tensor::from({dec->delta, dec->sampling_period, double(dec->first_index),
                                         double(dec->sample_count), dec->learnable ? 1.0 : 0.0},
                                        {5}));
  }
  nn::save_checkpoint(path, named);
}

bool load_friednet(const std::filesystem::path& path, EncoderParams& enc, DecoderParams* dec) {
  if (!std::filesystem::exists(path)) return false;
  auto tensors = nn::load_checkpoint(path);
  auto find = [&](const std::string& name) -> nn::Tensor* {
    for (auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  };
  for (auto& [name, tensor] : enc.named_parameters()) {
    nn::Tensor* src = find(name);
    if (!src || src->size() != tensor.size()) throw ConfigError("load_friednet: missing " + name);
    nn::Tensor dst = tensor;
    dst.values() = src->values();
  }
  if (dec) {
    nn::Tensor* d = find("decoder.d");
    nn::Tensor* meta = find("decoder.meta");
    if (!d || !meta) throw ConfigError("load_friednet: missing decoder tensors");
    dec->d = nn::Tensor::from(d->values(), d->shape(), dec->learnable);
    dec->delta = meta->values()[0];
    dec->sampling_period = meta->values()[1];
    dec->first_index = static_cast<int>(meta->values()[2]);
    dec->sample_count = static_cast<int>(meta->values()[3]);
    dec->learnable = meta->values()[4] != 0.0;
  }
  return true;
}

}  // namespace fri
