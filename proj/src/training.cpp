#include "msb/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "msb/errors.hpp"

namespace msb {

DenseLayerParams DenseLayerParams::random(std::size_t d_model, std::size_t heads, std::size_t d_ff,
                                          Activation sigma, NormStyle norm, std::mt19937_64& rng) {
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("heads=" + std::to_string(heads) + " does not divide d_model=" + std::to_string(d_model));
  }
  DenseLayerParams p;
  const std::size_t dh = d_model / heads;
  p.attn = DenseMHSAParams::random(d_model, dh, dh, d_model, heads, rng);
  p.ffn_w1 = Tensor::randn({d_model, d_ff}, rng, 1.0 / std::sqrt(static_cast<double>(d_model)));
  p.ffn_w2 = Tensor::randn({d_model, d_ff}, rng, 1.0 / std::sqrt(static_cast<double>(d_ff)));
  p.sigma = sigma;
  p.norm = norm;
  p.ln1_gain = Tensor({d_model}, 1.0);
  p.ln1_bias = Tensor({d_model});
  p.ln2_gain = Tensor({d_model}, 1.0);
  p.ln2_bias = Tensor({d_model});
  return p;
}

std::vector<Tensor*> DenseLayerParams::parameters() {
  std::vector<Tensor*> out = attn.parameters();
  for (Tensor* t : {&ffn_w1, &ffn_w2, &ln1_gain, &ln1_bias, &ln2_gain, &ln2_bias}) out.push_back(t);
  return out;
}

Var dense_layer_forward(Var x, const DenseLayerParams& params, const SublayerHook& hook) {
  Tape& tape = x.tape();
  auto ln1 = [&](Var v) { return layer_norm(v, tape.param(params.ln1_gain), tape.param(params.ln1_bias)); };
  auto ln2 = [&](Var v) { return layer_norm(v, tape.param(params.ln2_gain), tape.param(params.ln2_bias)); };
  auto wrap = [&](Var v) { return hook ? hook(v) : v; };
  auto ffn = [&](Var v) {
    return dense_ffn_forward(v, tape.param(params.ffn_w1), tape.param(params.ffn_w2), params.sigma);
  };
  if (params.norm == NormStyle::post_ln) {
    Var x1 = ln1(add(x, wrap(dense_mhsa_forward(x, params.attn))));
    return ln2(add(x1, wrap(ffn(x1))));
  }
  Var x1 = add(x, wrap(dense_mhsa_forward(ln1(x), params.attn)));
  return add(x1, wrap(ffn(ln2(x1))));
}

Forecaster::Forecaster(const ModelConfig& config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const std::size_t d = config_.d_model, n = config_.seq_len;
  embed_w_ = Tensor::randn({1, d}, rng);
  embed_b_ = Tensor({d});
  for (std::size_t l = 0; l < config_.layers; ++l) {
    if (config_.variant == Variant::surrogate) {
      surrogate_.push_back(EnhancedLayerParams::random(n, d, config_.heads, config_.sigma, config_.norm, rng));
    } else {
      dense_.push_back(
          DenseLayerParams::random(d, config_.heads, config_.ffn_width(), config_.sigma, config_.norm, rng));
    }
  }
  head_w_ = Tensor::randn({n * d, config_.horizon}, rng, 1.0 / std::sqrt(static_cast<double>(n * d)));
  head_b_ = Tensor({config_.horizon});
}

Var Forecaster::forward(Var input, const SublayerHook& hook) const {
  if (input.shape() != Shape{config_.seq_len, 1}) {
    throw DimensionError("forecaster expects a " + std::to_string(config_.seq_len) + "x1 window, got " +
                         shape_str(input.shape()));
  }
  Tape& tape = input.tape();
  Var x = add_row(matmul(input, tape.param(embed_w_)), tape.param(embed_b_));
  for (const auto& layer : surrogate_) x = enhanced_layer_forward(x, layer, hook);
  for (const auto& layer : dense_) x = dense_layer_forward(x, layer, hook);
  Var flat = reshape(x, {1, config_.seq_len * config_.d_model});
  Var y = add_row(matmul(flat, tape.param(head_w_)), tape.param(head_b_));
  return reshape(y, {config_.horizon, 1});
}

Tensor Forecaster::predict(const Tensor& input) const {
  Tape tape(false);
  return forward(tape.constant(input)).value();
}

std::vector<Tensor*> Forecaster::parameters() {
  std::vector<Tensor*> out{&embed_w_, &embed_b_};
  for (auto& layer : surrogate_)
    for (Tensor* t : layer.parameters()) out.push_back(t);
  for (auto& layer : dense_)
    for (Tensor* t : layer.parameters()) out.push_back(t);
  out.push_back(&head_w_);
  out.push_back(&head_b_);
  return out;
}

std::size_t Forecaster::param_count() {
  std::size_t total = 0;
  for (Tensor* t : parameters()) total += t->size();
  return total;
}

Adam::Adam(std::vector<Tensor*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (Tensor* p : params_) {
    m_.emplace_back(p->shape());
    v_.emplace_back(p->shape());
  }
}

void Adam::step(const std::vector<Tensor>& grads) {
  if (grads.size() != params_.size()) throw ContractError("Adam::step: gradient count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = *params_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = grads[k][i];
      m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g;
      v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g * g;
      p[i] -= lr_ * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps_);
    }
  }
}

std::pair<double, double> evaluate(const Forecaster& model, const std::vector<Window>& windows) {
  double se = 0.0, ae = 0.0;
  std::size_t count = 0;
  for (const auto& w : windows) {
    const Tensor pred = model.predict(w.input);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double e = pred[i] - w.target[i];
      se += e * e;
      ae += std::abs(e);
    }
    count += pred.size();
  }
  if (count == 0) return {0.0, 0.0};
  return {se / static_cast<double>(count), ae / static_cast<double>(count)};
}

namespace {

std::vector<Tensor> snapshot(const std::vector<Tensor*>& params) {
  std::vector<Tensor> out;
  for (const Tensor* p : params) out.push_back(*p);
  return out;
}

}  // namespace

TrainingResult train(const ModelConfig& model_config, const SineDatasetSpec& data, const TrainConfig& config) {
  if (config.batch == 0) throw ConfigError("batch size must be positive");
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  ModelConfig mc = model_config;
  if (mc.seq_len != data.input_len || mc.horizon != data.horizon) {
    throw ConfigError("model window " + std::to_string(mc.seq_len) + "->" + std::to_string(mc.horizon) +
                      " does not match dataset window " + std::to_string(data.input_len) + "->" +
                      std::to_string(data.horizon));
  }
  const auto t0 = std::chrono::steady_clock::now();
  const SineDataset ds = generate_sine(data);
  Forecaster model(mc);
  const auto params = model.parameters();
  Adam adam(params, config.lr);
  std::mt19937_64 rng(mc.seed ^ 0x9e3779b97f4a7c15ULL);

  TrainingResult result;
  result.param_count = model.param_count();
  const double keep = 1.0 - config.dropout;
  const SublayerHook dropout = [&](Var v) {
    if (config.dropout == 0.0) return v;
    std::bernoulli_distribution coin(keep);
    Tensor mask(v.shape());
    for (auto& m : mask.data()) m = coin(rng) ? 1.0 / keep : 0.0;
    return elementwise_mul(v, v.tape().constant(std::move(mask)));
  };

  EpochStats initial{0, evaluate(model, ds.train).first, evaluate(model, ds.val).first};
  result.curve.push_back(initial);
  result.best_epoch = 0;
  result.best_val_loss = initial.val_loss;
  std::vector<Tensor> best = snapshot(params);

  std::vector<std::size_t> order(ds.train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= config.epochs && !result.failed; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t stop = std::min(order.size(), start + config.batch);
      Tape tape;
      Var total;
      for (std::size_t i = start; i < stop; ++i) {
        const Window& w = ds.train[order[i]];
        Var l = mse_loss(model.forward(tape.constant(w.input), dropout), tape.constant(w.target));
        total = i == start ? l : add(total, l);
      }
      Var loss = scale(total, 1.0 / static_cast<double>(stop - start));
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        result.failed = true;
        result.failure = "training loss became non-finite at epoch " + std::to_string(epoch);
        break;
      }
      tape.backward(loss);
      std::vector<Tensor> grads;
      for (Tensor* p : params) grads.push_back(tape.grad_of(*p));
      adam.step(grads);
      loss_sum += value;
      ++batches;
    }
    if (result.failed) break;
    EpochStats stats{epoch, loss_sum / static_cast<double>(batches), evaluate(model, ds.val).first};
    if (!std::isfinite(stats.val_loss)) {
      result.failed = true;
      result.failure = "validation loss became non-finite at epoch " + std::to_string(epoch);
    }
    result.curve.push_back(stats);
    if (stats.val_loss < result.best_val_loss) {
      result.best_val_loss = stats.val_loss;
      result.best_epoch = epoch;
      best = snapshot(params);
    }
  }

  for (std::size_t k = 0; k < params.size(); ++k) *params[k] = best[k];
  std::tie(result.test_mse, result.test_mae) = evaluate(model, ds.test);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace msb
