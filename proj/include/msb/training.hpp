#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "msb/autograd.hpp"
#include "msb/bench.hpp"
#include "msb/reference.hpp"
#include "msb/surrogate.hpp"

namespace msb {

/// Dense baseline layer: softmax MHSA and σ(X·W1)·W2ᵀ, same residual styles
/// as the enhanced layer.
struct DenseLayerParams {
  DenseMHSAParams attn;
  Tensor ffn_w1, ffn_w2;  // both D_model×D_ff
  Activation sigma = Activation::gelu;
  NormStyle norm = NormStyle::post_ln;
  Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;

  static DenseLayerParams random(std::size_t d_model, std::size_t heads, std::size_t d_ff, Activation sigma,
                                 NormStyle norm, std::mt19937_64& rng);
  std::vector<Tensor*> parameters();
};

Var dense_layer_forward(Var x, const DenseLayerParams& params, const SublayerHook& hook = {});

class Forecaster {
 public:
  explicit Forecaster(const ModelConfig& config);

  /// input: N×1 window. Returns L_out×1.
  Var forward(Var input, const SublayerHook& hook = {}) const;
  Tensor predict(const Tensor& input) const;

  std::vector<Tensor*> parameters();
  std::size_t param_count();
  const ModelConfig& config() const { return config_; }

 private:
  ModelConfig config_;
  Tensor embed_w_, embed_b_;
  std::vector<EnhancedLayerParams> surrogate_;
  std::vector<DenseLayerParams> dense_;
  Tensor head_w_, head_b_;
};

/// Adam with bias correction.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(const std::vector<Tensor>& grads);

 private:
  std::vector<Tensor*> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct TrainConfig {
  std::size_t epochs = 200;
  double lr = 3e-3;
  std::size_t batch = 32;
  double dropout = 0.05;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // epoch 0: evaluated before any update
  double val_loss = 0.0;
};

struct TrainingResult {
  std::vector<EpochStats> curve;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  double test_mse = 0.0;
  double test_mae = 0.0;
  std::size_t param_count = 0;
  double seconds = 0.0;
  bool failed = false;
  std::string failure;
};

/// (MSE, MAE) of the forecaster over a window set.
std::pair<double, double> evaluate(const Forecaster& model, const std::vector<Window>& windows);

TrainingResult train(const ModelConfig& model, const SineDatasetSpec& data, const TrainConfig& config);

}  // namespace msb
