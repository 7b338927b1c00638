#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "msb/autograd.hpp"
#include "msb/monarch.hpp"

namespace msb {

/// Learnable pieces of one Surrogate Attention Block.
///
/// X (N×D_in) is split into `heads` contiguous column chunks of width
/// d_head = D_in / heads. Each chunk is right-multiplied by its own square
/// Monarch of size pad_to_square(d_head) for Q, K and V. The two sequence
/// Monarchs act from the left on the zero-padded sequence axis.
struct SurrogateAttentionParams {
  std::size_t heads = 1;
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  std::size_t d_head = 0;
  SquarePadding head_pad;
  SquarePadding seq_pad;
  std::vector<MonarchMatrix> query;
  std::vector<MonarchMatrix> key;
  std::vector<MonarchMatrix> value;
  MonarchMatrix seq_first;   // applied to Q
  MonarchMatrix seq_second;  // applied to (M1·Q) ⊙ K
  std::vector<Tensor> out_proj;  // per head, d_head×d_out

  /// Random init: kaiming-block Monarchs, out_proj ~ normal(0, 1/d_in).
  static SurrogateAttentionParams random(std::size_t seq_len, std::size_t d_in, std::size_t d_out,
                                         std::size_t heads, std::mt19937_64& rng);
  /// Identity-block Monarchs and out_proj stacked from identity blocks
  /// (requires d_out == d_in).
  static SurrogateAttentionParams identity(std::size_t seq_len, std::size_t d_in, std::size_t heads);

  std::size_t param_count() const;
  /// Every learnable tensor, in a fixed order.
  std::vector<Tensor*> parameters();
  std::vector<const MonarchMatrix*> monarchs() const;
};

struct HeadProjections {
  std::vector<Tensor> q, k, v;  // per head, N×d_head
};

struct HeadProjectionVars {
  std::vector<Var> q, k, v;
};

/// Per-head Q/K/V through the structured projections.
HeadProjections structured_projection(const Tensor& x, const SurrogateAttentionParams& params);
HeadProjectionVars structured_projection(Var x, const SurrogateAttentionParams& params);

/// Sequence mixing of one head: (M2·((M1·Q) ⊙ K)) ⊙ V with rows lifted to the
/// padded sequence length and projected back. No softmax, no scaling.
Var sequence_mix(Var q, Var k, Var v, const MonarchMatrix& first, const MonarchMatrix& second,
                 const SquarePadding& seq_pad);
Tensor sequence_mix(const Tensor& q, const Tensor& k, const Tensor& v, const MonarchMatrix& first,
                    const MonarchMatrix& second, const SquarePadding& seq_pad);

/// Σ_h sequence_mix(Q_h, K_h, V_h)·W_out_h.
Var surrogate_attention_forward(Var x, const SurrogateAttentionParams& params);
Tensor surrogate_attention_forward(const Tensor& x, const SurrogateAttentionParams& params);

/// Surrogate FFN: project(σ(lift(X)·M1)·M2) over the feature axis.
struct SurrogateFFNParams {
  SquarePadding feature_pad;
  MonarchMatrix first;
  MonarchMatrix second;
  Activation sigma = Activation::gelu;

  static SurrogateFFNParams random(std::size_t d_in, Activation sigma, std::mt19937_64& rng);
  std::size_t param_count() const { return first.param_count() + second.param_count(); }
  std::vector<Tensor*> parameters();
};

Var surrogate_ffn_forward(Var x, const SurrogateFFNParams& params);
Tensor surrogate_ffn_forward(const Tensor& x, const SurrogateFFNParams& params);

enum class NormStyle { post_ln, pre_ln };

NormStyle parse_norm_style(const std::string& name);
std::string to_string(NormStyle style);

/// Applied to each sublayer output before the residual add. Only the training
/// harness passes one.
using SublayerHook = std::function<Var(Var)>;

/// One encoder layer with both sublayers replaced.
struct EnhancedLayerParams {
  SurrogateAttentionParams attn;
  SurrogateFFNParams ffn;
  NormStyle norm = NormStyle::post_ln;
  Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;

  static EnhancedLayerParams random(std::size_t seq_len, std::size_t d_model, std::size_t heads, Activation sigma,
                                    NormStyle norm, std::mt19937_64& rng);
  std::size_t param_count() const;
  std::vector<Tensor*> parameters();
};

/// post-ln: X₁ = LN(X + SAB(X)), Y = LN(X₁ + SFB(X₁)).
/// pre-ln:  X₁ = X + SAB(LN(X)), Y = X₁ + SFB(LN(X₁)).
Var enhanced_layer_forward(Var x, const EnhancedLayerParams& params, const SublayerHook& hook = {});
Tensor enhanced_layer_forward(const Tensor& x, const EnhancedLayerParams& params);

}  // namespace msb
