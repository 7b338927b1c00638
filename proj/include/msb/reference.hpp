#pragma once

#include <cstddef>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "msb/autograd.hpp"
#include "msb/tensor.hpp"

namespace msb {

/// Standard multi-head self-attention weights.
struct DenseMHSAParams {
  std::size_t heads = 1;
  std::vector<Tensor> w_query;  // D_in×D_k per head
  std::vector<Tensor> w_key;    // D_in×D_k per head
  std::vector<Tensor> w_value;  // D_in×D_v per head
  Tensor w_out;                 // (H·D_v)×D_out

  static DenseMHSAParams random(std::size_t d_in, std::size_t d_k, std::size_t d_v, std::size_t d_out,
                                std::size_t heads, std::mt19937_64& rng);
  std::size_t param_count() const;
  std::vector<Tensor*> parameters();
};

/// concat_h[softmax(Q_h K_hᵀ/√D_k)·X·W_val_h]·W_out.
Var dense_mhsa_forward(Var x, const DenseMHSAParams& params);
Tensor dense_mhsa_forward(const Tensor& x, const DenseMHSAParams& params);
/// Per-head softmax scoring matrices, for inspection and tests.
std::vector<Tensor> dense_mhsa_scores(const Tensor& x, const DenseMHSAParams& params);

/// σ(X·W1)·W2ᵀ with W1, W2 both D_in×D_m.
Var dense_ffn_forward(Var x, Var w1, Var w2, Activation sigma);
Tensor dense_ffn_forward(const Tensor& x, const Tensor& w1, const Tensor& w2, Activation sigma);

/// Query-independent diagonal or vertical scoring-matrix generator.
///
/// diagonal: `weights[i]` is f(δ) for δ = i − ⌊λ/2⌋, offsets wrap circularly.
/// vertical: `weights[i]` is g(columns[i]).
struct AttentionPattern {
  enum class Kind { diagonal, vertical };

  Kind kind = Kind::diagonal;
  std::size_t n = 0;
  std::size_t lambda = 1;
  std::vector<double> weights;
  std::vector<std::size_t> columns;

  static AttentionPattern diagonal(std::size_t n, std::vector<double> f);
  static AttentionPattern vertical(std::size_t n, std::vector<std::size_t> columns, std::vector<double> g);

  /// Offsets −⌊λ/2⌋..⌊λ/2⌋ matching `weights` for the diagonal kind.
  std::vector<long> offsets() const;
  /// Throws ConfigError if the pattern is malformed.
  void validate() const;
};

/// Weights drawn uniform(0.1, 1) then normalized to sum to 1.
std::vector<double> random_pattern_weights(std::size_t count, std::mt19937_64& rng);

/// Materialized N×N scoring matrix; every row sums to 1.
Tensor pattern_matrix(const AttentionPattern& pattern);

/// Σ_h A_h·X·W_h with externally imposed scoring matrices.
Tensor patterned_mhsa_forward(const Tensor& x, std::span<const Tensor> scores, std::span<const Tensor> weights);

/// Matrix-valued taps of one head: offset δ → D_in×D_out.
using ConvKernel = std::map<long, Tensor>;

/// Row q of the output is Σ_h Σ_δ X[(q − δ) mod N, :]·W_δ^{(h)}.
Tensor sum_of_convs_forward(const Tensor& x, std::span<const ConvKernel> kernels);

}  // namespace msb
