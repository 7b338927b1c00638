#include "msb/reference.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "msb/errors.hpp"

namespace msb {

DenseMHSAParams DenseMHSAParams::random(std::size_t d_in, std::size_t d_k, std::size_t d_v, std::size_t d_out,
                                        std::size_t heads, std::mt19937_64& rng) {
  DenseMHSAParams p;
  p.heads = heads;
  const double s_in = 1.0 / std::sqrt(static_cast<double>(d_in));
  for (std::size_t h = 0; h < heads; ++h) {
    p.w_query.push_back(Tensor::randn({d_in, d_k}, rng, s_in));
    p.w_key.push_back(Tensor::randn({d_in, d_k}, rng, s_in));
    p.w_value.push_back(Tensor::randn({d_in, d_v}, rng, s_in));
  }
  p.w_out = Tensor::randn({heads * d_v, d_out}, rng, 1.0 / std::sqrt(static_cast<double>(heads * d_v)));
  return p;
}

std::size_t DenseMHSAParams::param_count() const {
  std::size_t total = w_out.size();
  for (std::size_t h = 0; h < heads; ++h) total += w_query[h].size() + w_key[h].size() + w_value[h].size();
  return total;
}

std::vector<Tensor*> DenseMHSAParams::parameters() {
  std::vector<Tensor*> out;
  for (std::size_t h = 0; h < heads; ++h) {
    out.push_back(&w_query[h]);
    out.push_back(&w_key[h]);
    out.push_back(&w_value[h]);
  }
  out.push_back(&w_out);
  return out;
}

namespace {

void check_mhsa_shapes(const Shape& x, const DenseMHSAParams& p) {
  if (p.heads == 0 || p.w_query.size() != p.heads || p.w_key.size() != p.heads || p.w_value.size() != p.heads) {
    throw DimensionError("dense_mhsa: weight lists do not match head count " + std::to_string(p.heads));
  }
  if (x.size() != 2) throw DimensionError("dense_mhsa: expected a matrix input, got " + shape_str(x));
  std::size_t d_v_total = 0;
  for (std::size_t h = 0; h < p.heads; ++h) {
    const auto& wq = p.w_query[h].shape();
    const auto& wk = p.w_key[h].shape();
    const auto& wv = p.w_value[h].shape();
    if (wq[0] != x[1] || wk[0] != x[1] || wv[0] != x[1] || wq != wk) {
      throw DimensionError("dense_mhsa: head " + std::to_string(h) + " weights " + shape_str(wq) + "/" +
                           shape_str(wk) + "/" + shape_str(wv) + " do not fit input " + shape_str(x));
    }
    d_v_total += wv[1];
  }
  if (p.w_out.rows() != d_v_total) {
    throw DimensionError("dense_mhsa: output projection " + shape_str(p.w_out.shape()) + " needs " +
                         std::to_string(d_v_total) + " rows");
  }
}

Var head_scores(Var x, Var wq, Var wk) {
  const double d_k = static_cast<double>(wq.shape()[1]);
  return softmax_rows(scale(matmul(matmul(x, wq), transpose(matmul(x, wk))), 1.0 / std::sqrt(d_k)));
}

}  // namespace

Var dense_mhsa_forward(Var x, const DenseMHSAParams& params) {
  check_mhsa_shapes(x.shape(), params);
  Tape& tape = x.tape();
  std::vector<Var> heads;
  for (std::size_t h = 0; h < params.heads; ++h) {
    Var scores = head_scores(x, tape.param(params.w_query[h]), tape.param(params.w_key[h]));
    heads.push_back(matmul(scores, matmul(x, tape.param(params.w_value[h]))));
  }
  return matmul(concat_cols(heads), tape.param(params.w_out));
}

Tensor dense_mhsa_forward(const Tensor& x, const DenseMHSAParams& params) {
  Tape tape(false);
  return dense_mhsa_forward(tape.constant(x), params).value();
}

std::vector<Tensor> dense_mhsa_scores(const Tensor& x, const DenseMHSAParams& params) {
  check_mhsa_shapes(x.shape(), params);
  Tape tape(false);
  Var xv = tape.constant(x);
  std::vector<Tensor> out;
  for (std::size_t h = 0; h < params.heads; ++h) {
    out.push_back(head_scores(xv, tape.param(params.w_query[h]), tape.param(params.w_key[h])).value());
  }
  return out;
}

Var dense_ffn_forward(Var x, Var w1, Var w2, Activation sigma) {
  if (w1.shape() != w2.shape()) {
    throw DimensionError("dense_ffn: W1 " + shape_str(w1.shape()) + " and W2 " + shape_str(w2.shape()) + " differ");
  }
  return matmul(activation(matmul(x, w1), sigma), transpose(w2));
}

Tensor dense_ffn_forward(const Tensor& x, const Tensor& w1, const Tensor& w2, Activation sigma) {
  Tape tape(false);
  return dense_ffn_forward(tape.constant(x), tape.constant(w1), tape.constant(w2), sigma).value();
}

AttentionPattern AttentionPattern::diagonal(std::size_t n, std::vector<double> f) {
  AttentionPattern p;
  p.kind = Kind::diagonal;
  p.n = n;
  p.lambda = f.size();
  p.weights = std::move(f);
  p.validate();
  return p;
}

AttentionPattern AttentionPattern::vertical(std::size_t n, std::vector<std::size_t> columns, std::vector<double> g) {
  AttentionPattern p;
  p.kind = Kind::vertical;
  p.n = n;
  p.lambda = columns.size();
  p.columns = std::move(columns);
  p.weights = std::move(g);
  p.validate();
  return p;
}

std::vector<long> AttentionPattern::offsets() const {
  const long half = static_cast<long>(lambda / 2);
  std::vector<long> out;
  for (long d = -half; d <= half; ++d) out.push_back(d);
  return out;
}

void AttentionPattern::validate() const {
  if (n == 0 || lambda == 0 || lambda > n) {
    throw ConfigError("attention pattern needs 1 <= lambda <= N, got lambda=" + std::to_string(lambda) +
                      " N=" + std::to_string(n));
  }
  if (weights.size() != lambda) throw ConfigError("attention pattern needs one weight per member");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0 && w <= 1.0)) throw ConfigError("pattern weights must lie in (0, 1]");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("pattern weights must sum to 1");
  if (kind == Kind::diagonal) {
    if (lambda % 2 == 0) {
      throw ConfigError("diagonal pattern needs an odd lambda, got " + std::to_string(lambda));
    }
  } else {
    if (columns.size() != lambda) throw ConfigError("vertical pattern needs lambda columns");
    std::set<std::size_t> seen;
    for (std::size_t c : columns) {
      if (c >= n) throw ConfigError("vertical pattern column " + std::to_string(c) + " is out of range");
      if (!seen.insert(c).second) throw ConfigError("vertical pattern repeats column " + std::to_string(c));
    }
  }
}

std::vector<double> random_pattern_weights(std::size_t count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.1, 1.0);
  std::vector<double> w(count);
  double total = 0.0;
  for (auto& v : w) total += (v = dist(rng));
  for (auto& v : w) v /= total;
  return w;
}

Tensor pattern_matrix(const AttentionPattern& pattern) {
  pattern.validate();
  const std::size_t n = pattern.n;
  Tensor a({n, n});
  if (pattern.kind == AttentionPattern::Kind::diagonal) {
    const auto offsets = pattern.offsets();
    const long nl = static_cast<long>(n);
    for (std::size_t q = 0; q < n; ++q) {
      for (std::size_t i = 0; i < offsets.size(); ++i) {
        const long k = ((static_cast<long>(q) - offsets[i]) % nl + nl) % nl;
        a(q, static_cast<std::size_t>(k)) = pattern.weights[i];
      }
    }
  } else {
    for (std::size_t q = 0; q < n; ++q)
      for (std::size_t i = 0; i < pattern.columns.size(); ++i) a(q, pattern.columns[i]) = pattern.weights[i];
  }
  return a;
}

Tensor patterned_mhsa_forward(const Tensor& x, std::span<const Tensor> scores, std::span<const Tensor> weights) {
  if (scores.size() != weights.size() || scores.empty()) {
    throw DimensionError("patterned_mhsa: " + std::to_string(scores.size()) + " scoring matrices for " +
                         std::to_string(weights.size()) + " weight matrices");
  }
  Tensor out;
  for (std::size_t h = 0; h < scores.size(); ++h) {
    Tensor head = kernels::matmul(kernels::matmul(scores[h], x), weights[h]);
    out = h == 0 ? std::move(head) : kernels::add(out, head);
  }
  return out;
}

Tensor sum_of_convs_forward(const Tensor& x, std::span<const ConvKernel> kernels) {
  if (kernels.empty() || kernels.front().empty()) throw DimensionError("sum_of_convs: no taps");
  const std::size_t n = x.rows(), d_in = x.cols();
  const std::size_t d_out = kernels.front().begin()->second.cols();
  const long nl = static_cast<long>(n);
  Tensor out({n, d_out});
  for (const ConvKernel& kernel : kernels) {
    for (const auto& [delta, w] : kernel) {
      if (w.rows() != d_in || w.cols() != d_out) {
        throw DimensionError("sum_of_convs: tap " + std::to_string(delta) + " has shape " + shape_str(w.shape()));
      }
      for (std::size_t q = 0; q < n; ++q) {
        const auto src = static_cast<std::size_t>(((static_cast<long>(q) - delta) % nl + nl) % nl);
        for (std::size_t i = 0; i < d_in; ++i) {
          const double xv = x(src, i);
          for (std::size_t j = 0; j < d_out; ++j) out(q, j) += xv * w(i, j);
        }
      }
    }
  }
  return out;
}

}  // namespace msb
