#include "msb/surrogate.hpp"

#include <cmath>

#include "msb/errors.hpp"

namespace msb {
namespace {

std::size_t head_width(std::size_t d_in, std::size_t heads) {
  if (heads == 0 || d_in % heads != 0) {
    throw ConfigError("feature width " + std::to_string(d_in) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  return d_in / heads;
}

// Runs a Var-based forward on a gradient-free tape and returns the value.
template <typename F>
Tensor eval_untaped(const Tensor& x, F&& forward) {
  Tape tape(false);
  return forward(tape.constant(x)).value();
}

}  // namespace

SurrogateAttentionParams SurrogateAttentionParams::random(std::size_t seq_len, std::size_t d_in, std::size_t d_out,
                                                          std::size_t heads, std::mt19937_64& rng) {
  SurrogateAttentionParams p;
  p.heads = heads;
  p.d_in = d_in;
  p.d_out = d_out;
  p.d_head = head_width(d_in, heads);
  p.head_pad = pad_to_square(p.d_head);
  p.seq_pad = pad_to_square(seq_len);
  using Init = MonarchMatrix::Init;
  for (std::size_t h = 0; h < heads; ++h) {
    p.query.emplace_back(p.head_pad.n_pad, Init::kaiming_block, &rng);
    p.key.emplace_back(p.head_pad.n_pad, Init::kaiming_block, &rng);
    p.value.emplace_back(p.head_pad.n_pad, Init::kaiming_block, &rng);
  }
  p.seq_first = MonarchMatrix(p.seq_pad.n_pad, Init::kaiming_block, &rng);
  p.seq_second = MonarchMatrix(p.seq_pad.n_pad, Init::kaiming_block, &rng);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(d_in));
  for (std::size_t h = 0; h < heads; ++h) p.out_proj.push_back(Tensor::randn({p.d_head, d_out}, rng, stddev));
  return p;
}

SurrogateAttentionParams SurrogateAttentionParams::identity(std::size_t seq_len, std::size_t d_in,
                                                            std::size_t heads) {
  SurrogateAttentionParams p;
  p.heads = heads;
  p.d_in = d_in;
  p.d_out = d_in;
  p.d_head = head_width(d_in, heads);
  p.head_pad = pad_to_square(p.d_head);
  p.seq_pad = pad_to_square(seq_len);
  using Init = MonarchMatrix::Init;
  for (std::size_t h = 0; h < heads; ++h) {
    p.query.emplace_back(p.head_pad.n_pad, Init::identity_block);
    p.key.emplace_back(p.head_pad.n_pad, Init::identity_block);
    p.value.emplace_back(p.head_pad.n_pad, Init::identity_block);
  }
  p.seq_first = MonarchMatrix(p.seq_pad.n_pad, Init::identity_block);
  p.seq_second = MonarchMatrix(p.seq_pad.n_pad, Init::identity_block);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor w({p.d_head, d_in});
    for (std::size_t i = 0; i < p.d_head; ++i) w(i, h * p.d_head + i) = 1.0;
    p.out_proj.push_back(std::move(w));
  }
  return p;
}

std::size_t SurrogateAttentionParams::param_count() const {
  std::size_t total = seq_first.param_count() + seq_second.param_count();
  for (std::size_t h = 0; h < heads; ++h) {
    total += query[h].param_count() + key[h].param_count() + value[h].param_count() + out_proj[h].size();
  }
  return total;
}

std::vector<Tensor*> SurrogateAttentionParams::parameters() {
  std::vector<Tensor*> out;
  for (std::size_t h = 0; h < heads; ++h) {
    for (MonarchMatrix* m : {&query[h], &key[h], &value[h]}) {
      out.push_back(&m->left().blocks);
      out.push_back(&m->right().blocks);
    }
  }
  for (MonarchMatrix* m : {&seq_first, &seq_second}) {
    out.push_back(&m->left().blocks);
    out.push_back(&m->right().blocks);
  }
  for (auto& w : out_proj) out.push_back(&w);
  return out;
}

std::vector<const MonarchMatrix*> SurrogateAttentionParams::monarchs() const {
  std::vector<const MonarchMatrix*> out;
  for (std::size_t h = 0; h < heads; ++h) {
    out.push_back(&query[h]);
    out.push_back(&key[h]);
    out.push_back(&value[h]);
  }
  out.push_back(&seq_first);
  out.push_back(&seq_second);
  return out;
}

HeadProjectionVars structured_projection(Var x, const SurrogateAttentionParams& params) {
  if (x.shape().size() != 2 || x.shape()[1] != params.d_in) {
    throw DimensionError("structured_projection: expected N x " + std::to_string(params.d_in) + " input, got " +
                         shape_str(x.shape()));
  }
  if (x.shape()[0] > params.seq_pad.n_pad) {
    throw DimensionError("structured_projection: " + std::to_string(x.shape()[0]) +
                         " rows exceed the padded sequence length " + std::to_string(params.seq_pad.n_pad));
  }
  HeadProjectionVars out;
  for (std::size_t h = 0; h < params.heads; ++h) {
    Var chunk = params.head_pad.lift_cols(slice_cols(x, h * params.d_head, params.d_head));
    out.q.push_back(params.head_pad.project_cols(monarch_apply(params.query[h], chunk, Side::right)));
    out.k.push_back(params.head_pad.project_cols(monarch_apply(params.key[h], chunk, Side::right)));
    out.v.push_back(params.head_pad.project_cols(monarch_apply(params.value[h], chunk, Side::right)));
  }
  return out;
}

HeadProjections structured_projection(const Tensor& x, const SurrogateAttentionParams& params) {
  Tape tape(false);
  HeadProjectionVars vars = structured_projection(tape.constant(x), params);
  HeadProjections out;
  for (std::size_t h = 0; h < params.heads; ++h) {
    out.q.push_back(vars.q[h].value());
    out.k.push_back(vars.k[h].value());
    out.v.push_back(vars.v[h].value());
  }
  return out;
}

Var sequence_mix(Var q, Var k, Var v, const MonarchMatrix& first, const MonarchMatrix& second,
                 const SquarePadding& seq_pad) {
  if (first.size() != seq_pad.n_pad || second.size() != seq_pad.n_pad) {
    throw DimensionError("sequence_mix: monarchs of size " + std::to_string(first.size()) + "/" +
                         std::to_string(second.size()) + " for padded length " + std::to_string(seq_pad.n_pad));
  }
  if (q.shape()[0] != seq_pad.n) {
    throw DimensionError("sequence_mix: " + std::to_string(q.shape()[0]) + " rows for sequence length " +
                         std::to_string(seq_pad.n));
  }
  Var qp = seq_pad.lift_rows(q);
  Var kp = seq_pad.lift_rows(k);
  Var vp = seq_pad.lift_rows(v);
  Var scores = elementwise_mul(monarch_apply(first, qp, Side::left), kp);
  Var mixed = elementwise_mul(monarch_apply(second, scores, Side::left), vp);
  return seq_pad.project_rows(mixed);
}

Tensor sequence_mix(const Tensor& q, const Tensor& k, const Tensor& v, const MonarchMatrix& first,
                    const MonarchMatrix& second, const SquarePadding& seq_pad) {
  Tape tape(false);
  return sequence_mix(tape.constant(q), tape.constant(k), tape.constant(v), first, second, seq_pad).value();
}

Var surrogate_attention_forward(Var x, const SurrogateAttentionParams& params) {
  const std::size_t n = x.shape()[0];
  if (n > params.seq_pad.n_pad) {
    throw DimensionError("surrogate attention: sequence length " + std::to_string(n) + " exceeds padded length " +
                         std::to_string(params.seq_pad.n_pad));
  }
  // Shorter inputs pad to the same square so the sequence Monarchs still apply.
  SquarePadding seq_pad{n, params.seq_pad.n_pad};
  HeadProjectionVars proj = structured_projection(x, params);
  Tape& tape = x.tape();
  Var out;
  for (std::size_t h = 0; h < params.heads; ++h) {
    Var head = sequence_mix(proj.q[h], proj.k[h], proj.v[h], params.seq_first, params.seq_second, seq_pad);
    Var contribution = matmul(head, tape.param(params.out_proj[h]));
    out = h == 0 ? contribution : add(out, contribution);
  }
  return out;
}

Tensor surrogate_attention_forward(const Tensor& x, const SurrogateAttentionParams& params) {
  return eval_untaped(x, [&](Var v) { return surrogate_attention_forward(v, params); });
}

SurrogateFFNParams SurrogateFFNParams::random(std::size_t d_in, Activation sigma, std::mt19937_64& rng) {
  SurrogateFFNParams p;
  p.feature_pad = pad_to_square(d_in);
  p.first = MonarchMatrix(p.feature_pad.n_pad, MonarchMatrix::Init::kaiming_block, &rng);
  p.second = MonarchMatrix(p.feature_pad.n_pad, MonarchMatrix::Init::kaiming_block, &rng);
  p.sigma = sigma;
  return p;
}

std::vector<Tensor*> SurrogateFFNParams::parameters() {
  return {&first.left().blocks, &first.right().blocks, &second.left().blocks, &second.right().blocks};
}

Var surrogate_ffn_forward(Var x, const SurrogateFFNParams& params) {
  Var hidden = activation(monarch_apply(params.first, params.feature_pad.lift_cols(x), Side::right), params.sigma);
  return params.feature_pad.project_cols(monarch_apply(params.second, hidden, Side::right));
}

Tensor surrogate_ffn_forward(const Tensor& x, const SurrogateFFNParams& params) {
  return eval_untaped(x, [&](Var v) { return surrogate_ffn_forward(v, params); });
}

NormStyle parse_norm_style(const std::string& name) {
  if (name == "post-ln" || name == "post_ln") return NormStyle::post_ln;
  if (name == "pre-ln" || name == "pre_ln") return NormStyle::pre_ln;
  throw ConfigError("unknown norm style '" + name + "' (expected post-ln or pre-ln)");
}

std::string to_string(NormStyle style) { return style == NormStyle::post_ln ? "post-ln" : "pre-ln"; }

EnhancedLayerParams EnhancedLayerParams::random(std::size_t seq_len, std::size_t d_model, std::size_t heads,
                                                Activation sigma, NormStyle norm, std::mt19937_64& rng) {
  EnhancedLayerParams p;
  p.attn = SurrogateAttentionParams::random(seq_len, d_model, d_model, heads, rng);
  p.ffn = SurrogateFFNParams::random(d_model, sigma, rng);
  p.norm = norm;
  p.ln1_gain = Tensor({d_model}, 1.0);
  p.ln1_bias = Tensor({d_model});
  p.ln2_gain = Tensor({d_model}, 1.0);
  p.ln2_bias = Tensor({d_model});
  return p;
}

std::size_t EnhancedLayerParams::param_count() const {
  return attn.param_count() + ffn.param_count() + ln1_gain.size() + ln1_bias.size() + ln2_gain.size() +
         ln2_bias.size();
}

std::vector<Tensor*> EnhancedLayerParams::parameters() {
  std::vector<Tensor*> out = attn.parameters();
  for (Tensor* t : ffn.parameters()) out.push_back(t);
  for (Tensor* t : {&ln1_gain, &ln1_bias, &ln2_gain, &ln2_bias}) out.push_back(t);
  return out;
}

Var enhanced_layer_forward(Var x, const EnhancedLayerParams& params, const SublayerHook& hook) {
  Tape& tape = x.tape();
  auto ln1 = [&](Var v) { return layer_norm(v, tape.param(params.ln1_gain), tape.param(params.ln1_bias)); };
  auto ln2 = [&](Var v) { return layer_norm(v, tape.param(params.ln2_gain), tape.param(params.ln2_bias)); };
  auto wrap = [&](Var v) { return hook ? hook(v) : v; };
  if (params.norm == NormStyle::post_ln) {
    Var x1 = ln1(add(x, wrap(surrogate_attention_forward(x, params.attn))));
    return ln2(add(x1, wrap(surrogate_ffn_forward(x1, params.ffn))));
  }
  Var x1 = add(x, wrap(surrogate_attention_forward(ln1(x), params.attn)));
  return add(x1, wrap(surrogate_ffn_forward(ln2(x1), params.ffn)));
}

Tensor enhanced_layer_forward(const Tensor& x, const EnhancedLayerParams& params) {
  return eval_untaped(x, [&](Var v) { return enhanced_layer_forward(v, params); });
}

}  // namespace msb
