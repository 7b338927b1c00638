#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "msb/errors.hpp"
#include "msb/surrogate.hpp"
#include "msb/verification.hpp"

using namespace msb;

namespace {

void zero_out(EnhancedLayerParams& p) {
  for (Tensor* t : p.attn.parameters()) t->fill(0.0);
  for (Tensor* t : p.ffn.parameters()) t->fill(0.0);
}

Tensor rows_layer_norm(const Tensor& x) {
  return kernels::layer_norm(x, Tensor({x.cols()}, 1.0), Tensor({x.cols()}));
}

}  // namespace

TEST_CASE("identity-block projections permute each chunk's columns") {
  std::mt19937_64 rng(1);
  const auto p = SurrogateAttentionParams::identity(4, 8, 2);
  const Tensor x = Tensor::randn({4, 8}, rng);
  const HeadProjections qkv = structured_projection(x, p);
  const auto h = permutation_spec(4);
  for (std::size_t head = 0; head < 2; ++head)
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c) {
        CHECK(qkv.q[head](r, c) == x(r, head * 4 + h(c)));
        CHECK(qkv.v[head](r, c) == x(r, head * 4 + h(c)));
      }
}

TEST_CASE("zero input gives zero projections and zero output") {
  std::mt19937_64 rng(2);
  const auto p = SurrogateAttentionParams::random(6, 8, 8, 2, rng);
  const Tensor x({6, 8});
  const HeadProjections qkv = structured_projection(x, p);
  CHECK(max_abs(qkv.k[1]) == 0.0);
  CHECK(max_abs(surrogate_attention_forward(x, p)) == 0.0);
  for (Activation a : {Activation::relu, Activation::gelu, Activation::identity}) {
    const auto f = SurrogateFFNParams::random(8, a, rng);
    CHECK(max_abs(surrogate_ffn_forward(x, f)) == 0.0);
  }
}

TEST_CASE("single-head projection equals X times the dense Monarch (seed 11)") {
  std::mt19937_64 rng(11);
  const auto p = SurrogateAttentionParams::random(5, 4, 4, 1, rng);
  const Tensor x = Tensor::randn({5, 4}, rng);
  const HeadProjections qkv = structured_projection(x, p);
  CHECK(max_abs_diff(qkv.q[0], kernels::matmul(x, p.query[0].to_dense())) <= 1e-10);
}

TEST_CASE("short- and long-term constructions on x = [2, 3, 5, 7]") {
  const Tensor x = Tensor::from_rows({{2}, {3}, {5}, {7}});
  auto params = SurrogateAttentionParams::identity(4, 1, 1);

  const auto short_term = printed_expressiveness(DependenceMode::short_term);
  params.seq_first = short_term.first();
  params.seq_second = short_term.second();
  CHECK(surrogate_attention_forward(x, params)(1, 0) == 12.0);

  const auto long_term = printed_expressiveness(DependenceMode::long_term);
  params.seq_first = long_term.first();
  params.seq_second = long_term.second();
  CHECK(surrogate_attention_forward(x, params)(2, 0) == 20.0);
}

TEST_CASE("attention matches the dense composition (seed 3, N=16, H=2)") {
  std::mt19937_64 rng(3);
  const auto p = SurrogateAttentionParams::random(16, 8, 8, 2, rng);
  const Tensor x = Tensor::randn({16, 8}, rng);
  CHECK(max_abs_diff(surrogate_attention_forward(x, p), dense_oracle_attention(x, p)) <= 1e-9);
}

TEST_CASE("padded sequence and head widths still match the oracle") {
  std::mt19937_64 rng(4);
  const auto p = SurrogateAttentionParams::random(7, 6, 5, 3, rng);  // N_pad 9, d_head 2 -> 4
  const Tensor x = Tensor::randn({7, 6}, rng);
  CHECK(max_abs_diff(surrogate_attention_forward(x, p), dense_oracle_attention(x, p)) <= 1e-12);
  const Tensor shorter = Tensor::randn({5, 6}, rng);
  CHECK(max_abs_diff(surrogate_attention_forward(shorter, p), dense_oracle_attention(shorter, p)) <= 1e-12);
}

TEST_CASE("shape errors") {
  std::mt19937_64 rng(5);
  CHECK_THROWS_AS(SurrogateAttentionParams::random(4, 6, 6, 4, rng), ConfigError);
  const auto p = SurrogateAttentionParams::random(4, 4, 4, 1, rng);
  CHECK_THROWS_AS(surrogate_attention_forward(Tensor({5, 4}), p), DimensionError);
  CHECK_THROWS_AS(surrogate_attention_forward(Tensor({4, 3}), p), DimensionError);
}

TEST_CASE("FFN with identity activation is X times both dense Monarchs (seed 5)") {
  std::mt19937_64 rng(5);
  const auto f = SurrogateFFNParams::random(4, Activation::identity, rng);
  const Tensor x = Tensor::randn({3, 4}, rng);
  const Tensor expected = kernels::matmul(kernels::matmul(x, f.first.to_dense()), f.second.to_dense());
  CHECK(max_abs_diff(surrogate_ffn_forward(x, f), expected) <= 1e-10);
}

TEST_CASE("FFN with D = 1 is sigma(x l1 r1) l2 r2") {
  SurrogateFFNParams f;
  f.feature_pad = pad_to_square(1);
  f.first = MonarchMatrix::from_blocks(1, Tensor({1, 1, 1}, 2.0), Tensor({1, 1, 1}, -1.5));
  f.second = MonarchMatrix::from_blocks(1, Tensor({1, 1, 1}, 0.5), Tensor({1, 1, 1}, 3.0));
  f.sigma = Activation::relu;
  const Tensor x = Tensor::from_rows({{-1.0}, {2.0}});
  const Tensor y = surrogate_ffn_forward(x, f);
  CHECK(y(0, 0) == 1.5 * 3.0);  // relu(-1 * 2 * -1.5) * 0.5 * 3
  CHECK(y(1, 0) == 0.0);
}

TEST_CASE("FFN with a padded feature axis matches the oracle") {
  std::mt19937_64 rng(6);
  const auto f = SurrogateFFNParams::random(10, Activation::gelu, rng);
  const Tensor x = Tensor::randn({4, 10}, rng);
  CHECK(max_abs_diff(surrogate_ffn_forward(x, f), dense_oracle_ffn(x, f)) <= 1e-12);
}

TEST_CASE("head outputs are linear in V") {
  std::mt19937_64 rng(7);
  const auto p = SurrogateAttentionParams::random(9, 4, 4, 1, rng);
  const Tensor q = Tensor::randn({9, 4}, rng), k = Tensor::randn({9, 4}, rng), v = Tensor::randn({9, 4}, rng);
  const Tensor base = sequence_mix(q, k, v, p.seq_first, p.seq_second, p.seq_pad);
  for (double alpha : {2.0, 0.25, -4.0}) {
    CHECK(sequence_mix(q, k, kernels::scale(v, alpha), p.seq_first, p.seq_second, p.seq_pad) ==
          kernels::scale(base, alpha));
  }
}

TEST_CASE("zero blocks reduce the layer to its norms") {
  std::mt19937_64 rng(8);
  const Tensor x = Tensor::randn({5, 4}, rng);
  auto post = EnhancedLayerParams::random(5, 4, 2, Activation::gelu, NormStyle::post_ln, rng);
  zero_out(post);
  CHECK(max_abs_diff(enhanced_layer_forward(x, post), rows_layer_norm(rows_layer_norm(x))) < 1e-15);
  auto pre = EnhancedLayerParams::random(5, 4, 2, Activation::gelu, NormStyle::pre_ln, rng);
  zero_out(pre);
  CHECK(enhanced_layer_forward(x, pre) == x);
}

TEST_CASE("layer parameter count follows the closed form") {
  std::mt19937_64 rng(9);
  auto p = EnhancedLayerParams::random(48, 16, 2, Activation::gelu, NormStyle::pre_ln, rng);
  // 3·H·2·9^1.5 + 2·2·49^1.5 + 2·2·16^1.5 + H·8·16 + 4·16
  CHECK(p.param_count() == 324 + 1372 + 256 + 256 + 64);
  std::size_t total = 0;
  for (Tensor* t : p.parameters()) total += t->size();
  CHECK(total == p.param_count());
}

TEST_CASE("full-layer gradients and flow") {
  CHECK(check_layer_gradients(NormStyle::post_ln, 50, 1).passed);
  CHECK(check_layer_gradients(NormStyle::pre_ln, 50, 2).passed);
  CHECK(check_gradient_flow(10, 3).passed);
}

TEST_CASE("norm style names") {
  CHECK(parse_norm_style("post-ln") == NormStyle::post_ln);
  CHECK(parse_norm_style("pre-ln") == NormStyle::pre_ln);
  CHECK(to_string(NormStyle::pre_ln) == "pre-ln");
  CHECK_THROWS_AS(parse_norm_style("sandwich"), ConfigError);
}
