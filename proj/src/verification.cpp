#include "msb/verification.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "msb/errors.hpp"
#include "msb/gradcheck.hpp"
#include "msb/reference.hpp"

namespace msb {

CheckResult CheckResult::make(std::string name, double diff, double threshold, std::size_t seeds,
                              std::string detail) {
  CheckResult r;
  r.name = std::move(name);
  r.max_abs_diff = diff;
  r.threshold = threshold;
  r.passed = diff <= threshold;
  r.seeds_run = seeds;
  r.detail = std::move(detail);
  return r;
}

namespace {

std::mt19937_64 seeded(std::uint64_t base, std::uint64_t salt, std::uint64_t s) {
  std::seed_seq seq{base, salt, s};
  return std::mt19937_64(seq);
}

// Distinct salts keep the per-check random streams independent.
enum Salt : std::uint64_t {
  kSaltDiagonal = 11,
  kSaltVertical,
  kSaltExpressive,
  kSaltLti,
  kSaltMemoryless,
  kSaltMonarch,
  kSaltSab,
  kSaltSfb,
  kSaltGrad,
  kSaltFlow,
};

std::vector<Tensor> random_weights(std::size_t heads, std::size_t d_in, std::size_t d_out, std::mt19937_64& rng) {
  std::vector<Tensor> w;
  for (std::size_t h = 0; h < heads; ++h) w.push_back(Tensor::randn({d_in, d_out}, rng));
  return w;
}

}  // namespace

CheckResult check_theorem_diagonal(std::size_t n, std::size_t lambda, std::size_t heads, std::size_t d_in,
                                   std::size_t d_out, std::size_t seeds, std::uint64_t base_seed,
                                   double threshold) {
  if (lambda % 2 == 0) throw ConfigError("diagonal pattern needs an odd lambda, got " + std::to_string(lambda));
  if (lambda > n) throw ConfigError("lambda exceeds sequence length");
  double worst = 0.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    auto rng = seeded(base_seed, kSaltDiagonal, s * 1000 + n * 100 + lambda * 10 + heads);
    std::vector<Tensor> scores;
    std::vector<ConvKernel> kernels;
    const auto weights = random_weights(heads, d_in, d_out, rng);
    for (std::size_t h = 0; h < heads; ++h) {
      const auto pattern = AttentionPattern::diagonal(n, random_pattern_weights(lambda, rng));
      scores.push_back(pattern_matrix(pattern));
      ConvKernel kernel;
      const auto offsets = pattern.offsets();
      for (std::size_t i = 0; i < offsets.size(); ++i) {
        kernel[offsets[i]] = kernels::scale(weights[h], pattern.weights[i]);
      }
      kernels.push_back(std::move(kernel));
    }
    const Tensor x = Tensor::randn({n, d_in}, rng);
    const Tensor attn = patterned_mhsa_forward(x, scores, weights);
    const Tensor conv = sum_of_convs_forward(x, kernels);
    worst = std::max(worst, max_abs_diff(attn, conv));
  }
  std::ostringstream detail;
  detail << "N=" << n << " lambda=" << lambda << " H=" << heads;
  return CheckResult::make("theorem_diagonal", worst, threshold, seeds, detail.str());
}

namespace {

struct VerticalCase {
  Tensor x;
  std::vector<Tensor> scores;
  std::vector<Tensor> weights;
  std::vector<AttentionPattern> patterns;
};

VerticalCase make_vertical_case(std::size_t n, std::size_t lambda, std::size_t heads, std::size_t d_in,
                                std::size_t d_out, std::mt19937_64& rng) {
  if (lambda > n) throw ConfigError("lambda exceeds sequence length");
  VerticalCase c;
  c.weights = random_weights(heads, d_in, d_out, rng);
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  for (std::size_t h = 0; h < heads; ++h) {
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<std::size_t> cols(all.begin(), all.begin() + static_cast<long>(lambda));
    c.patterns.push_back(AttentionPattern::vertical(n, std::move(cols), random_pattern_weights(lambda, rng)));
    c.scores.push_back(pattern_matrix(c.patterns.back()));
  }
  c.x = Tensor::randn({n, d_in}, rng);
  return c;
}

}  // namespace

CheckResult check_theorem_vertical(std::size_t n, std::size_t lambda, std::size_t heads, std::size_t d_in,
                                   std::size_t d_out, std::size_t seeds, std::uint64_t base_seed,
                                   double threshold) {
  double worst = 0.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    auto rng = seeded(base_seed, kSaltVertical, s * 1000 + n * 100 + lambda * 10 + heads);
    const VerticalCase c = make_vertical_case(n, lambda, heads, d_in, d_out, rng);
    const Tensor attn = patterned_mhsa_forward(c.x, c.scores, c.weights);
    // Fixed taps: one weighted aggregation of the significant rows per head.
    Tensor taps({1, d_out});
    for (std::size_t h = 0; h < heads; ++h) {
      const auto& p = c.patterns[h];
      for (std::size_t i = 0; i < p.columns.size(); ++i) {
        Tensor row({1, d_in});
        for (std::size_t j = 0; j < d_in; ++j) row(0, j) = p.weights[i] * c.x(p.columns[i], j);
        taps = kernels::add(taps, kernels::matmul(row, c.weights[h]));
      }
    }
    for (std::size_t q = 0; q < n; ++q)
      for (std::size_t j = 0; j < d_out; ++j) worst = std::max(worst, std::abs(attn(q, j) - taps(0, j)));
  }
  std::ostringstream detail;
  detail << "N=" << n << " lambda=" << lambda << " H=" << heads;
  return CheckResult::make("theorem_vertical", worst, threshold, seeds, detail.str());
}

CheckResult check_vertical_rows_identical(std::size_t n, std::size_t lambda, std::size_t heads, std::size_t d_in,
                                          std::size_t d_out, std::size_t seeds, std::uint64_t base_seed,
                                          double threshold) {
  double worst = 0.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    auto rng = seeded(base_seed, kSaltVertical, s * 1000 + n * 100 + lambda * 10 + heads);
    const VerticalCase c = make_vertical_case(n, lambda, heads, d_in, d_out, rng);
    const Tensor attn = patterned_mhsa_forward(c.x, c.scores, c.weights);
    for (std::size_t q = 1; q < n; ++q)
      for (std::size_t j = 0; j < d_out; ++j) worst = std::max(worst, std::abs(attn(q, j) - attn(0, j)));
  }
  std::ostringstream detail;
  detail << "N=" << n << " lambda=" << lambda << " H=" << heads;
  return CheckResult::make("vertical_rows_identical", worst, threshold, seeds, detail.str());
}

std::string to_string(DependenceMode mode) {
  return mode == DependenceMode::short_term ? "short_term" : "long_term";
}

MonarchMatrix ExpressivenessConstruction::first() const {
  return MonarchMatrix::from_blocks(n, l1.blocks, r1.blocks);
}

MonarchMatrix ExpressivenessConstruction::second() const {
  return MonarchMatrix::from_blocks(n, l2.blocks, r2.blocks);
}

namespace {

// Sets the unit entries of (L, R) so that P·L·P·R·P has a single 1 at
// (row, col). The middle index i is the one that keeps both entries inside
// their diagonal blocks.
void place_unit(BlockDiagonal& l, BlockDiagonal& r, const PermutationSpec& h, std::size_t row, std::size_t col) {
  const std::size_t b = h.b;
  const std::size_t i = b * (col % b) + row % b;
  Tensor dense_l = l.to_dense();
  Tensor dense_r = r.to_dense();
  dense_l(h(row), h(i)) = 1.0;
  dense_r(i, h(col)) = 1.0;
  l = BlockDiagonal::from_dense(dense_l, b);
  r = BlockDiagonal::from_dense(dense_r, b);
}

BlockDiagonal zero_blocks(std::size_t b) { return BlockDiagonal{Tensor({b, b, b})}; }

}  // namespace

ExpressivenessConstruction build_expressiveness(std::size_t n, DependenceMode mode, std::size_t k) {
  const PermutationSpec h = permutation_spec(n);
  if (k < 1 || k >= n) {
    throw ConfigError("expressiveness target index must satisfy 1 <= k < N, got k=" + std::to_string(k));
  }
  ExpressivenessConstruction c;
  c.n = n;
  c.mode = mode;
  c.k = k;
  c.l1 = c.r1 = c.l2 = c.r2 = zero_blocks(h.b);
  const std::size_t s = c.source();
  place_unit(c.l1, c.r1, h, s, s);  // (M¹Q)_s = q_s, so a_s = q_s·k_s
  place_unit(c.l2, c.r2, h, k, s);  // (M²A)_k = a_s
  return c;
}

ExpressivenessConstruction printed_expressiveness(DependenceMode mode) {
  auto unit = [](std::size_t r, std::size_t c) {
    Tensor m({4, 4});
    m(r, c) = 1.0;
    return BlockDiagonal::from_dense(m, 2);
  };
  ExpressivenessConstruction c;
  c.n = 4;
  c.mode = mode;
  c.l1 = unit(0, 0);
  c.r1 = unit(0, 0);
  if (mode == DependenceMode::short_term) {
    c.k = 1;
    c.l2 = unit(2, 2);
    c.r2 = unit(1, 0);
  } else {
    c.k = 2;
    c.l2 = unit(1, 0);
    c.r2 = unit(0, 0);
  }
  return c;
}

CheckResult check_expressiveness(const ExpressivenessConstruction& c, std::size_t samples, std::uint64_t seed,
                                 double threshold) {
  SurrogateAttentionParams params = SurrogateAttentionParams::identity(c.n, 1, 1);
  params.seq_first = c.first();
  params.seq_second = c.second();
  auto rng = seeded(seed, kSaltExpressive, c.n * 1000 + c.k * 2 + (c.mode == DependenceMode::long_term));
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  const std::size_t s = c.source();
  double worst = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    Tensor x({c.n, 1});
    for (auto& v : x.data()) v = dist(rng);
    const Tensor y = surrogate_attention_forward(x, params);
    const double expected = x[c.k] * (x[s] * x[s]);
    worst = std::max(worst, std::abs(y[c.k] - expected));
  }
  std::ostringstream detail;
  detail << to_string(c.mode) << " N=" << c.n << " k=" << c.k << " source=" << s;
  return CheckResult::make("expressiveness", worst, threshold, samples, detail.str());
}

namespace {

// X·dense(M) on a zero-padded copy, truncated back to `width` columns.
Tensor dense_right_project(const Tensor& x, const MonarchMatrix& m, std::size_t width) {
  Tensor padded({x.rows(), m.size()});
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) padded(i, j) = x(i, j);
  const Tensor full = kernels::matmul(padded, m.to_dense());
  Tensor out({x.rows(), width});
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < width; ++j) out(i, j) = full(i, j);
  return out;
}

Tensor pad_rows_explicit(const Tensor& x, std::size_t rows) {
  Tensor out({rows, x.cols()});
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j);
  return out;
}

Tensor column_chunk(const Tensor& x, std::size_t start, std::size_t width) {
  Tensor out({x.rows(), width});
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < width; ++j) out(i, j) = x(i, start + j);
  return out;
}

struct DenseHead {
  Tensor q, k, v;  // padded to N_pad rows
};

DenseHead dense_head(const Tensor& x, const SurrogateAttentionParams& p, std::size_t h) {
  const Tensor chunk = column_chunk(x, h * p.d_head, p.d_head);
  return {pad_rows_explicit(dense_right_project(chunk, p.query[h], p.d_head), p.seq_pad.n_pad),
          pad_rows_explicit(dense_right_project(chunk, p.key[h], p.d_head), p.seq_pad.n_pad),
          pad_rows_explicit(dense_right_project(chunk, p.value[h], p.d_head), p.seq_pad.n_pad)};
}

}  // namespace

Tensor dense_oracle_attention(const Tensor& x, const SurrogateAttentionParams& p) {
  using namespace kernels;
  const Tensor m1 = p.seq_first.to_dense();
  const Tensor m2 = p.seq_second.to_dense();
  Tensor out({x.rows(), p.d_out});
  for (std::size_t h = 0; h < p.heads; ++h) {
    const DenseHead d = dense_head(x, p, h);
    const Tensor sa = elementwise_mul(matmul(m2, elementwise_mul(matmul(m1, d.q), d.k)), d.v);
    Tensor sa_rows({x.rows(), p.d_head});
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < p.d_head; ++j) sa_rows(i, j) = sa(i, j);
    out = add(out, matmul(sa_rows, p.out_proj[h]));
  }
  return out;
}

Tensor dense_oracle_ffn(const Tensor& x, const SurrogateFFNParams& p) {
  using namespace kernels;
  Tensor padded({x.rows(), p.first.size()});
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) padded(i, j) = x(i, j);
  const Tensor full = matmul(activation(matmul(padded, p.first.to_dense()), p.sigma), p.second.to_dense());
  return column_chunk(full, 0, x.cols());
}

Tensor lti_state_step(const Tensor& state, const Tensor& input) {
  const std::size_t d = state.size();
  const Tensor a({d, d});            // A = 0
  const Tensor b = Tensor::identity(d);  // B = I
  const Tensor s = kernels::matmul(a, state.reshaped({d, 1}));
  const Tensor u = kernels::matmul(b, input.reshaped({d, 1}));
  return kernels::add(s, u).reshaped(state.shape());
}

LtiDecomposition lti_decompose(const SurrogateAttentionParams& p, const Tensor& x) {
  if (p.heads != 1) throw ConfigError("LTI decomposition covers a single head, got H=" + std::to_string(p.heads));
  const std::size_t n = x.rows(), d = p.d_head;
  const DenseHead head = dense_head(x, p, 0);
  const Tensor m1 = p.seq_first.to_dense();
  const Tensor m2 = p.seq_second.to_dense();

  LtiDecomposition out;
  out.readout = kernels::elementwise_mul(kernels::matmul(m1, head.q), head.k);

  Tensor state({d});
  Tensor y({n, d});
  for (std::size_t t = 0; t < n; ++t) {
    Tensor v_t({d});
    for (std::size_t j = 0; j < d; ++j) v_t[j] = head.v(t, j);
    state = lti_state_step(state, v_t);
    // Post-processing with the time-varying row M²_t.
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t s = 0; s < p.seq_pad.n_pad; ++s) acc += m2(t, s) * out.readout(s, j);
      y(t, j) = acc * state[j];
    }
  }
  out.output = kernels::matmul(y, p.out_proj[0]);
  return out;
}

CheckResult check_lti_decomposition(std::size_t n, std::size_t d_model, std::size_t seeds, std::uint64_t base_seed,
                                    double threshold) {
  double worst = 0.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    auto rng = seeded(base_seed, kSaltLti, s);
    const auto params = SurrogateAttentionParams::random(n, d_model, d_model, 1, rng);
    const Tensor x = Tensor::randn({n, d_model}, rng);
    const Tensor direct = surrogate_attention_forward(x, params);
    const LtiDecomposition lti = lti_decompose(params, x);
    worst = std::max(worst, max_abs_diff(direct, lti.output));
  }
  return CheckResult::make("lti_decomposition", worst, threshold, seeds,
                           "N=" + std::to_string(n) + " D=" + std::to_string(d_model));
}

CheckResult check_lti_memoryless(std::size_t n, std::size_t d_model, std::size_t seeds, std::uint64_t base_seed) {
  double worst = 0.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    auto rng = seeded(base_seed, kSaltMemoryless, s);
    const Tensor inputs = Tensor::randn({n, d_model}, rng);
    std::uniform_int_distribution<std::size_t> pick_t(1, n - 1);
    const std::size_t t = pick_t(rng);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.begin() + static_cast<long>(t), rng);
    auto run = [&](const std::vector<std::size_t>& idx) {
      Tensor state({d_model});
      for (std::size_t step = 0; step <= t; ++step) {
        Tensor u({d_model});
        for (std::size_t j = 0; j < d_model; ++j) u[j] = inputs(idx[step], j);
        state = lti_state_step(state, u);
      }
      return state;
    };
    std::vector<std::size_t> identity(n);
    for (std::size_t i = 0; i < n; ++i) identity[i] = i;
    worst = std::max(worst, max_abs_diff(run(identity), run(order)));
  }
  return CheckResult::make("lti_memoryless", worst, 0.0, seeds, "A=0, B=I");
}

namespace {

// Dense product that skips zero entries of both operands; the factors here
// are permutations and block diagonals, so this stays cheap.
Tensor sparse_matmul(const Tensor& a, const Tensor& b) {
  std::vector<std::vector<std::pair<std::size_t, double>>> b_rows(b.rows());
  for (std::size_t k = 0; k < b.rows(); ++k)
    for (std::size_t j = 0; j < b.cols(); ++j)
      if (b(k, j) != 0.0) b_rows[k].emplace_back(j, b(k, j));
  Tensor out({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double av = a(i, k);
      if (av == 0.0) continue;
      for (const auto& [j, bv] : b_rows[k]) out(i, j) += av * bv;
    }
  }
  return out;
}

}  // namespace

Tensor explicit_monarch_product(const MonarchMatrix& m) {
  const Tensor p = m.permutation().to_dense();
  Tensor acc = sparse_matmul(p, m.left().to_dense());
  acc = sparse_matmul(acc, p);
  acc = sparse_matmul(acc, m.right().to_dense());
  return sparse_matmul(acc, p);
}

CheckResult check_monarch_oracle(const std::vector<std::size_t>& sizes, std::size_t seeds, std::uint64_t base_seed,
                                 double threshold) {
  double worst = 0.0;
  for (std::size_t n : sizes) {
    for (std::size_t s = 0; s < seeds; ++s) {
      auto rng = seeded(base_seed, kSaltMonarch, n * 100000 + s);
      const MonarchMatrix m(n, MonarchMatrix::Init::kaiming_block, &rng);
      const Tensor dense = explicit_monarch_product(m);
      const Tensor x = Tensor::randn({n, 3}, rng);
      const Tensor xt = Tensor::randn({3, n}, rng);
      worst = std::max(worst, max_abs_diff(monarch_apply(m, x, Side::left), kernels::matmul(dense, x)));
      worst = std::max(worst, max_abs_diff(monarch_apply(m, xt, Side::right), kernels::matmul(xt, dense)));
    }
  }
  std::ostringstream detail;
  detail << "sizes=";
  for (std::size_t i = 0; i < sizes.size(); ++i) detail << (i ? "," : "") << sizes[i];
  return CheckResult::make("monarch_oracle", worst, threshold, seeds * sizes.size(), detail.str());
}

CheckResult check_param_law(const std::vector<std::size_t>& sizes) {
  double worst = 0.0;
  for (std::size_t n : sizes) {
    const MonarchMatrix m = MonarchMatrix::zeros(n);
    const double expected = 2.0 * std::pow(static_cast<double>(n), 1.5);
    worst = std::max(worst, std::abs(static_cast<double>(m.param_count()) - expected));
  }
  return CheckResult::make("param_law", worst, 0.0, sizes.size(), "param_count == 2 n^1.5");
}

CheckResult check_flop_meter_scaling(std::size_t n) {
  auto measure = [](std::size_t size) {
    const MonarchMatrix m = MonarchMatrix::zeros(size);
    flop_meter::reset();
    monarch_apply(m, Tensor({size, 1}), Side::left);
    return flop_meter::count();
  };
  const auto small = measure(n);
  const auto large = measure(4 * n);
  const double ratio = std::log2(static_cast<double>(large) / static_cast<double>(small));
  std::ostringstream detail;
  detail << "flops(" << n << ")=" << small << " flops(" << 4 * n << ")=" << large;
  return CheckResult::make("flop_meter_scaling", std::abs(ratio - 3.0), 0.0, 1, detail.str());
}

CheckResult check_sab_oracle(const std::vector<std::pair<std::size_t, std::size_t>>& sizes, std::size_t heads,
                             std::size_t seeds, std::uint64_t base_seed, double threshold) {
  double worst = 0.0;
  for (const auto& [n, d] : sizes) {
    for (std::size_t s = 0; s < seeds; ++s) {
      auto rng = seeded(base_seed, kSaltSab, n * 100000 + d * 1000 + s);
      const auto params = SurrogateAttentionParams::random(n, d, d, heads, rng);
      const Tensor x = Tensor::randn({n, d}, rng);
      worst = std::max(worst, max_abs_diff(surrogate_attention_forward(x, params), dense_oracle_attention(x, params)));
    }
  }
  return CheckResult::make("sab_oracle", worst, threshold, seeds * sizes.size(), "H=" + std::to_string(heads));
}

CheckResult check_sfb_oracle(const std::vector<std::pair<std::size_t, std::size_t>>& sizes, std::size_t seeds,
                             std::uint64_t base_seed, double threshold) {
  double worst = 0.0;
  const Activation kinds[] = {Activation::relu, Activation::gelu, Activation::identity};
  for (const auto& [n, d] : sizes) {
    for (std::size_t s = 0; s < seeds; ++s) {
      auto rng = seeded(base_seed, kSaltSfb, n * 100000 + d * 1000 + s);
      const auto params = SurrogateFFNParams::random(d, kinds[s % 3], rng);
      const Tensor x = Tensor::randn({n, d}, rng);
      worst = std::max(worst, max_abs_diff(surrogate_ffn_forward(x, params), dense_oracle_ffn(x, params)));
    }
  }
  return CheckResult::make("sfb_oracle", worst, threshold, seeds * sizes.size());
}

namespace {

struct LayerFixture {
  EnhancedLayerParams params;
  Tensor x;
  Tensor weights;  // loss = Σ Y ⊙ weights
};

LayerFixture make_layer_fixture(NormStyle norm, std::mt19937_64& rng) {
  constexpr std::size_t kSeq = 7, kModel = 8, kHeads = 2;
  LayerFixture f;
  f.params = EnhancedLayerParams::random(kSeq, kModel, kHeads, Activation::gelu, norm, rng);
  // Non-trivial affine parameters so their gradients are exercised too.
  for (Tensor* t : {&f.params.ln1_gain, &f.params.ln2_gain}) *t = Tensor::uniform({kModel}, rng, 0.5, 1.5);
  for (Tensor* t : {&f.params.ln1_bias, &f.params.ln2_bias}) *t = Tensor::uniform({kModel}, rng, -0.5, 0.5);
  f.x = Tensor::randn({kSeq, kModel}, rng);
  f.weights = Tensor::randn({kSeq, kModel}, rng);
  return f;
}

Var layer_loss(Tape& tape, const LayerFixture& f) {
  Var y = enhanced_layer_forward(tape.constant(f.x), f.params);
  return sum(elementwise_mul(y, tape.constant(f.weights)));
}

}  // namespace

CheckResult check_layer_gradients(NormStyle norm, std::size_t probes, std::uint64_t seed, double threshold) {
  auto rng = seeded(seed, kSaltGrad, norm == NormStyle::post_ln ? 0 : 1);
  LayerFixture f = make_layer_fixture(norm, rng);
  std::vector<std::pair<std::string, Tensor*>> named;
  const auto params = f.params.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    named.emplace_back("param" + std::to_string(i) + shape_str(params[i]->shape()), params[i]);
  }
  const GradCheckReport report =
      check_gradients([&](Tape& tape) { return layer_loss(tape, f); }, named, probes, rng, 1e-5);
  std::ostringstream detail;
  detail << to_string(norm) << ", " << report.probes.size() << " probes over " << params.size() << " tensors";
  return CheckResult::make("layer_gradients_" + to_string(norm), report.max_rel_err, threshold,
                           report.probes.size(), detail.str());
}

CheckResult check_gradient_flow(std::size_t seeds, std::uint64_t base_seed) {
  std::size_t zero_blocks_seen = 0, blocks_checked = 0;
  for (std::size_t s = 0; s < seeds; ++s) {
    auto rng = seeded(base_seed, kSaltFlow, s);
    LayerFixture f = make_layer_fixture(s % 2 ? NormStyle::pre_ln : NormStyle::post_ln, rng);
    Tape tape;
    tape.backward(layer_loss(tape, f));
    std::vector<const MonarchMatrix*> monarchs = f.params.attn.monarchs();
    monarchs.push_back(&f.params.ffn.first);
    monarchs.push_back(&f.params.ffn.second);
    for (const MonarchMatrix* m : monarchs) {
      for (const Tensor* blocks : {&m->left().blocks, &m->right().blocks}) {
        const Tensor g = tape.grad_of(*blocks);
        const std::size_t bb = m->block_size() * m->block_size();
        for (std::size_t k = 0; k < m->block_size(); ++k) {
          double biggest = 0.0;
          for (std::size_t i = 0; i < bb; ++i) biggest = std::max(biggest, std::abs(g[k * bb + i]));
          ++blocks_checked;
          if (biggest == 0.0) ++zero_blocks_seen;
        }
      }
    }
  }
  return CheckResult::make("gradient_flow", static_cast<double>(zero_blocks_seen), 0.0, seeds,
                           std::to_string(blocks_checked) + " blocks checked; diff counts blocks with zero gradient");
}

std::vector<std::string> check_names() {
  return {"monarch_oracle",
          "param_law",
          "flop_meter_scaling",
          "theorem_diagonal",
          "theorem_vertical",
          "vertical_rows_identical",
          "expressiveness_printed",
          "expressiveness_general",
          "lti_decomposition",
          "lti_memoryless",
          "sab_oracle",
          "sfb_oracle",
          "layer_gradients",
          "gradient_flow"};
}

namespace {

// Worst case over a set of sub-results, keeping the failing detail if any.
CheckResult merge(std::string name, const std::vector<CheckResult>& parts) {
  CheckResult out;
  out.name = std::move(name);
  out.passed = true;
  std::ostringstream detail;
  double worst_margin = -1.0;
  for (const auto& p : parts) {
    out.seeds_run += p.seeds_run;
    out.passed = out.passed && p.passed;
    // Report the sub-check closest to (or furthest past) its threshold.
    const double margin = p.threshold > 0 ? p.max_abs_diff / p.threshold : (p.max_abs_diff > 0 ? 1e300 : 0.0);
    if (margin > worst_margin) {
      worst_margin = margin;
      out.max_abs_diff = p.max_abs_diff;
      out.threshold = p.threshold;
      detail.str("");
      detail << "worst case: " << p.detail;
    }
  }
  detail << "; " << parts.size() << " configurations";
  out.detail = detail.str();
  // Keep passed ⇔ max_abs_diff ≤ threshold for the reported worst case.
  out.passed = out.passed && out.max_abs_diff <= out.threshold;
  return out;
}

}  // namespace

std::vector<CheckResult> run_all(const VerifyConfig& config) {
  const std::uint64_t seed = config.seed;
  const std::size_t seeds = config.seeds;
  const auto tol = [&](double t) { return config.threshold_override.value_or(t); };

  using Runner = std::function<CheckResult()>;
  const std::vector<std::pair<std::string, Runner>> runners = {
      {"monarch_oracle", [&] { return check_monarch_oracle({4, 16, 64, 256}, seeds, seed, tol(kStructuralTol)); }},
      {"param_law",
       [&] {
         auto r = check_param_law({1, 4, 9, 16, 25, 64, 100, 256, 1024, 4096});
         return CheckResult::make(r.name, r.max_abs_diff, tol(0.0), r.seeds_run, r.detail);
       }},
      {"flop_meter_scaling",
       [&] {
         auto r = check_flop_meter_scaling(256);
         return CheckResult::make(r.name, r.max_abs_diff, tol(0.0), r.seeds_run, r.detail);
       }},
      {"theorem_diagonal",
       [&] {
         std::vector<CheckResult> parts;
         for (std::size_t n : {8, 16, 64})
           for (std::size_t lambda : {1, 3, 5})
             for (std::size_t h : {1, 2, 4})
               parts.push_back(check_theorem_diagonal(n, lambda, h, 4, 3, seeds, seed, tol(kTheoremTol)));
         return merge("theorem_diagonal", parts);
       }},
      {"theorem_vertical",
       [&] {
         std::vector<CheckResult> parts;
         for (std::size_t n : {8, 16, 64})
           for (std::size_t lambda : {1, 2, 4})
             for (std::size_t h : {1, 2, 4})
               parts.push_back(check_theorem_vertical(n, lambda, h, 4, 3, seeds, seed, tol(kTheoremTol)));
         return merge("theorem_vertical", parts);
       }},
      {"vertical_rows_identical",
       [&] {
         std::vector<CheckResult> parts;
         for (std::size_t n : {8, 16, 64})
           for (std::size_t lambda : {1, 2, 4})
             for (std::size_t h : {1, 2, 4})
               parts.push_back(check_vertical_rows_identical(n, lambda, h, 4, 3, seeds, seed, tol(kExactTol)));
         return merge("vertical_rows_identical", parts);
       }},
      {"expressiveness_printed",
       [&] {
         return merge("expressiveness_printed",
                      {check_expressiveness(printed_expressiveness(DependenceMode::short_term), 1000, seed,
                                            tol(kExactTol)),
                       check_expressiveness(printed_expressiveness(DependenceMode::long_term), 1000, seed,
                                            tol(kExactTol))});
       }},
      {"expressiveness_general",
       [&] {
         std::vector<CheckResult> parts;
         for (std::size_t n : {4, 16})
           for (std::size_t k : {std::size_t{1}, n - 1})
             for (auto mode : {DependenceMode::short_term, DependenceMode::long_term})
               parts.push_back(check_expressiveness(build_expressiveness(n, mode, k), 1000, seed, tol(kExactTol)));
         return merge("expressiveness_general", parts);
       }},
      {"lti_decomposition", [&] { return check_lti_decomposition(16, 4, seeds, seed, tol(kStructuralTol)); }},
      {"lti_memoryless",
       [&] {
         auto r = check_lti_memoryless(16, 4, seeds, seed);
         return CheckResult::make(r.name, r.max_abs_diff, tol(0.0), r.seeds_run, r.detail);
       }},
      {"sab_oracle",
       [&] {
         return check_sab_oracle({{4, 4}, {16, 8}, {64, 16}}, 2, std::min<std::size_t>(seeds, 50), seed, tol(1e-9));
       }},
      {"sfb_oracle",
       [&] { return check_sfb_oracle({{4, 4}, {16, 8}, {64, 16}}, std::min<std::size_t>(seeds, 50), seed, tol(1e-9)); }},
      {"layer_gradients",
       [&] {
         return merge("layer_gradients", {check_layer_gradients(NormStyle::post_ln, 50, seed, tol(kGradTol)),
                                          check_layer_gradients(NormStyle::pre_ln, 50, seed, tol(kGradTol))});
       }},
      {"gradient_flow",
       [&] {
         auto r = check_gradient_flow(10, seed);
         return CheckResult::make(r.name, r.max_abs_diff, tol(0.0), r.seeds_run, r.detail);
       }},
  };

  std::vector<CheckResult> results;
  for (const auto& [name, run] : runners) {
    if (config.selection &&
        std::find(config.selection->begin(), config.selection->end(), name) == config.selection->end()) {
      continue;
    }
    results.push_back(run());
  }
  return results;
}

}  // namespace msb
