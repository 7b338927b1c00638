#include "msb/monarch.hpp"

#include <cmath>

#include "msb/errors.hpp"

namespace msb {

std::size_t isqrt(std::size_t n) {
  auto r = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

bool is_perfect_square(std::size_t n) {
  const std::size_t r = isqrt(n);
  return r * r == n;
}

PermutationSpec permutation_spec(std::size_t n) {
  if (n == 0 || !is_perfect_square(n)) {
    throw DimensionError("monarch size " + std::to_string(n) +
                         " is not a perfect square; use pad_to_square to lift it to " +
                         std::to_string(n == 0 ? 1 : pad_to_square(n).n_pad));
  }
  PermutationSpec p;
  p.n = n;
  p.b = isqrt(n);
  p.map.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.map[i] = i / p.b + p.b * (i % p.b);
  return p;
}

Tensor PermutationSpec::to_dense() const {
  Tensor dense({n, n});
  for (std::size_t i = 0; i < n; ++i) dense(i, map[i]) = 1.0;
  return dense;
}

Tensor BlockDiagonal::to_dense() const {
  const std::size_t b = block_size(), n = size();
  Tensor dense({n, n});
  for (std::size_t k = 0; k < num_blocks(); ++k)
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < b; ++j) dense(k * b + i, k * b + j) = blocks[(k * b + i) * b + j];
  return dense;
}

BlockDiagonal BlockDiagonal::from_dense(const Tensor& dense, std::size_t block_size) {
  const std::size_t n = dense.rows();
  if (dense.cols() != n || block_size == 0 || n % block_size != 0) {
    throw DimensionError("block-diagonal from " + shape_str(dense.shape()) + " with block size " +
                         std::to_string(block_size));
  }
  const std::size_t nb = n / block_size;
  Tensor blocks({nb, block_size, block_size});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      if (r / block_size == c / block_size) {
        blocks[r * block_size + c % block_size] = dense(r, c);
      } else if (dense(r, c) != 0.0) {
        throw DimensionError("entry (" + std::to_string(r) + ", " + std::to_string(c) +
                             ") lies outside the diagonal blocks but is nonzero");
      }
    }
  }
  return BlockDiagonal{std::move(blocks)};
}

MonarchMatrix::MonarchMatrix(std::size_t n, Init init, std::mt19937_64* rng) : n_(n), perm_(permutation_spec(n)) {
  const std::size_t b = perm_.b;
  switch (init) {
    case Init::kaiming_block: {
      if (rng == nullptr) throw ConfigError("kaiming-block init needs a random generator");
      const double stddev = 1.0 / std::sqrt(static_cast<double>(b));
      left_.blocks = Tensor::randn({b, b, b}, *rng, stddev);
      right_.blocks = Tensor::randn({b, b, b}, *rng, stddev);
      break;
    }
    case Init::identity_block: {
      Tensor eye({b, b, b});
      for (std::size_t k = 0; k < b; ++k)
        for (std::size_t i = 0; i < b; ++i) eye[(k * b + i) * b + i] = 1.0;
      left_.blocks = eye;
      right_.blocks = eye;
      break;
    }
  }
}

MonarchMatrix MonarchMatrix::from_blocks(std::size_t n, Tensor left, Tensor right) {
  MonarchMatrix m;
  m.n_ = n;
  m.perm_ = permutation_spec(n);
  const Shape expected{m.perm_.b, m.perm_.b, m.perm_.b};
  if (left.shape() != expected || right.shape() != expected) {
    throw DimensionError("monarch of size " + std::to_string(n) + " needs blocks " + shape_str(expected) +
                         ", got " + shape_str(left.shape()) + " and " + shape_str(right.shape()));
  }
  m.left_.blocks = std::move(left);
  m.right_.blocks = std::move(right);
  return m;
}

MonarchMatrix MonarchMatrix::zeros(std::size_t n) {
  const std::size_t b = permutation_spec(n).b;
  return from_blocks(n, Tensor({b, b, b}), Tensor({b, b, b}));
}

// Each entry of P·L·P·R·P is a single product: only the middle index
// i = b·(c mod b) + (r mod b) keeps both factors inside their blocks.
Tensor MonarchMatrix::to_dense() const {
  const std::size_t b = perm_.b;
  const auto& h = perm_;
  Tensor dense({n_, n_});
  for (std::size_t r = 0; r < n_; ++r) {
    for (std::size_t c = 0; c < n_; ++c) {
      const std::size_t i = b * (c % b) + r % b;
      const double l = left_.blocks[h(r) * b + h(i) % b];
      const double rr = right_.blocks[i * b + h(c) % b];
      dense(r, c) = l * rr;
    }
  }
  return dense;
}

std::uint64_t monarch_param_count(std::size_t n) {
  const std::uint64_t b = permutation_spec(n).b;
  return 2 * b * b * b;
}

std::uint64_t monarch_apply_flops(std::size_t n, std::size_t d) {
  const std::uint64_t b = isqrt(n);
  return 2 * (2 * b * b * b * static_cast<std::uint64_t>(d));
}

namespace flop_meter {
namespace {
thread_local std::uint64_t g_count = 0;
}
void reset() { g_count = 0; }
std::uint64_t count() { return g_count; }
void add(std::uint64_t flops) { g_count += flops; }
}  // namespace flop_meter

namespace {

void check_operand(const MonarchMatrix& m, const Shape& shape, Side side) {
  const bool ok = shape.size() == 2 && (side == Side::left ? shape[0] : shape[1]) == m.size();
  if (!ok) {
    throw DimensionError(std::string("monarch_apply(") + (side == Side::left ? "left" : "right") + "): monarch of size " +
                         std::to_string(m.size()) + " cannot multiply operand " + shape_str(shape));
  }
}

}  // namespace

Tensor monarch_apply(const MonarchMatrix& m, const Tensor& x, Side side) {
  check_operand(m, x.shape(), side);
  const auto& h = m.permutation().map;
  using namespace kernels;
  Tensor y;
  if (side == Side::left) {
    y = permute_rows(blockdiag_left(m.left().blocks,
                                    permute_rows(blockdiag_left(m.right().blocks, permute_rows(x, h)), h)),
                     h);
    flop_meter::add(monarch_apply_flops(m.size(), x.cols()));
  } else {
    y = permute_cols(blockdiag_right(permute_cols(blockdiag_right(permute_cols(x, h), m.left().blocks), h),
                                     m.right().blocks),
                     h);
    flop_meter::add(monarch_apply_flops(m.size(), x.rows()));
  }
  return y;
}

Var monarch_apply(const MonarchMatrix& m, Var x, Side side) {
  check_operand(m, x.shape(), side);
  Tape& tape = x.tape();
  const auto& h = m.permutation().map;
  Var left = tape.param(m.left().blocks);
  Var right = tape.param(m.right().blocks);
  Var y;
  if (side == Side::left) {
    y = permute_rows(blockdiag_left(left, permute_rows(blockdiag_left(right, permute_rows(x, h)), h)), h);
    flop_meter::add(monarch_apply_flops(m.size(), x.shape()[1]));
  } else {
    y = permute_cols(blockdiag_right(permute_cols(blockdiag_right(permute_cols(x, h), left), h), right), h);
    flop_meter::add(monarch_apply_flops(m.size(), x.shape()[0]));
  }
  return y;
}

SquarePadding pad_to_square(std::size_t n) {
  if (n == 0) throw DimensionError("pad_to_square: size must be at least 1");
  std::size_t r = isqrt(n);
  if (r * r < n) ++r;
  return SquarePadding{n, r * r};
}

namespace {

void check_extent(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected extent " + std::to_string(want) + ", got " +
                         std::to_string(got));
  }
}

}  // namespace

Tensor SquarePadding::lift_rows(const Tensor& x) const {
  check_extent(x.rows(), n, "lift_rows");
  return kernels::resize_rows(x, n_pad);
}
Tensor SquarePadding::project_rows(const Tensor& x) const {
  check_extent(x.rows(), n_pad, "project_rows");
  return kernels::resize_rows(x, n);
}
Tensor SquarePadding::lift_cols(const Tensor& x) const {
  check_extent(x.cols(), n, "lift_cols");
  return kernels::resize_cols(x, n_pad);
}
Tensor SquarePadding::project_cols(const Tensor& x) const {
  check_extent(x.cols(), n_pad, "project_cols");
  return kernels::resize_cols(x, n);
}

Var SquarePadding::lift_rows(Var x) const {
  check_extent(x.shape()[0], n, "lift_rows");
  return n == n_pad ? x : resize_rows(x, n_pad);
}
Var SquarePadding::project_rows(Var x) const {
  check_extent(x.shape()[0], n_pad, "project_rows");
  return n == n_pad ? x : resize_rows(x, n);
}
Var SquarePadding::lift_cols(Var x) const {
  check_extent(x.shape()[1], n, "lift_cols");
  return n == n_pad ? x : resize_cols(x, n_pad);
}
Var SquarePadding::project_cols(Var x) const {
  check_extent(x.shape()[1], n_pad, "project_cols");
  return n == n_pad ? x : resize_cols(x, n);
}

}  // namespace msb
