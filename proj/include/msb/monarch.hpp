#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "msb/autograd.hpp"
#include "msb/tensor.hpp"

namespace msb {

/// Index map of the base-√n grid transpose, h(i) = ⌊i/b⌋ + b·(i mod b).
///
/// Used as a row map, (P·X)[i] = X[h(i)]. h is an involution, so P = Pᵀ = P⁻¹.
struct PermutationSpec {
  std::size_t n = 0;
  std::size_t b = 0;
  std::vector<std::size_t> map;

  std::size_t operator()(std::size_t i) const { return map[i]; }
  /// Explicit n×n permutation matrix with P[i, h(i)] = 1.
  Tensor to_dense() const;
};

/// Throws DimensionError unless n is a perfect square.
PermutationSpec permutation_spec(std::size_t n);

bool is_perfect_square(std::size_t n);
/// ⌊√n⌋ computed exactly on integers.
std::size_t isqrt(std::size_t n);

/// b dense b×b blocks along the diagonal, stored as a {b, b, b} tensor.
struct BlockDiagonal {
  Tensor blocks;

  std::size_t block_size() const { return blocks.shape()[1]; }
  std::size_t num_blocks() const { return blocks.shape()[0]; }
  std::size_t size() const { return num_blocks() * block_size(); }
  Tensor to_dense() const;
  /// Builds from a dense matrix; throws DimensionError if any entry outside
  /// the diagonal blocks is nonzero.
  static BlockDiagonal from_dense(const Tensor& dense, std::size_t block_size);
};

/// Order-2 Monarch matrix M = P·L·P·R·P with b = √n.
class MonarchMatrix {
 public:
  enum class Init { kaiming_block, identity_block };

  MonarchMatrix() = default;
  /// Kaiming-block draws every block entry with variance 1/√n (the per-block
  /// fan-in is b = √n), which keeps M·x at the variance of x.
  MonarchMatrix(std::size_t n, Init init, std::mt19937_64* rng = nullptr);
  /// Explicit init from two {b, b, b} block stacks.
  static MonarchMatrix from_blocks(std::size_t n, Tensor left, Tensor right);
  static MonarchMatrix zeros(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  std::size_t block_size() const noexcept { return perm_.b; }
  const PermutationSpec& permutation() const noexcept { return perm_; }

  BlockDiagonal& left() noexcept { return left_; }
  const BlockDiagonal& left() const noexcept { return left_; }
  BlockDiagonal& right() noexcept { return right_; }
  const BlockDiagonal& right() const noexcept { return right_; }

  /// Learnable scalars: 2·n^{3/2}.
  std::size_t param_count() const noexcept { return left_.blocks.size() + right_.blocks.size(); }
  /// P·dense(L)·P·dense(R)·P. For oracles and tests.
  Tensor to_dense() const;

 private:
  std::size_t n_ = 0;
  PermutationSpec perm_;
  BlockDiagonal left_;
  BlockDiagonal right_;
};

/// 2·n^{3/2}; n must be a perfect square.
std::uint64_t monarch_param_count(std::size_t n);

enum class Side { left, right };

/// left: M·X for X of shape n×d. right: X·M for X of shape d×n.
///
/// Runs the five-step permute / block-diagonal / permute / block-diagonal /
/// permute pipeline without materializing M, and adds the FLOP cost to the
/// calling thread's flop meter.
Tensor monarch_apply(const MonarchMatrix& m, const Tensor& x, Side side);
/// Differentiable through x and, when bound with Tape::param, the L/R blocks.
Var monarch_apply(const MonarchMatrix& m, Var x, Side side);

/// FLOPs of one apply: 2 block-diagonal products of n^{3/2}·d multiply-adds
/// each, 2 FLOPs per multiply-add.
std::uint64_t monarch_apply_flops(std::size_t n, std::size_t d);

/// Per-thread counter of FLOPs spent in monarch_apply forwards.
namespace flop_meter {
void reset();
std::uint64_t count();
void add(std::uint64_t flops);
}  // namespace flop_meter

/// Zero-padding of an extent up to the next perfect square.
struct SquarePadding {
  std::size_t n = 0;
  std::size_t n_pad = 0;

  Tensor lift_rows(const Tensor& x) const;
  Tensor project_rows(const Tensor& x) const;
  Tensor lift_cols(const Tensor& x) const;
  Tensor project_cols(const Tensor& x) const;
  Var lift_rows(Var x) const;
  Var project_rows(Var x) const;
  Var lift_cols(Var x) const;
  Var project_cols(Var x) const;
};

SquarePadding pad_to_square(std::size_t n);

}  // namespace msb
