#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace msb {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Gradients and tape handles are not stored here; they live on the Tape
/// node that owns a recorded value (see autograd.hpp).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor identity(std::size_t n);
  /// Entries drawn from normal(0, stddev).
  static Tensor randn(Shape shape, std::mt19937_64& rng, double stddev = 1.0);
  static Tensor uniform(Shape shape, std::mt19937_64& rng, double lo, double hi);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  Tensor reshaped(Shape shape) const;
  void fill(double value);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t shape_numel(const Shape& shape);

/// Largest |a - b| over matching entries; throws DimensionError on shape mismatch.
double max_abs_diff(const Tensor& a, const Tensor& b);
double max_abs(const Tensor& a);

enum class Activation { relu, gelu, identity };

Activation parse_activation(const std::string& name);
std::string to_string(Activation kind);

// Plain (untaped) kernels. The differentiable versions in autograd.hpp call
// into these for their forward values.
namespace kernels {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor elementwise_mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// a[m×n] + bias[n] broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& bias);
Tensor softmax_rows(const Tensor& a);

inline constexpr double kLayerNormEps = 1e-5;
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias);

inline constexpr double kGeluC = 0.7978845608;
inline constexpr double kGeluA = 0.044715;
double gelu(double x);
double gelu_grad(double x);
Tensor activation(const Tensor& a, Activation kind);

double sum(const Tensor& a);

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t width);
Tensor concat_cols(std::span<const Tensor> parts);
/// Zero-pads or truncates the row count to `rows`.
Tensor resize_rows(const Tensor& a, std::size_t rows);
/// Zero-pads or truncates the column count to `cols`.
Tensor resize_cols(const Tensor& a, std::size_t cols);

/// out[r, :] = a[perm[r], :]
Tensor permute_rows(const Tensor& a, std::span<const std::size_t> perm);
/// out[:, c] = a[:, perm[c]]
Tensor permute_cols(const Tensor& a, std::span<const std::size_t> perm);

/// Block-diagonal product B·X where `blocks` has shape {nb, b, b} and X has nb·b rows.
Tensor blockdiag_left(const Tensor& blocks, const Tensor& x);
/// Block-diagonal product X·B where X has nb·b columns.
Tensor blockdiag_right(const Tensor& x, const Tensor& blocks);

}  // namespace kernels
}  // namespace msb
