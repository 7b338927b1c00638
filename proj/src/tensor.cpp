#include "msb/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "msb/errors.hpp"

namespace msb {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto extent : shape_) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape_));
  }
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto extent : shape_) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape_));
  }
  if (shape_numel(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_str(shape_) + " does not hold " + std::to_string(data_.size()) +
                         " values");
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0) throw DimensionError("from_rows: empty matrix");
  const std::size_t n_cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * n_cols);
  for (const auto& row : rows) {
    if (row.size() != n_cols) throw DimensionError("from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), n_cols}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, double stddev) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data_) v = dist(rng);
  return t;
}

Tensor Tensor::uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.data_) v = dist(rng);
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("expected a matrix, got shape " + shape_str(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("expected a matrix, got shape " + shape_str(shape_));
  return shape_[1];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != size()) {
    throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "gelu") return Activation::gelu;
  if (name == "identity") return Activation::identity;
  throw ConfigError("unknown activation kind '" + name + "' (expected relu, gelu or identity)");
}

std::string to_string(Activation kind) {
  switch (kind) {
    case Activation::relu: return "relu";
    case Activation::gelu: return "gelu";
    case Activation::identity: return "identity";
  }
  throw ConfigError("unknown activation kind");
}

namespace kernels {
namespace {

void require_matrix(const Tensor& a, const char* op) {
  if (a.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  Tensor c({m, n});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const double av = pa[i * k + t];
      const double* brow = pb + t * n;
      double* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  Tensor t({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
  return c;
}

Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "elementwise_mul");
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= b[i];
  return c;
}

Tensor scale(const Tensor& a, double s) {
  Tensor c = a;
  for (auto& v : c.data()) v *= s;
  return c;
}

Tensor add_row(const Tensor& a, const Tensor& bias) {
  require_matrix(a, "add_row");
  if (bias.size() != a.cols()) {
    throw DimensionError("add_row: bias " + shape_str(bias.shape()) + " does not match " + shape_str(a.shape()));
  }
  Tensor c = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) += bias[j];
  return c;
}

Tensor softmax_rows(const Tensor& a) {
  require_matrix(a, "softmax_rows");
  Tensor out({a.rows(), a.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double row_max = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double v = a(i, j);
      if (std::isnan(v)) throw NumericError("softmax_rows: NaN in row " + std::to_string(i));
      row_max = std::max(row_max, v);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      out(i, j) = std::exp(a(i, j) - row_max);
      total += out(i, j);
    }
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) /= total;
  }
  return out;
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias) {
  require_matrix(a, "layer_norm");
  const std::size_t n = a.cols();
  if (n < 2) throw DimensionError("layer_norm: needs at least 2 features, got " + shape_str(a.shape()));
  if (gain.size() != n || bias.size() != n) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" + shape_str(bias.shape()) +
                         " do not match " + shape_str(a.shape()));
  }
  Tensor out({a.rows(), n});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += a(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (a(i, j) - mean) * (a(i, j) - mean);
    var /= static_cast<double>(n);
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < n; ++j) out(i, j) = (a(i, j) - mean) * inv_std * gain[j] + bias[j];
  }
  return out;
}

double gelu(double x) {
  const double inner = kGeluC * (x + kGeluA * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(inner));
}

double gelu_grad(double x) {
  const double inner = kGeluC * (x + kGeluA * x * x * x);
  const double t = std::tanh(inner);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

Tensor activation(const Tensor& a, Activation kind) {
  Tensor out = a;
  switch (kind) {
    case Activation::relu:
      for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::gelu:
      for (auto& v : out.data()) v = gelu(v);
      break;
    case Activation::identity:
      break;
  }
  return out;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s;
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t width) {
  require_matrix(a, "slice_cols");
  if (width == 0 || start + width > a.cols()) {
    throw DimensionError("slice_cols: columns [" + std::to_string(start) + ", " + std::to_string(start + width) +
                         ") out of range for " + shape_str(a.shape()));
  }
  Tensor out({a.rows(), width});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < width; ++j) out(i, j) = a(i, start + j);
  return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw DimensionError("concat_cols: row count mismatch " + shape_str(p.shape()));
    cols += p.cols();
  }
  Tensor out({rows, cols});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) out(i, offset + j) = p(i, j);
    offset += p.cols();
  }
  return out;
}

Tensor resize_rows(const Tensor& a, std::size_t rows) {
  require_matrix(a, "resize_rows");
  Tensor out({rows, a.cols()});
  const std::size_t keep = std::min(rows, a.rows());
  std::copy_n(a.data().begin(), keep * a.cols(), out.data().begin());
  return out;
}

Tensor resize_cols(const Tensor& a, std::size_t cols) {
  require_matrix(a, "resize_cols");
  Tensor out({a.rows(), cols});
  const std::size_t keep = std::min(cols, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < keep; ++j) out(i, j) = a(i, j);
  return out;
}

Tensor permute_rows(const Tensor& a, std::span<const std::size_t> perm) {
  require_matrix(a, "permute_rows");
  if (perm.size() != a.rows()) {
    throw DimensionError("permute_rows: permutation of size " + std::to_string(perm.size()) +
                         " applied to " + shape_str(a.shape()));
  }
  const std::size_t n_cols = a.cols();
  Tensor out({a.rows(), n_cols});
  for (std::size_t r = 0; r < perm.size(); ++r) {
    std::copy_n(a.data().begin() + perm[r] * n_cols, n_cols, out.data().begin() + r * n_cols);
  }
  return out;
}

Tensor permute_cols(const Tensor& a, std::span<const std::size_t> perm) {
  require_matrix(a, "permute_cols");
  if (perm.size() != a.cols()) {
    throw DimensionError("permute_cols: permutation of size " + std::to_string(perm.size()) +
                         " applied to " + shape_str(a.shape()));
  }
  Tensor out({a.rows(), a.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t c = 0; c < perm.size(); ++c) out(i, c) = a(i, perm[c]);
  return out;
}

namespace {

void require_blocks(const Tensor& blocks, std::size_t extent, const char* op) {
  if (blocks.rank() != 3 || blocks.shape()[1] != blocks.shape()[2]) {
    throw DimensionError(std::string(op) + ": blocks must have shape {nb, b, b}, got " + shape_str(blocks.shape()));
  }
  if (blocks.shape()[0] * blocks.shape()[1] != extent) {
    throw DimensionError(std::string(op) + ": blocks " + shape_str(blocks.shape()) + " cover " +
                         std::to_string(blocks.shape()[0] * blocks.shape()[1]) + " indices, operand has " +
                         std::to_string(extent));
  }
}

}  // namespace

Tensor blockdiag_left(const Tensor& blocks, const Tensor& x) {
  require_matrix(x, "blockdiag_left");
  require_blocks(blocks, x.rows(), "blockdiag_left");
  const std::size_t nb = blocks.shape()[0], b = blocks.shape()[1], d = x.cols();
  Tensor out({x.rows(), d});
  const double* pb = blocks.data().data();
  const double* px = x.data().data();
  double* po = out.data().data();
  for (std::size_t k = 0; k < nb; ++k) {
    const double* blk = pb + k * b * b;
    for (std::size_t i = 0; i < b; ++i) {
      double* orow = po + (k * b + i) * d;
      for (std::size_t t = 0; t < b; ++t) {
        const double w = blk[i * b + t];
        const double* xrow = px + (k * b + t) * d;
        for (std::size_t j = 0; j < d; ++j) orow[j] += w * xrow[j];
      }
    }
  }
  return out;
}

Tensor blockdiag_right(const Tensor& x, const Tensor& blocks) {
  require_matrix(x, "blockdiag_right");
  require_blocks(blocks, x.cols(), "blockdiag_right");
  const std::size_t nb = blocks.shape()[0], b = blocks.shape()[1], n = x.cols();
  Tensor out({x.rows(), n});
  const double* pb = blocks.data().data();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* xrow = x.data().data() + r * n;
    double* orow = out.data().data() + r * n;
    for (std::size_t k = 0; k < nb; ++k) {
      const double* blk = pb + k * b * b;
      for (std::size_t t = 0; t < b; ++t) {
        const double xv = xrow[k * b + t];
        const double* brow = blk + t * b;
        for (std::size_t j = 0; j < b; ++j) orow[k * b + j] += xv * brow[j];
      }
    }
  }
  return out;
}

}  // namespace kernels
}  // namespace msb
