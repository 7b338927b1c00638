#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "msb/errors.hpp"
#include "msb/tensor.hpp"

using namespace msb;

TEST_CASE("matmul of two 2x2 matrices") {
  const Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  const Tensor b = Tensor::from_rows({{5, 6}, {7, 8}});
  CHECK(kernels::matmul(a, b) == Tensor::from_rows({{19, 22}, {43, 50}}));
  CHECK_THROWS_AS(kernels::matmul(a, Tensor({3, 2})), DimensionError);
}

TEST_CASE("transpose, add, scale, add_row") {
  const Tensor a = Tensor::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(kernels::transpose(a) == Tensor::from_rows({{1, 4}, {2, 5}, {3, 6}}));
  CHECK(kernels::add(a, a) == kernels::scale(a, 2.0));
  CHECK(kernels::add_row(a, Tensor::vector({10, 20, 30})) == Tensor::from_rows({{11, 22, 33}, {14, 25, 36}}));
  CHECK_THROWS_AS(kernels::add(a, Tensor({3, 2})), DimensionError);
}

TEST_CASE("softmax rows") {
  const Tensor s = kernels::softmax_rows(Tensor::from_rows({{0.0, std::log(3.0)}, {1000.0, 1000.0}}));
  CHECK(s(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(s(0, 1) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(s(1, 0) == 0.5);
  CHECK_THROWS_AS(kernels::softmax_rows(Tensor::from_rows({{NAN, 0.0}})), NumericError);
}

TEST_CASE("layer norm normalizes each row") {
  const Tensor x = Tensor::from_rows({{1, 2, 3}});
  const Tensor y = kernels::layer_norm(x, Tensor::vector({1, 1, 1}), Tensor::vector({0, 0, 0}));
  const double denom = std::sqrt(2.0 / 3.0 + kernels::kLayerNormEps);
  CHECK(y(0, 0) == doctest::Approx(-1.0 / denom).epsilon(1e-14));
  CHECK(y(0, 1) == 0.0);
  CHECK(y(0, 2) == doctest::Approx(1.0 / denom).epsilon(1e-14));
  const Tensor g = kernels::layer_norm(x, Tensor::vector({2, 2, 2}), Tensor::vector({1, 1, 1}));
  CHECK(g(0, 2) == doctest::Approx(1.0 + 2.0 / denom).epsilon(1e-14));
  CHECK_THROWS_AS(kernels::layer_norm(Tensor({2, 1}), Tensor::vector({1}), Tensor::vector({0})), DimensionError);
}

TEST_CASE("gelu tanh approximation") {
  CHECK(kernels::gelu(0.0) == 0.0);
  CHECK(kernels::gelu(1.0) == doctest::Approx(0.5 * (1 + std::tanh(0.7978845608 * 1.044715))).epsilon(1e-15));
  CHECK(kernels::gelu(-30.0) == doctest::Approx(0.0));
  const double h = 1e-6;
  for (double x : {-2.0, -0.5, 0.3, 1.7}) {
    const double numeric = (kernels::gelu(x + h) - kernels::gelu(x - h)) / (2 * h);
    CHECK(kernels::gelu_grad(x) == doctest::Approx(numeric).epsilon(1e-8));
  }
}

TEST_CASE("activation parsing") {
  CHECK(parse_activation("relu") == Activation::relu);
  CHECK(parse_activation("gelu") == Activation::gelu);
  CHECK(parse_activation("identity") == Activation::identity);
  CHECK(to_string(Activation::gelu) == "gelu");
  CHECK_THROWS_AS(parse_activation("swish"), ConfigError);
  CHECK(kernels::activation(Tensor::vector({-1, 2}), Activation::relu) == Tensor::vector({0, 2}));
}

TEST_CASE("resize pads with zeros and truncates") {
  const Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  CHECK(kernels::resize_rows(a, 3) == Tensor::from_rows({{1, 2}, {3, 4}, {0, 0}}));
  CHECK(kernels::resize_rows(a, 1) == Tensor::from_rows({{1, 2}}));
  CHECK(kernels::resize_cols(a, 3) == Tensor::from_rows({{1, 2, 0}, {3, 4, 0}}));
  CHECK(kernels::slice_cols(a, 1, 1) == Tensor::from_rows({{2}, {4}}));
  const Tensor parts[] = {kernels::slice_cols(a, 0, 1), kernels::slice_cols(a, 1, 1)};
  CHECK(kernels::concat_cols(parts) == a);
}

TEST_CASE("permutations and block-diagonal products") {
  std::mt19937_64 rng(1);
  const Tensor x = Tensor::randn({4, 3}, rng);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  const Tensor p = kernels::permute_rows(x, perm);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(p(r, c) == x(perm[r], c));

  const Tensor blocks = Tensor::randn({2, 2, 2}, rng);
  Tensor dense({4, 4});
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) dense(2 * k + i, 2 * k + j) = blocks[(2 * k + i) * 2 + j];
  CHECK(max_abs_diff(kernels::blockdiag_left(blocks, x), kernels::matmul(dense, x)) < 1e-15);
  const Tensor xt = kernels::transpose(x);
  CHECK(max_abs_diff(kernels::blockdiag_right(xt, blocks), kernels::matmul(xt, dense)) < 1e-15);
}

TEST_CASE("seeded factories are reproducible") {
  std::mt19937_64 a(42), b(42);
  CHECK(Tensor::randn({3, 3}, a) == Tensor::randn({3, 3}, b));
  const Tensor u = Tensor::uniform({100}, a, 0.1, 1.0);
  for (double v : u.data()) CHECK((v >= 0.1 && v < 1.0));
  CHECK(Tensor::identity(3)(1, 1) == 1.0);
  CHECK(max_abs(Tensor::vector({-3, 2})) == 3.0);
  CHECK_THROWS_AS(max_abs_diff(Tensor({2}), Tensor({3})), DimensionError);
}
