#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "msb/errors.hpp"
#include "msb/gradcheck.hpp"

using namespace msb;

namespace {

// Gradient check of loss = Σ f(inputs) ⊙ C on freshly drawn inputs.
double check_op(const std::vector<Shape>& shapes, const std::function<Var(std::vector<Var>&)>& f,
                std::uint64_t seed = 1, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::vector<Tensor> inputs;
  for (const auto& s : shapes) inputs.push_back(Tensor::uniform(s, rng, lo, hi));
  Tensor weights;
  {
    Tape probe(false);
    std::vector<Var> vs;
    for (auto& t : inputs) vs.push_back(probe.constant(t));
    weights = Tensor::randn(f(vs).shape(), rng);
  }
  std::vector<std::pair<std::string, Tensor*>> named;
  for (std::size_t i = 0; i < inputs.size(); ++i) named.emplace_back("in" + std::to_string(i), &inputs[i]);
  auto build = [&](Tape& tape) {
    std::vector<Var> vs;
    for (auto& t : inputs) vs.push_back(tape.param(t));
    return sum(elementwise_mul(f(vs), tape.constant(weights)));
  };
  return check_gradients(build, named, 30, rng).max_rel_err;
}

}  // namespace

TEST_CASE("relative error definition") {
  CHECK(gradient_relative_error(1.0, 1.0) == 0.0);
  CHECK(gradient_relative_error(2.0, 1.0) == 0.5);
  CHECK(gradient_relative_error(0.0, 1e-10) == doctest::Approx(1e-2));
}

TEST_CASE("elementary op gradients match central differences") {
  CHECK(check_op({{3, 4}, {4, 2}}, [](auto& v) { return matmul(v[0], v[1]); }) < 1e-7);
  CHECK(check_op({{3, 4}}, [](auto& v) { return transpose(v[0]); }) < 1e-7);
  CHECK(check_op({{3, 4}, {3, 4}}, [](auto& v) { return sub(add(v[0], v[1]), scale(v[1], 3.0)); }) < 1e-7);
  CHECK(check_op({{3, 4}, {3, 4}}, [](auto& v) { return elementwise_mul(v[0], v[1]); }) < 1e-7);
  CHECK(check_op({{3, 4}, {4}}, [](auto& v) { return add_row(v[0], v[1]); }) < 1e-7);
  CHECK(check_op({{3, 4}}, [](auto& v) { return softmax_rows(v[0]); }) < 1e-6);
  CHECK(check_op({{3, 5}, {5}, {5}}, [](auto& v) { return layer_norm(v[0], v[1], v[2]); }) < 1e-6);
  CHECK(check_op({{3, 4}}, [](auto& v) { return activation(v[0], Activation::gelu); }) < 1e-7);
  CHECK(check_op({{3, 4}}, [](auto& v) { return reshape(v[0], {2, 6}); }) < 1e-7);
  CHECK(check_op({{3, 4}}, [](auto& v) { return slice_cols(v[0], 1, 2); }) < 1e-7);
  CHECK(check_op({{3, 4}, {3, 2}}, [](auto& v) {
          const Var parts[] = {v[0], v[1]};
          return concat_cols(parts);
        }) < 1e-7);
  CHECK(check_op({{3, 4}}, [](auto& v) { return resize_rows(resize_cols(v[0], 2), 5); }) < 1e-7);
  CHECK(check_op({{4, 3}}, [](auto& v) {
          const std::size_t p[] = {3, 0, 2, 1};
          return permute_rows(v[0], p);
        }) < 1e-7);
  CHECK(check_op({{3, 4}}, [](auto& v) {
          const std::size_t p[] = {1, 3, 0, 2};
          return permute_cols(v[0], p);
        }) < 1e-7);
  CHECK(check_op({{2, 2, 2}, {4, 3}}, [](auto& v) { return blockdiag_left(v[0], v[1]); }) < 1e-7);
  CHECK(check_op({{3, 4}, {2, 2, 2}}, [](auto& v) { return blockdiag_right(v[0], v[1]); }) < 1e-7);
  CHECK(check_op({{3, 4}, {3, 4}}, [](auto& v) { return reshape(mse_loss(v[0], v[1]), {1}); }) < 1e-7);
  CHECK(check_op({{3, 4}}, [](auto& v) { return reshape(mean(v[0]), {1}); }) < 1e-7);
}

TEST_CASE("relu gradient away from the kink") {
  CHECK(check_op({{3, 4}}, [](auto& v) { return activation(v[0], Activation::relu); }, 2, 0.1, 1.0) < 1e-7);
  CHECK(check_op({{3, 4}}, [](auto& v) { return activation(v[0], Activation::relu); }, 3, -1.0, -0.1) < 1e-7);
}

TEST_CASE("reused parameter accumulates") {
  Tensor w = Tensor::from_rows({{1.0, 2.0}});
  Tape tape;
  Var a = tape.param(w);
  Var b = tape.param(w);
  CHECK(a.id() == b.id());
  tape.backward(sum(add(a, elementwise_mul(b, b))));
  CHECK(tape.grad_of(w) == Tensor::from_rows({{3.0, 5.0}}));
}

TEST_CASE("backward contract") {
  Tape tape;
  Var x = tape.leaf(Tensor({2, 2}, 1.0), true);
  CHECK_THROWS_AS(tape.backward(x), ContractError);
  Tensor p({1}, 1.0);
  Tape off(false);
  off.backward(sum(off.param(p)));
  CHECK(off.grad_of(p) == Tensor({1}));
  Tensor unused({2});
  CHECK(tape.grad_of(unused) == Tensor({2}));
}

TEST_CASE("gradients are bit-reproducible") {
  std::mt19937_64 rng(5);
  Tensor w = Tensor::randn({4, 4}, rng);
  const Tensor x = Tensor::randn({3, 4}, rng);
  auto grad = [&] {
    Tape tape;
    Var h = activation(matmul(tape.constant(x), tape.param(w)), Activation::gelu);
    tape.backward(sum(softmax_rows(matmul(h, tape.param(w)))));
    return tape.grad_of(w);
  };
  CHECK(grad() == grad());
}
