#include "msb/autograd.hpp"

#include <cmath>
#include <vector>

#include "msb/errors.hpp"

namespace msb {

const Tensor& Var::value() const { return tape_->value(id_); }

Tensor Var::grad() const {
  const Tensor& g = tape_->grad(id_);
  if (g.size() == 0) return Tensor(value().shape());
  return g;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad && grad_enabled_;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(const Tensor& parameter) {
  if (auto it = params_.find(&parameter); it != params_.end()) return Var(this, it->second);
  Var v = leaf(parameter, true);
  params_.emplace(&parameter, v.id());
  return v;
}

Tensor Tape::grad_of(const Tensor& parameter) const {
  auto it = params_.find(&parameter);
  if (it == params_.end() || !nodes_[it->second].has_grad) return Tensor(parameter.shape());
  return nodes_[it->second].grad;
}

Var Tape::record(Tensor value, std::vector<NodeId> inputs, BackwardFn backward) {
  bool needs = false;
  if (grad_enabled_) {
    for (NodeId in : inputs) needs = needs || nodes_[in].requires_grad;
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = needs;
  if (needs) {
    node.inputs = std::move(inputs);
    node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(NodeId id, const Tensor& g) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return;
  if (g.shape() != node.value.shape()) {
    throw DimensionError("gradient shape " + shape_str(g.shape()) + " does not match value " +
                         shape_str(node.value.shape()));
  }
  if (!node.has_grad) {
    node.grad = g;
    node.has_grad = true;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) node.grad[i] += g[i];
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " + shape_str(loss.value().shape()));
  }
  if (!nodes_[loss.id()].requires_grad) return;
  accumulate(loss.id(), Tensor(loss.value().shape(), 1.0));
  for (NodeId id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.has_grad || !node.backward) continue;
    node.backward(*this, id);
  }
}

namespace {

Tape& common_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
  return a.tape();
}

std::vector<std::size_t> invert(std::span<const std::size_t> perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  return tape.record(kernels::matmul(a.value(), b.value()), {a.id(), b.id()}, [](Tape& t, NodeId self) {
    const auto& in = t.inputs(self);
    const Tensor& g = t.grad(self);
    if (t.requires_grad(in[0])) t.accumulate(in[0], kernels::matmul(g, kernels::transpose(t.value(in[1]))));
    if (t.requires_grad(in[1])) t.accumulate(in[1], kernels::matmul(kernels::transpose(t.value(in[0])), g));
  });
}

Var transpose(Var a) {
  return a.tape().record(kernels::transpose(a.value()), {a.id()}, [](Tape& t, NodeId self) {
    t.accumulate(t.inputs(self)[0], kernels::transpose(t.grad(self)));
  });
}

Var add(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  return tape.record(kernels::add(a.value(), b.value()), {a.id(), b.id()}, [](Tape& t, NodeId self) {
    const auto& in = t.inputs(self);
    t.accumulate(in[0], t.grad(self));
    t.accumulate(in[1], t.grad(self));
  });
}

Var sub(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  return tape.record(kernels::sub(a.value(), b.value()), {a.id(), b.id()}, [](Tape& t, NodeId self) {
    const auto& in = t.inputs(self);
    t.accumulate(in[0], t.grad(self));
    if (t.requires_grad(in[1])) t.accumulate(in[1], kernels::scale(t.grad(self), -1.0));
  });
}

Var elementwise_mul(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  return tape.record(kernels::elementwise_mul(a.value(), b.value()), {a.id(), b.id()}, [](Tape& t, NodeId self) {
    const auto& in = t.inputs(self);
    const Tensor& g = t.grad(self);
    if (t.requires_grad(in[0])) t.accumulate(in[0], kernels::elementwise_mul(g, t.value(in[1])));
    if (t.requires_grad(in[1])) t.accumulate(in[1], kernels::elementwise_mul(g, t.value(in[0])));
  });
}

Var scale(Var a, double s) {
  return a.tape().record(kernels::scale(a.value(), s), {a.id()}, [s](Tape& t, NodeId self) {
    t.accumulate(t.inputs(self)[0], kernels::scale(t.grad(self), s));
  });
}

Var add_row(Var a, Var bias) {
  Tape& tape = common_tape(a, bias);
  return tape.record(kernels::add_row(a.value(), bias.value()), {a.id(), bias.id()}, [](Tape& t, NodeId self) {
    const auto& in = t.inputs(self);
    const Tensor& g = t.grad(self);
    t.accumulate(in[0], g);
    if (t.requires_grad(in[1])) {
      Tensor gb(t.value(in[1]).shape());
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g(i, j);
      t.accumulate(in[1], gb);
    }
  });
}

Var softmax_rows(Var a) {
  return a.tape().record(kernels::softmax_rows(a.value()), {a.id()}, [](Tape& t, NodeId self) {
    const Tensor& y = t.value(self);
    const Tensor& g = t.grad(self);
    Tensor dx(y.shape());
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) dx(i, j) = y(i, j) * (g(i, j) - dot);
    }
    t.accumulate(t.inputs(self)[0], dx);
  });
}

Var layer_norm(Var a, Var gain, Var bias) {
  Tape& tape = common_tape(a, gain);
  common_tape(a, bias);
  Tensor out = kernels::layer_norm(a.value(), gain.value(), bias.value());
  return tape.record(std::move(out), {a.id(), gain.id(), bias.id()}, [](Tape& t, NodeId self) {
    const auto& in = t.inputs(self);
    const Tensor& x = t.value(in[0]);
    const Tensor& gamma = t.value(in[1]);
    const Tensor& g = t.grad(self);
    const std::size_t m = x.rows(), n = x.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    Tensor dx(x.shape()), dgain(gamma.shape()), dbias(gamma.shape());
    std::vector<double> xhat(n), dxhat(n);
    for (std::size_t i = 0; i < m; ++i) {
      double mu = 0.0;
      for (std::size_t j = 0; j < n; ++j) mu += x(i, j);
      mu *= inv_n;
      double var = 0.0;
      for (std::size_t j = 0; j < n; ++j) var += (x(i, j) - mu) * (x(i, j) - mu);
      var *= inv_n;
      const double inv_std = 1.0 / std::sqrt(var + kernels::kLayerNormEps);
      double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        xhat[j] = (x(i, j) - mu) * inv_std;
        dxhat[j] = g(i, j) * gamma[j];
        mean_dxhat += dxhat[j];
        mean_dxhat_xhat += dxhat[j] * xhat[j];
        dgain[j] += g(i, j) * xhat[j];
        dbias[j] += g(i, j);
      }
      mean_dxhat *= inv_n;
      mean_dxhat_xhat *= inv_n;
      for (std::size_t j = 0; j < n; ++j) dx(i, j) = inv_std * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
    }
    t.accumulate(in[0], dx);
    t.accumulate(in[1], dgain);
    t.accumulate(in[2], dbias);
  });
}

Var activation(Var a, Activation kind) {
  return a.tape().record(kernels::activation(a.value(), kind), {a.id()}, [kind](Tape& t, NodeId self) {
    const NodeId in = t.inputs(self)[0];
    const Tensor& x = t.value(in);
    Tensor dx = t.grad(self);
    switch (kind) {
      case Activation::relu:
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = x[i] > 0.0 ? dx[i] : 0.0;
        break;
      case Activation::gelu:
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= kernels::gelu_grad(x[i]);
        break;
      case Activation::identity:
        break;
    }
    t.accumulate(in, dx);
  });
}

Var sum(Var a) {
  return a.tape().record(Tensor({1}, kernels::sum(a.value())), {a.id()}, [](Tape& t, NodeId self) {
    const NodeId in = t.inputs(self)[0];
    t.accumulate(in, Tensor(t.value(in).shape(), t.grad(self)[0]));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return a.tape().record(Tensor({1}, kernels::sum(a.value()) / n), {a.id()}, [n](Tape& t, NodeId self) {
    const NodeId in = t.inputs(self)[0];
    t.accumulate(in, Tensor(t.value(in).shape(), t.grad(self)[0] / n));
  });
}

Var reshape(Var a, Shape shape) {
  return a.tape().record(a.value().reshaped(std::move(shape)), {a.id()}, [](Tape& t, NodeId self) {
    const NodeId in = t.inputs(self)[0];
    t.accumulate(in, t.grad(self).reshaped(t.value(in).shape()));
  });
}

Var slice_cols(Var a, std::size_t start, std::size_t width) {
  return a.tape().record(kernels::slice_cols(a.value(), start, width), {a.id()}, [start](Tape& t, NodeId self) {
    const NodeId in = t.inputs(self)[0];
    const Tensor& g = t.grad(self);
    Tensor dx(t.value(in).shape());
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) dx(i, start + j) = g(i, j);
    t.accumulate(in, dx);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  std::vector<Tensor> values;
  std::vector<NodeId> ids;
  for (const Var& p : parts) {
    common_tape(parts.front(), p);
    values.push_back(p.value());
    ids.push_back(p.id());
  }
  return parts.front().tape().record(kernels::concat_cols(values), ids, [](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    std::size_t offset = 0;
    for (NodeId in : t.inputs(self)) {
      const std::size_t width = t.value(in).cols();
      if (t.requires_grad(in)) t.accumulate(in, kernels::slice_cols(g, offset, width));
      offset += width;
    }
  });
}

Var resize_rows(Var a, std::size_t rows) {
  return a.tape().record(kernels::resize_rows(a.value(), rows), {a.id()}, [](Tape& t, NodeId self) {
    const NodeId in = t.inputs(self)[0];
    t.accumulate(in, kernels::resize_rows(t.grad(self), t.value(in).rows()));
  });
}

Var resize_cols(Var a, std::size_t cols) {
  return a.tape().record(kernels::resize_cols(a.value(), cols), {a.id()}, [](Tape& t, NodeId self) {
    const NodeId in = t.inputs(self)[0];
    t.accumulate(in, kernels::resize_cols(t.grad(self), t.value(in).cols()));
  });
}

Var permute_rows(Var a, std::span<const std::size_t> perm) {
  Tensor out = kernels::permute_rows(a.value(), perm);
  return a.tape().record(std::move(out), {a.id()}, [inv = invert(perm)](Tape& t, NodeId self) {
    t.accumulate(t.inputs(self)[0], kernels::permute_rows(t.grad(self), inv));
  });
}

Var permute_cols(Var a, std::span<const std::size_t> perm) {
  Tensor out = kernels::permute_cols(a.value(), perm);
  return a.tape().record(std::move(out), {a.id()}, [inv = invert(perm)](Tape& t, NodeId self) {
    t.accumulate(t.inputs(self)[0], kernels::permute_cols(t.grad(self), inv));
  });
}

Var blockdiag_left(Var blocks, Var x) {
  Tape& tape = common_tape(blocks, x);
  return tape.record(kernels::blockdiag_left(blocks.value(), x.value()), {blocks.id(), x.id()},
                     [](Tape& t, NodeId self) {
                       const auto& in = t.inputs(self);
                       const Tensor& bl = t.value(in[0]);
                       const Tensor& xv = t.value(in[1]);
                       const Tensor& g = t.grad(self);
                       const std::size_t nb = bl.shape()[0], b = bl.shape()[1], d = xv.cols();
                       if (t.requires_grad(in[0])) {
                         // dB_k = dY_k · X_kᵀ
                         Tensor db(bl.shape());
                         for (std::size_t k = 0; k < nb; ++k)
                           for (std::size_t i = 0; i < b; ++i)
                             for (std::size_t s = 0; s < b; ++s) {
                               double acc = 0.0;
                               for (std::size_t j = 0; j < d; ++j) acc += g(k * b + i, j) * xv(k * b + s, j);
                               db[(k * b + i) * b + s] = acc;
                             }
                         t.accumulate(in[0], db);
                       }
                       if (t.requires_grad(in[1])) {
                         // dX_k = B_kᵀ · dY_k
                         Tensor dx(xv.shape());
                         for (std::size_t k = 0; k < nb; ++k)
                           for (std::size_t i = 0; i < b; ++i)
                             for (std::size_t s = 0; s < b; ++s) {
                               const double w = bl[(k * b + i) * b + s];
                               for (std::size_t j = 0; j < d; ++j) dx(k * b + s, j) += w * g(k * b + i, j);
                             }
                         t.accumulate(in[1], dx);
                       }
                     });
}

Var blockdiag_right(Var x, Var blocks) {
  Tape& tape = common_tape(x, blocks);
  return tape.record(kernels::blockdiag_right(x.value(), blocks.value()), {x.id(), blocks.id()},
                     [](Tape& t, NodeId self) {
                       const auto& in = t.inputs(self);
                       const Tensor& xv = t.value(in[0]);
                       const Tensor& bl = t.value(in[1]);
                       const Tensor& g = t.grad(self);
                       const std::size_t nb = bl.shape()[0], b = bl.shape()[1], m = xv.rows();
                       if (t.requires_grad(in[0])) {
                         // dX_k = dY_k · B_kᵀ
                         Tensor dx(xv.shape());
                         for (std::size_t r = 0; r < m; ++r)
                           for (std::size_t k = 0; k < nb; ++k)
                             for (std::size_t s = 0; s < b; ++s) {
                               double acc = 0.0;
                               for (std::size_t j = 0; j < b; ++j) acc += g(r, k * b + j) * bl[(k * b + s) * b + j];
                               dx(r, k * b + s) = acc;
                             }
                         t.accumulate(in[0], dx);
                       }
                       if (t.requires_grad(in[1])) {
                         // dB_k = X_kᵀ · dY_k
                         Tensor db(bl.shape());
                         for (std::size_t r = 0; r < m; ++r)
                           for (std::size_t k = 0; k < nb; ++k)
                             for (std::size_t s = 0; s < b; ++s) {
                               const double xv_rs = xv(r, k * b + s);
                               for (std::size_t j = 0; j < b; ++j) db[(k * b + s) * b + j] += xv_rs * g(r, k * b + j);
                             }
                         t.accumulate(in[1], db);
                       }
                     });
}

Var mse_loss(Var pred, Var target) {
  Var diff = sub(pred, target);
  return mean(elementwise_mul(diff, diff));
}

}  // namespace msb
