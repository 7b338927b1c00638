#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <random>

#include "msb/bench.hpp"
#include "msb/errors.hpp"
#include "msb/monarch.hpp"
#include "msb/surrogate.hpp"
#include "msb/verification.hpp"

namespace py = pybind11;
using namespace msb;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

MonarchMatrix monarch_from(const Array& left, const Array& right) {
  const Tensor l = to_tensor(left);
  if (l.shape().size() != 3) throw DimensionError("blocks must have shape (b, b, b)");
  const std::size_t b = l.shape()[0];
  return MonarchMatrix::from_blocks(b * b, l, to_tensor(right));
}

Side parse_side(const std::string& s) {
  if (s == "left") return Side::left;
  if (s == "right") return Side::right;
  throw ConfigError("side must be 'left' or 'right'");
}

ModelConfig model_config(const std::string& variant, std::size_t seq_len, std::size_t horizon, std::size_t d_model,
                         std::size_t heads, std::size_t d_ff, std::size_t layers) {
  ModelConfig c;
  c.variant = parse_variant(variant);
  c.seq_len = seq_len;
  c.horizon = horizon;
  c.d_model = d_model;
  c.heads = heads;
  c.d_ff = d_ff;
  c.layers = layers;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.def("monarch_param_count", &monarch_param_count, py::arg("n"));
  m.def("permutation", [](std::size_t n) { return permutation_spec(n).map; }, py::arg("n"));
  m.def(
      "random_monarch_blocks",
      [](std::size_t n, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        const MonarchMatrix mm(n, MonarchMatrix::Init::kaiming_block, &rng);
        return py::make_tuple(to_array(mm.left().blocks), to_array(mm.right().blocks));
      },
      py::arg("n"), py::arg("seed") = 0);
  m.def(
      "monarch_apply",
      [](const Array& left, const Array& right, const Array& x, const std::string& side) {
        return to_array(monarch_apply(monarch_from(left, right), to_tensor(x), parse_side(side)));
      },
      py::arg("left"), py::arg("right"), py::arg("x"), py::arg("side") = "left");
  m.def(
      "monarch_to_dense", [](const Array& left, const Array& right) { return to_array(monarch_from(left, right).to_dense()); },
      py::arg("left"), py::arg("right"));

  m.def(
      "surrogate_attention",
      [](const Array& x, std::size_t heads, std::uint64_t seed) {
        const Tensor t = to_tensor(x);
        std::mt19937_64 rng(seed);
        const auto p = SurrogateAttentionParams::random(t.rows(), t.cols(), t.cols(), heads, rng);
        return py::make_tuple(to_array(surrogate_attention_forward(t, p)), to_array(dense_oracle_attention(t, p)));
      },
      py::arg("x"), py::arg("heads") = 1, py::arg("seed") = 0,
      "Random-init SAB on x; returns (fast output, dense oracle output).");
  m.def(
      "surrogate_ffn",
      [](const Array& x, const std::string& sigma, std::uint64_t seed) {
        const Tensor t = to_tensor(x);
        std::mt19937_64 rng(seed);
        const auto p = SurrogateFFNParams::random(t.cols(), parse_activation(sigma), rng);
        return py::make_tuple(to_array(surrogate_ffn_forward(t, p)), to_array(dense_oracle_ffn(t, p)));
      },
      py::arg("x"), py::arg("sigma") = "gelu", py::arg("seed") = 0,
      "Random-init SFB on x; returns (fast output, dense oracle output).");

  m.def("check_names", &check_names);
  m.def(
      "run_verify",
      [](std::uint64_t seed, std::size_t seeds, std::optional<std::vector<std::string>> checks) {
        VerifyConfig cfg;
        cfg.seed = seed;
        cfg.seeds = seeds;
        cfg.selection = std::move(checks);
        py::list out;
        for (const auto& r : run_all(cfg)) {
          py::dict d;
          d["name"] = r.name;
          d["max_abs_diff"] = r.max_abs_diff;
          d["threshold"] = r.threshold;
          d["passed"] = r.passed;
          d["seeds_run"] = r.seeds_run;
          d["detail"] = r.detail;
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 0, py::arg("seeds") = 10, py::arg("checks") = py::none());

  m.def(
      "count_params",
      [](const std::string& variant, std::size_t seq_len, std::size_t horizon, std::size_t d_model, std::size_t heads,
         std::size_t d_ff, std::size_t layers) {
        return count_params(model_config(variant, seq_len, horizon, d_model, heads, d_ff, layers)).by_role;
      },
      py::arg("variant"), py::arg("seq_len") = 96, py::arg("horizon") = 24, py::arg("d_model") = 512,
      py::arg("heads") = 8, py::arg("d_ff") = 2048, py::arg("layers") = 2);
  m.def(
      "count_flops",
      [](const std::string& variant, std::size_t seq_len, std::size_t horizon, std::size_t d_model, std::size_t heads,
         std::size_t d_ff, std::size_t layers) {
        const FlopLedger f = count_flops(model_config(variant, seq_len, horizon, d_model, heads, d_ff, layers));
        std::map<std::string, std::uint64_t> out;
        for (const auto& [role, n] : f.multiply_adds) out[role] = 2 * n;
        return out;
      },
      py::arg("variant"), py::arg("seq_len") = 96, py::arg("horizon") = 24, py::arg("d_model") = 512,
      py::arg("heads") = 8, py::arg("d_ff") = 2048, py::arg("layers") = 2, "FLOPs per role, 2 per multiply-add.");
  m.def("fit_scaling_exponent", &fit_scaling_exponent, py::arg("sizes"), py::arg("measurements"));

  m.def(
      "generate_sine",
      [](double period, double amplitude, std::size_t samples, std::size_t input_len, std::size_t horizon) {
        SineDatasetSpec spec{period, amplitude, samples, input_len, horizon};
        const SineDataset ds = generate_sine(spec);
        py::dict d;
        d["series"] = py::array_t<double>(ds.series.size(), ds.series.data());
        d["train_end"] = ds.train_end;
        d["val_end"] = ds.val_end;
        d["windows"] = py::make_tuple(ds.train.size(), ds.val.size(), ds.test.size());
        return d;
      },
      py::arg("period") = 24.0, py::arg("amplitude") = 1.0, py::arg("samples") = 720, py::arg("input_len") = 48,
      py::arg("horizon") = 24);
}
