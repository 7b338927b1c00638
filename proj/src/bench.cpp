#include "msb/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>

#include "msb/errors.hpp"
#include "msb/monarch.hpp"

namespace msb {

Variant parse_variant(const std::string& name) {
  if (name == "dense") return Variant::dense;
  if (name == "surrogate") return Variant::surrogate;
  throw ConfigError("unknown variant '" + name + "' (expected dense or surrogate)");
}

std::string to_string(Variant v) { return v == Variant::dense ? "dense" : "surrogate"; }

void ModelConfig::validate() const {
  if (!seq_len || !horizon || !d_model || !heads || !layers) {
    throw ConfigError("model extents must all be positive");
  }
  if (d_model % heads != 0) {
    throw ConfigError("heads=" + std::to_string(heads) + " does not divide d_model=" + std::to_string(d_model));
  }
}

ModelConfig desk_config(Variant variant) {
  ModelConfig c;
  c.variant = variant;
  c.seq_len = 96;
  c.horizon = 24;
  c.d_model = 512;
  c.heads = 8;
  c.d_ff = 2048;
  c.layers = 2;
  c.norm = NormStyle::post_ln;
  return c;
}

std::uint64_t ParamCounts::total() const {
  std::uint64_t t = 0;
  for (const auto& [role, n] : by_role) t += n;
  return t;
}

std::uint64_t FlopLedger::total_multiply_adds() const {
  std::uint64_t t = 0;
  for (const auto& [role, n] : multiply_adds) t += n;
  return t;
}

ParamCounts count_params(const ModelConfig& c) {
  c.validate();
  using u64 = std::uint64_t;
  const u64 n = c.seq_len, d = c.d_model, h = c.heads, dh = c.d_head(), layers = c.layers;
  ParamCounts p;
  p.by_role["embedding"] = 2 * d;
  p.by_role["norm"] = layers * 4 * d;
  p.by_role["head"] = n * d * c.horizon + c.horizon;
  if (c.variant == Variant::dense) {
    p.by_role["LP"] = layers * (3 * h * d * dh + h * dh * d);
    p.by_role["attention"] = 0;
    p.by_role["FFN"] = layers * 2 * d * c.ffn_width();
  } else {
    const u64 dh_pad = pad_to_square(dh).n_pad;
    p.by_role["LP"] = layers * (3 * h * monarch_param_count(dh_pad) + h * dh * d);
    p.by_role["attention"] = layers * 2 * monarch_param_count(pad_to_square(n).n_pad);
    p.by_role["FFN"] = layers * 2 * monarch_param_count(pad_to_square(d).n_pad);
  }
  return p;
}

std::uint64_t dense_attention_multiply_adds(std::size_t n, std::size_t d_model, std::size_t heads) {
  const std::uint64_t nn = static_cast<std::uint64_t>(n) * n;
  return 2 * nn * d_model + 5 * nn * heads;
}

FlopLedger count_flops(const ModelConfig& c) {
  c.validate();
  using u64 = std::uint64_t;
  const u64 n = c.seq_len, d = c.d_model, h = c.heads, dh = c.d_head(), layers = c.layers;
  FlopLedger f;
  f.multiply_adds["embedding"] = n * d;
  f.multiply_adds["head"] = n * d * c.horizon;
  if (c.variant == Variant::dense) {
    f.multiply_adds["LP"] = layers * (3 * h * n * d * dh + n * h * dh * d);
    f.multiply_adds["attention"] = layers * dense_attention_multiply_adds(n, d, h);
    f.multiply_adds["FFN"] = layers * 2 * n * d * c.ffn_width();
    return f;
  }
  // monarch_apply_flops counts FLOPs; halve for multiply-adds.
  const u64 dh_pad = pad_to_square(dh).n_pad;
  const u64 n_pad = pad_to_square(n).n_pad;
  const u64 d_pad = pad_to_square(d).n_pad;
  const u64 lp_monarch = 3 * h * monarch_apply_flops(dh_pad, n) / 2;
  const u64 seq_monarch = 2 * h * monarch_apply_flops(n_pad, dh) / 2;
  const u64 ffn_monarch = 2 * monarch_apply_flops(d_pad, n) / 2;
  f.multiply_adds["LP"] = layers * (lp_monarch + h * n * dh * d);
  f.multiply_adds["attention"] = layers * (seq_monarch + 2 * h * n_pad * dh);
  f.multiply_adds["FFN"] = layers * ffn_monarch;
  f.monarch_multiply_adds = layers * (lp_monarch + seq_monarch + ffn_monarch);
  return f;
}

double fit_scaling_exponent(const std::vector<double>& sizes, const std::vector<double>& measurements) {
  if (sizes.size() != measurements.size()) throw DimensionError("fit_scaling_exponent: size/measurement mismatch");
  if (sizes.size() < 3) throw ConfigError("fit_scaling_exponent needs at least 3 sizes");
  const std::size_t k = sizes.size();
  double mx = 0, my = 0;
  std::vector<double> lx(k), ly(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(sizes[i] > 0) || !(measurements[i] > 0)) {
      throw NumericError("fit_scaling_exponent: sizes and measurements must be positive");
    }
    lx[i] = std::log(sizes[i]);
    ly[i] = std::log(measurements[i]);
    mx += lx[i];
    my += ly[i];
  }
  mx /= k;
  my /= k;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < k; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0) throw NumericError("fit_scaling_exponent: all sizes are equal");
  return sxy / sxx;
}

double time_monarch_apply(std::size_t n, std::size_t d, std::size_t repeats, std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  std::mt19937_64 rng(seed);
  const MonarchMatrix m(n, MonarchMatrix::Init::kaiming_block, &rng);
  const Tensor x = Tensor::randn({n, d}, rng);
  volatile double sink = monarch_apply(m, x, Side::left)[0];  // warm-up
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(repeats, 1); ++r) {
    std::size_t calls = 0;
    const auto t0 = clock::now();
    double elapsed = 0.0;
    do {
      sink = sink + monarch_apply(m, x, Side::left)[0];
      ++calls;
      elapsed = std::chrono::duration<double>(clock::now() - t0).count();
    } while (elapsed < 0.02);
    best = std::min(best, elapsed / static_cast<double>(calls));
  }
  return best;
}

ScalingResult run_scaling(const std::vector<std::size_t>& sizes, const std::vector<std::size_t>& wall_sizes,
                          std::uint64_t seed) {
  ScalingResult r;
  for (std::size_t n : sizes) {
    r.sizes.push_back(static_cast<double>(n));
    r.monarch_flops.push_back(static_cast<double>(monarch_apply_flops(n, 1)));
    r.dense_flops.push_back(static_cast<double>(2 * dense_attention_multiply_adds(n, 64, 1)));
  }
  r.monarch_slope = fit_scaling_exponent(r.sizes, r.monarch_flops);
  r.dense_slope = fit_scaling_exponent(r.sizes, r.dense_flops);
  r.wall_slope = std::numeric_limits<double>::quiet_NaN();
  if (!wall_sizes.empty()) {
    for (std::size_t n : wall_sizes) {
      r.wall_sizes.push_back(static_cast<double>(n));
      r.wall_seconds.push_back(time_monarch_apply(n, 16, 5, seed));
    }
    r.wall_slope = fit_scaling_exponent(r.wall_sizes, r.wall_seconds);
  }
  return r;
}

std::size_t window_count(std::size_t length, std::size_t input_len, std::size_t horizon) {
  return length < input_len + horizon ? 0 : length - input_len - horizon + 1;
}

std::vector<Window> make_windows(const std::vector<double>& series, std::size_t begin, std::size_t end,
                                 std::size_t input_len, std::size_t horizon) {
  std::vector<Window> out;
  const std::size_t count = window_count(end - begin, input_len, horizon);
  for (std::size_t w = 0; w < count; ++w) {
    Window win{Tensor({input_len, 1}), Tensor({horizon, 1})};
    for (std::size_t i = 0; i < input_len; ++i) win.input[i] = series[begin + w + i];
    for (std::size_t i = 0; i < horizon; ++i) win.target[i] = series[begin + w + input_len + i];
    out.push_back(std::move(win));
  }
  return out;
}

SineDataset generate_sine(const SineDatasetSpec& spec) {
  if (!(spec.period > 0)) throw ConfigError("sine period must be positive");
  if (spec.input_len == 0 || spec.horizon == 0) throw ConfigError("window lengths must be positive");
  const std::size_t need = spec.input_len + spec.horizon;
  if (spec.samples < need) {
    throw ConfigError("need at least " + std::to_string(need) + " samples, got " + std::to_string(spec.samples));
  }
  SineDataset ds;
  ds.series.resize(spec.samples);
  for (std::size_t t = 0; t < spec.samples; ++t) {
    ds.series[t] = spec.amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / spec.period);
  }
  ds.train_end = spec.samples * 6 / 10;
  ds.val_end = ds.train_end + spec.samples * 2 / 10;
  const std::size_t bounds[] = {0, ds.train_end, ds.val_end, spec.samples};
  const char* names[] = {"train", "val", "test"};
  for (int s = 0; s < 3; ++s) {
    if (bounds[s + 1] - bounds[s] < need) {
      throw ConfigError(std::string(names[s]) + " split has " + std::to_string(bounds[s + 1] - bounds[s]) +
                        " samples, fewer than one window of " + std::to_string(need));
    }
  }
  ds.train = make_windows(ds.series, 0, ds.train_end, spec.input_len, spec.horizon);
  ds.val = make_windows(ds.series, ds.train_end, ds.val_end, spec.input_len, spec.horizon);
  ds.test = make_windows(ds.series, ds.val_end, spec.samples, spec.input_len, spec.horizon);
  return ds;
}

void write_series_csv(std::ostream& os, const std::vector<double>& series) {
  os << "t,value\n";
  os << std::setprecision(17);
  for (std::size_t t = 0; t < series.size(); ++t) os << t << ',' << series[t] << '\n';
}

}  // namespace msb
