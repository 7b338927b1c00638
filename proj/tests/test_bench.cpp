#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "msb/bench.hpp"
#include "msb/errors.hpp"
#include "msb/monarch.hpp"
#include "msb/training.hpp"

using namespace msb;

TEST_CASE("closed-form parameter examples") {
  ModelConfig c;
  c.d_model = 16;
  c.heads = 2;
  c.d_ff = 64;
  c.seq_len = 48;
  c.horizon = 24;
  c.variant = Variant::surrogate;
  CHECK(count_params(c).by_role.at("FFN") == 256);  // 2·2·16^1.5
  c.variant = Variant::dense;
  CHECK(count_params(c).by_role.at("FFN") == 2048);  // 2·16·64
  CHECK(count_params(c).by_role.at("LP") == 4 * 16 * 16);
}

TEST_CASE("per-projection reduction is 2/sqrt(D)") {
  const double d = 256.0;
  CHECK(static_cast<double>(monarch_param_count(256)) / (d * d) == 0.125);
}

TEST_CASE("count_params agrees with the built forecaster") {
  for (Variant v : {Variant::dense, Variant::surrogate}) {
    for (std::size_t n : {16, 48}) {
      ModelConfig c;
      c.variant = v;
      c.seq_len = n;
      c.d_model = 8;
      c.heads = 2;
      c.layers = 2;
      Forecaster model(c);
      CHECK(count_params(c).total() == model.param_count());
    }
  }
}

TEST_CASE("dense attention cost") {
  // scores alone are N²·D = 65,536 at N=64, D=16
  CHECK(dense_attention_multiply_adds(64, 16, 1) == 2 * 65536 + 5 * 4096);
  CHECK(dense_attention_multiply_adds(128, 16, 2) == 4 * dense_attention_multiply_adds(64, 16, 2));
}

TEST_CASE("ledger totals equal the sum of parts") {
  const FlopLedger f = count_flops(desk_config(Variant::surrogate));
  std::uint64_t sum = 0;
  for (const auto& [role, n] : f.multiply_adds) sum += n;
  CHECK(f.total_multiply_adds() == sum);
  CHECK(f.total_flops() == 2 * sum);
}

TEST_CASE("Monarch part of the ledger equals the live flop meter") {
  for (std::size_t n : {9, 16, 48}) {
    for (std::size_t layers : {1, 2}) {
      ModelConfig c;
      c.seq_len = n;
      c.d_model = 8;
      c.heads = 2;
      c.layers = layers;
      Forecaster model(c);
      flop_meter::reset();
      model.predict(Tensor({n, 1}));
      CHECK(flop_meter::count() == 2 * count_flops(c).monarch_multiply_adds);
    }
  }
  for (std::size_t n : {4, 16, 64, 256, 1024}) {
    flop_meter::reset();
    monarch_apply(MonarchMatrix::zeros(n), Tensor({n, 1}), Side::left);
    CHECK(flop_meter::count() == monarch_apply_flops(n, 1));
  }
}

TEST_CASE("desk configuration") {
  const ModelConfig c = desk_config(Variant::dense);
  CHECK(c.seq_len == 96);
  CHECK(c.d_model == 512);
  CHECK(c.heads == 8);
  CHECK(c.ffn_width() == 2048);
  CHECK(c.layers == 2);
  CHECK(pad_to_square(c.seq_len).n_pad == 100);
}

TEST_CASE("config validation") {
  ModelConfig c;
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.heads = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(parse_variant("sparse"), ConfigError);
}

TEST_CASE("scaling exponent fits") {
  const std::vector<double> sizes{256, 1024, 4096};
  std::vector<double> monarch, dense;
  for (double n : sizes) {
    monarch.push_back(static_cast<double>(monarch_apply_flops(static_cast<std::size_t>(n), 1)));
    dense.push_back(n * n);
  }
  CHECK(fit_scaling_exponent(sizes, monarch) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(fit_scaling_exponent(sizes, dense) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK_THROWS_AS(fit_scaling_exponent(sizes, {1.0, 0.0, 2.0}), NumericError);
  CHECK_THROWS_AS(fit_scaling_exponent({1.0, 2.0}, {1.0, 2.0}), ConfigError);
  CHECK_THROWS_AS(fit_scaling_exponent({1.0, 2.0, 3.0}, {1.0, 2.0}), DimensionError);
  const ScalingResult r = run_scaling({256, 1024, 4096}, {}, 0);
  CHECK(std::abs(r.monarch_slope - 1.5) <= 1e-12);
  CHECK(std::abs(r.dense_slope - 2.0) <= 1e-12);
  CHECK(std::isnan(r.wall_slope));
}

TEST_CASE("sine values, periodicity and windows") {
  SineDatasetSpec s;
  s.period = 4;
  s.samples = 100;
  s.input_len = 4;
  s.horizon = 2;
  const SineDataset ds = generate_sine(s);
  CHECK(ds.series[0] == 0.0);
  CHECK(ds.series[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(ds.series[2]) < 1e-15);
  CHECK(ds.series[3] == doctest::Approx(-1.0).epsilon(1e-15));
  for (std::size_t t = 0; t + 4 < 100; ++t) CHECK(std::abs(ds.series[t + 4] - ds.series[t]) <= 1e-12);
  CHECK(window_count(100, 24, 24) == 53);
  CHECK(window_count(10, 24, 24) == 0);
}

TEST_CASE("splits are chronological and disjoint") {
  SineDatasetSpec s;  // 720 samples, 48 -> 24
  const SineDataset ds = generate_sine(s);
  CHECK(ds.train_end == 432);
  CHECK(ds.val_end == 576);
  CHECK(ds.train.size() == window_count(432, 48, 24));
  CHECK(ds.val.size() == window_count(144, 48, 24));
  CHECK(ds.test.size() == window_count(144, 48, 24));
  // last training target ends before the first validation input starts
  const Window& last = ds.train.back();
  CHECK(last.target[23] == ds.series[431]);
  CHECK(ds.val.front().input[0] == ds.series[432]);
  CHECK(ds.test.front().input[0] == ds.series[576]);
}

TEST_CASE("too few samples") {
  SineDatasetSpec s;
  s.samples = 50;
  CHECK_THROWS_AS(generate_sine(s), ConfigError);
  s.samples = 200;  // enough overall, but the validation split is too short
  CHECK_THROWS_AS(generate_sine(s), ConfigError);
}

TEST_CASE("series CSV") {
  std::ostringstream os;
  write_series_csv(os, {0.0, 0.5});
  CHECK(os.str() == "t,value\n0,0\n1,0.5\n");
}
