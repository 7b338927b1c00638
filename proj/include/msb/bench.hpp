#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "msb/surrogate.hpp"
#include "msb/tensor.hpp"

namespace msb {

enum class Variant { dense, surrogate };

Variant parse_variant(const std::string& name);
std::string to_string(Variant v);

/// Univariate encoder-only forecaster: linear embedding 1→D_model, `layers`
/// encoder layers, flatten + linear head N·D_model→L_out.
struct ModelConfig {
  Variant variant = Variant::surrogate;
  std::size_t seq_len = 48;   // N
  std::size_t horizon = 24;   // L_out
  std::size_t d_model = 16;
  std::size_t heads = 2;
  std::size_t d_ff = 0;       // dense FFN width; 0 means 4·d_model
  std::size_t layers = 1;
  NormStyle norm = NormStyle::pre_ln;
  Activation sigma = Activation::gelu;
  std::uint64_t seed = 0;

  std::size_t ffn_width() const { return d_ff ? d_ff : 4 * d_model; }
  std::size_t d_head() const { return d_model / heads; }
  /// Throws ConfigError on a zero extent or heads not dividing d_model.
  void validate() const;
};

/// The 2-layer D_model=512, H=8, N=96, D_ff=2048 comparison config.
ModelConfig desk_config(Variant variant);

/// Counts keyed by role: embedding, LP (Q/K/V and output projections),
/// attention (sequence mixing), FFN, norm, head.
struct ParamCounts {
  std::map<std::string, std::uint64_t> by_role;
  std::uint64_t total() const;
};

ParamCounts count_params(const ModelConfig& c);

/// Multiply-adds keyed by the same roles as ParamCounts. FLOPs are 2× that.
struct FlopLedger {
  std::map<std::string, std::uint64_t> multiply_adds;
  /// Subset of the total spent inside monarch_apply; 2× this equals the
  /// flop meter after one forward pass.
  std::uint64_t monarch_multiply_adds = 0;

  std::uint64_t total_multiply_adds() const;
  std::uint64_t total_flops() const { return 2 * total_multiply_adds(); }
};

/// Forward-pass cost of one input window. Softmax costs 5 ops per score.
FlopLedger count_flops(const ModelConfig& c);

/// Dense attention cost for one layer: 2·N²·D + 5·H·N² multiply-adds.
std::uint64_t dense_attention_multiply_adds(std::size_t n, std::size_t d_model, std::size_t heads);

/// Least-squares slope of log(measurement) against log(size).
double fit_scaling_exponent(const std::vector<double>& sizes, const std::vector<double>& measurements);

/// Seconds per monarch_apply(M, X, left) call with X n×d: the fastest of
/// `repeats` batches, each batch running calls for at least 20 ms.
double time_monarch_apply(std::size_t n, std::size_t d, std::size_t repeats, std::uint64_t seed);

struct ScalingResult {
  std::vector<double> sizes;
  std::vector<double> monarch_flops;
  std::vector<double> dense_flops;
  double monarch_slope = 0.0;
  double dense_slope = 0.0;
  std::vector<double> wall_sizes;
  std::vector<double> wall_seconds;
  double wall_slope = 0.0;  // NaN when no wall-clock sizes were given
};

/// Analytic slopes over `sizes`, plus a wall-clock fit over `wall_sizes`
/// (skipped when empty). Dense attention uses D_model = 64, H = 1.
ScalingResult run_scaling(const std::vector<std::size_t>& sizes, const std::vector<std::size_t>& wall_sizes,
                          std::uint64_t seed);

struct SineDatasetSpec {
  double period = 24.0;
  double amplitude = 1.0;
  std::size_t samples = 720;
  std::size_t input_len = 48;
  std::size_t horizon = 24;
};

struct Window {
  Tensor input;   // L_in×1
  Tensor target;  // L_out×1
};

struct SineDataset {
  std::vector<double> series;
  std::size_t train_end = 0;  // series[0, train_end) is train
  std::size_t val_end = 0;    // [train_end, val_end) val, [val_end, end) test
  std::vector<Window> train, val, test;
};

/// z_t = amplitude·sin(2πt/period), split 6:2:2 by time, stride-1 windows
/// inside each split.
SineDataset generate_sine(const SineDatasetSpec& spec);

std::size_t window_count(std::size_t length, std::size_t input_len, std::size_t horizon);
std::vector<Window> make_windows(const std::vector<double>& series, std::size_t begin, std::size_t end,
                                 std::size_t input_len, std::size_t horizon);

/// Header `t,value`, one row per step, LF endings.
void write_series_csv(std::ostream& os, const std::vector<double>& series);

}  // namespace msb
