#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "msb/monarch.hpp"
#include "msb/surrogate.hpp"

namespace msb {

/// Outcome of one executable claim. passed ⇔ max_abs_diff ≤ threshold.
struct CheckResult {
  std::string name;
  double max_abs_diff = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::size_t seeds_run = 0;
  std::string detail;

  static CheckResult make(std::string name, double diff, double threshold, std::size_t seeds, std::string detail = {});
};

// Default thresholds, scaled to how much floating-point work separates the
// two sides being compared.
inline constexpr double kTheoremTol = 1e-8;
inline constexpr double kStructuralTol = 1e-10;
inline constexpr double kExactTol = 1e-12;
inline constexpr double kGradTol = 1e-4;

/// Diagonal-pattern MHSA against its sum-of-convolutions form.
CheckResult check_theorem_diagonal(std::size_t n, std::size_t lambda, std::size_t heads, std::size_t d_in,
                                   std::size_t d_out, std::size_t seeds, std::uint64_t base_seed,
                                   double threshold = kTheoremTol);

/// Vertical-pattern MHSA against the fixed-tap aggregation Σ_h Σ_k g(k)·X[k,:]·W_h.
CheckResult check_theorem_vertical(std::size_t n, std::size_t lambda, std::size_t heads, std::size_t d_in,
                                   std::size_t d_out, std::size_t seeds, std::uint64_t base_seed,
                                   double threshold = kTheoremTol);

/// Largest row-to-row difference of vertical-pattern MHSA outputs; with a
/// query-independent g every row is the same.
CheckResult check_vertical_rows_identical(std::size_t n, std::size_t lambda, std::size_t heads, std::size_t d_in,
                                          std::size_t d_out, std::size_t seeds, std::uint64_t base_seed,
                                          double threshold = kExactTol);

enum class DependenceMode { short_term, long_term };

std::string to_string(DependenceMode mode);

/// Unit-entry L¹, R¹, L², R² that make the SAB output at step k equal
/// x_k·x_s² with s = k−1 (short term) or s = 0 (long term).
struct ExpressivenessConstruction {
  std::size_t n = 0;
  DependenceMode mode = DependenceMode::short_term;
  std::size_t k = 0;
  BlockDiagonal l1, r1, l2, r2;

  std::size_t source() const { return mode == DependenceMode::short_term ? k - 1 : 0; }
  MonarchMatrix first() const;
  MonarchMatrix second() const;
};

ExpressivenessConstruction build_expressiveness(std::size_t n, DependenceMode mode, std::size_t k);

/// The literal 4×4 factors for the short-term (k = 1) and long-term (k = 2)
/// examples.
ExpressivenessConstruction printed_expressiveness(DependenceMode mode);

/// Runs the SAB with Q = K = V = x (projections skipped, one feature) and
/// compares y_k against x_k·x_s² over random x.
CheckResult check_expressiveness(const ExpressivenessConstruction& c, std::size_t samples, std::uint64_t seed,
                                 double threshold = kExactTol);

/// Output of the state-space route through a single-head SAB.
struct LtiDecomposition {
  Tensor readout;  // C: time-invariant, N_pad × d_head
  Tensor output;   // N × d_out
};

/// Evaluates the SAB as a memoryless state-space system (A = 0, B = I,
/// D = 0, state x_t = v_t) with time-invariant readout C = ((M¹·Q) ⊙ K)
/// built from dense matrices, followed by the per-step M²_t post-multiply.
LtiDecomposition lti_decompose(const SurrogateAttentionParams& params, const Tensor& x);

/// One step of x_{t+1} = A·x_t + B·u_{t+1} with A = 0 and B = I.
Tensor lti_state_step(const Tensor& state, const Tensor& input);

/// Direct SAB vs the LTI route over random params and inputs (single head).
CheckResult check_lti_decomposition(std::size_t n, std::size_t d_model, std::size_t seeds, std::uint64_t base_seed,
                                    double threshold = kStructuralTol);
/// Permuting past inputs leaves the next state unchanged, exactly.
CheckResult check_lti_memoryless(std::size_t n, std::size_t d_model, std::size_t seeds, std::uint64_t base_seed);

/// P·L·P·R·P multiplied out from the explicit dense factors.
Tensor explicit_monarch_product(const MonarchMatrix& m);

/// Factored monarch_apply (left and right) vs the explicit dense product.
CheckResult check_monarch_oracle(const std::vector<std::size_t>& sizes, std::size_t seeds, std::uint64_t base_seed,
                                 double threshold = kStructuralTol);
/// param_count == 2·n^{3/2} for each size.
CheckResult check_param_law(const std::vector<std::size_t>& sizes);
/// Meter log₂-ratio between n and 4n equals 3 exactly.
CheckResult check_flop_meter_scaling(std::size_t n);

/// surrogate_attention_forward vs the brute-force dense composition.
CheckResult check_sab_oracle(const std::vector<std::pair<std::size_t, std::size_t>>& sizes, std::size_t heads,
                             std::size_t seeds, std::uint64_t base_seed, double threshold = 1e-9);
CheckResult check_sfb_oracle(const std::vector<std::pair<std::size_t, std::size_t>>& sizes, std::size_t seeds,
                             std::uint64_t base_seed, double threshold = 1e-9);

/// Brute-force SAB via explicit dense matrices; independent of monarch_apply.
Tensor dense_oracle_attention(const Tensor& x, const SurrogateAttentionParams& params);
Tensor dense_oracle_ffn(const Tensor& x, const SurrogateFFNParams& params);

/// Tape gradients of a full enhanced layer vs central differences, as a
/// relative error.
CheckResult check_layer_gradients(NormStyle norm, std::size_t probes, std::uint64_t seed,
                                  double threshold = kGradTol);
/// Every L/R block of every Monarch in a layer receives a nonzero gradient.
CheckResult check_gradient_flow(std::size_t seeds, std::uint64_t base_seed);

struct VerifyConfig {
  std::uint64_t seed = 0;
  std::size_t seeds = 100;
  /// Replaces every check's threshold when set.
  std::optional<double> threshold_override;
  /// Check names to run; nullopt runs everything.
  std::optional<std::vector<std::string>> selection;
};

/// Names of all checks run_all knows, in execution order.
std::vector<std::string> check_names();

std::vector<CheckResult> run_all(const VerifyConfig& config);

}  // namespace msb
