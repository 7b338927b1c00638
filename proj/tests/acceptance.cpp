// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "msb/bench.hpp"
#include "msb/report.hpp"
#include "msb/training.hpp"
#include "msb/verification.hpp"

using namespace msb;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Outcome from_checks(const std::vector<CheckResult>& checks) {
  Outcome o{true, ""};
  for (const auto& c : checks) {
    o.passed = o.passed && c.passed;
    o.detail += (o.detail.empty() ? "" : "; ") + c.name + " " + sci(c.max_abs_diff) + (c.passed ? " <= " : " > ") +
                sci(c.threshold);
  }
  return o;
}

// Appends the wall-clock budget to an outcome.
Outcome timed(double limit, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o = body();
  const double s = seconds_since(t0);
  o.passed = o.passed && s < limit;
  o.detail += ", " + sci(s) + " s (limit " + sci(limit) + " s)";
  return o;
}

CheckResult merged(const std::string& name, const std::vector<CheckResult>& parts) {
  CheckResult out = CheckResult::make(name, 0.0, parts.front().threshold, 0);
  for (const auto& p : parts) {
    out.max_abs_diff = std::max(out.max_abs_diff, p.max_abs_diff);
    out.seeds_run += p.seeds_run;
  }
  out.passed = out.max_abs_diff <= out.threshold;
  return out;
}

Outcome monarch_oracle() {
  return timed(10, [] { return from_checks({check_monarch_oracle({4, 16, 64, 256}, 100, 0)}); });
}

Outcome param_law() {
  std::vector<std::size_t> sizes;
  for (std::size_t b = 1; b <= 64; ++b) sizes.push_back(b * b);
  return from_checks({check_param_law(sizes)});
}

Outcome theorem_one() {
  return timed(60, [] {
    std::vector<CheckResult> parts;
    for (std::size_t n : {8, 16, 64})
      for (std::size_t lambda : {1, 3, 5})
        for (std::size_t h : {1, 2, 4}) parts.push_back(check_theorem_diagonal(n, lambda, h, 4, 3, 100, 0));
    return from_checks({merged("diagonal_vs_convs", parts)});
  });
}

Outcome theorem_two() {
  std::vector<CheckResult> taps, rows;
  for (std::size_t n : {8, 16, 64})
    for (std::size_t lambda : {1, 2, 4})
      for (std::size_t h : {1, 2, 4}) {
        taps.push_back(check_theorem_vertical(n, lambda, h, 4, 3, 100, 0));
        rows.push_back(check_vertical_rows_identical(n, lambda, h, 4, 3, 100, 0));
      }
  return from_checks({merged("vertical_vs_taps", taps), merged("rows_identical", rows)});
}

Outcome expressiveness() {
  std::vector<CheckResult> printed, general;
  for (auto mode : {DependenceMode::short_term, DependenceMode::long_term}) {
    printed.push_back(check_expressiveness(printed_expressiveness(mode), 1000, 0));
    for (std::size_t n : {4, 16})
      for (std::size_t k : {std::size_t{1}, n - 1})
        general.push_back(check_expressiveness(build_expressiveness(n, mode, k), 1000, 0));
  }
  return from_checks({merged("printed_4x4", printed), merged("general_construction", general)});
}

Outcome lti() {
  return from_checks({check_lti_decomposition(16, 4, 100, 0), check_lti_memoryless(16, 4, 100, 0)});
}

Outcome gradients() {
  return from_checks({check_layer_gradients(NormStyle::post_ln, 50, 0), check_layer_gradients(NormStyle::pre_ln, 50, 0)});
}

Outcome scaling() {
  return timed(120, [] {
    const ScalingResult s = run_scaling({256, 1024, 4096}, {1024, 2304, 4096, 9216, 16384}, 0);
    Outcome o;
    const bool analytic = std::abs(s.monarch_slope - 1.5) <= 1e-12 && std::abs(s.dense_slope - 2.0) <= 1e-12;
    const bool wall = s.wall_slope >= 1.3 && s.wall_slope <= 1.8;
    o.passed = analytic && wall;
    o.detail = "monarch slope " + std::to_string(s.monarch_slope) + ", dense slope " + std::to_string(s.dense_slope) +
               ", wall-clock slope " + std::to_string(s.wall_slope) + " (band [1.3, 1.8])";
    return o;
  });
}

Outcome efficiency() {
  const ModelConfig dense = desk_config(Variant::dense), surrogate = desk_config(Variant::surrogate);
  const double p = static_cast<double>(count_params(surrogate).total()) / count_params(dense).total();
  const double f = static_cast<double>(count_flops(surrogate).total_flops()) / count_flops(dense).total_flops();
  Outcome o;
  o.passed = p >= 0.15 && p <= 0.45 && f >= 0.15 && f <= 0.50;
  o.detail = "param ratio " + std::to_string(p) + " (band [0.15, 0.45]), FLOP ratio " + std::to_string(f) +
             " (band [0.15, 0.50])";
  return o;
}

Outcome sine_training() {
  return timed(300, [] {
    ModelConfig model;  // surrogate, 48 -> 24, D 16, H 2, 1 layer
    SineDatasetSpec data;  // period 24
    TrainConfig cfg;       // 200 epochs
    const TrainingResult r = train(model, data, cfg);
    TrainConfig shorter = cfg;
    shorter.epochs = 10;
    const TrainingResult again = train(model, data, shorter);
    bool same = !again.failed;
    for (std::size_t i = 0; i < again.curve.size() && same; ++i) {
      same = again.curve[i].train_loss == r.curve[i].train_loss && again.curve[i].val_loss == r.curve[i].val_loss;
    }
    Outcome o;
    o.passed = !r.failed && r.test_mse < 0.05 && same;
    o.detail = "test MSE " + sci(r.test_mse) + " (target < 0.05), MAE " + sci(r.test_mae) + ", best epoch " +
               std::to_string(r.best_epoch) + (same ? ", rerun identical" : ", rerun DIFFERS");
    return o;
  });
}

Outcome cli_verify() {
  const auto path = std::filesystem::temp_directory_path() / "msb_acceptance_report.json";
  const std::string cmd = std::string(MSB_CLI_PATH) + " verify --out " + path.string() + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  Outcome o;
  std::vector<std::string> problems{"report not readable"};
  try {
    std::ifstream in(path);
    problems = validate_report(json::parse(in));
  } catch (const std::exception&) {
  }
  o.passed = code == 0 && problems.empty();
  o.detail = "exit " + std::to_string(code) + ", " +
             (problems.empty() ? std::string("schema-valid") : "invalid: " + problems.front());
  std::filesystem::remove(path);
  return o;
}

}  // namespace

int main() {
  const std::pair<const char*, Outcome (*)()> criteria[] = {
      {"Monarch oracle", monarch_oracle},
      {"parameter law", param_law},
      {"diagonal MHSA = sum of convolutions", theorem_one},
      {"vertical MHSA = fixed taps", theorem_two},
      {"expressiveness identities", expressiveness},
      {"LTI decomposition", lti},
      {"gradient correctness", gradients},
      {"complexity scaling", scaling},
      {"efficiency direction", efficiency},
      {"sine forecasting", sine_training},
      {"verify CLI report", cli_verify},
  };
  int failed = 0, index = 0;
  for (const auto& [name, fn] : criteria) {
    ++index;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.passed;
    std::printf("%s AC%-2d %s: %s\n", o.passed ? "PASS" : "FAIL", index, name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", index - failed, index);
  return failed ? 1 : 0;
}
