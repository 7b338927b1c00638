// msb: verification, benchmarks and the sine training run from the command line.
//
// Exit codes: 0 all requested checks passed, 1 a check failed or the run
// errored, 2 usage or configuration error.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "msb/config.hpp"
#include "msb/errors.hpp"

using namespace msb;

namespace {

constexpr int kUsageError = 2;

struct CommonOptions {
  std::optional<std::uint64_t> seed;
  std::string seed_text;
  std::string out;
  std::string format;
  std::string config_path;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--seed", o.seed_text, "RNG seed (overrides MSB_SEED)");
  app->add_option("--out", o.out, "write the run report here");
  app->add_option("--format", o.format, "report format")->check(CLI::IsMember({"json", "csv"}));
  app->add_option("--config", o.config_path, "JSON config file");
}

struct Context {
  json config = json::object();
  std::uint64_t seed = 0;
};

Context resolve(CommonOptions& o) {
  Context ctx;
  if (!o.config_path.empty()) ctx.config = load_config(o.config_path);
  if (!o.seed_text.empty()) o.seed = parse_seed(o.seed_text);
  ctx.seed = resolve_seed(o.seed, ctx.config);
  return ctx;
}

json section(const Context& ctx, const char* key) {
  return ctx.config.contains(key) ? ctx.config[key] : json::object();
}

// --out writes the report; otherwise --format prints it; otherwise a digest.
void emit(const RunReport& report, const CommonOptions& o) {
  const json doc = report.to_json();
  const std::string format = o.format.empty() ? "json" : o.format;
  const std::string text = format == "csv" ? to_csv(doc) : doc.dump(2) + "\n";
  if (!o.out.empty()) {
    std::ofstream f(o.out);
    if (!f) throw std::runtime_error("cannot write report to '" + o.out + "'");
    f << text;
    std::cout << summarize(doc);
    std::cout << "report written to " << o.out << '\n';
  } else if (!o.format.empty()) {
    std::cout << text;
  } else {
    std::cout << summarize(doc);
  }
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> sizes;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("bad size list '" + text + "'");
    }
    sizes.push_back(std::stoull(item));
  }
  return sizes;
}

// Band membership as a check: diff is the distance outside [lo, hi].
CheckResult band_check(const std::string& name, double value, double lo, double hi) {
  const double outside = std::isfinite(value) ? std::max({0.0, lo - value, value - hi}) : INFINITY;
  std::ostringstream detail;
  detail << "value=" << value << " band=[" << lo << ", " << hi << "]";
  return CheckResult::make(name, outside, 0.0, 1, detail.str());
}

int run_verify(CommonOptions& o, std::size_t seeds_flag, const std::string& checks_flag, double threshold_flag) {
  const Context ctx = resolve(o);
  VerifyConfig vc;
  apply_json(section(ctx, "verify"), vc);
  vc.seed = ctx.seed;
  if (seeds_flag) vc.seeds = seeds_flag;
  if (!std::isnan(threshold_flag)) vc.threshold_override = threshold_flag;
  if (!checks_flag.empty()) {
    std::vector<std::string> names;
    std::stringstream ss(checks_flag);
    for (std::string n; std::getline(ss, n, ',');) names.push_back(n);
    vc.selection = names;
  }
  if (vc.selection) {
    const auto known = check_names();
    for (const auto& n : *vc.selection)
      if (std::find(known.begin(), known.end(), n) == known.end()) throw ConfigError("unknown check '" + n + "'");
  }

  RunReport report;
  report.config = {{"command", "verify"}, {"seed", vc.seed}, {"seeds", vc.seeds}};
  if (vc.threshold_override) report.config["threshold_override"] = *vc.threshold_override;
  report.checks = run_all(vc);
  emit(report, o);
  return report.all_passed() ? 0 : 1;
}

ModelConfig bench_model(const Context& ctx, Variant v) {
  ModelConfig c = desk_config(v);
  apply_json(section(ctx, "model"), c);
  c.variant = v;
  c.seed = ctx.seed;
  return c;
}

int run_bench_params(CommonOptions& o) {
  const Context ctx = resolve(o);
  const ModelConfig dense = bench_model(ctx, Variant::dense), surrogate = bench_model(ctx, Variant::surrogate);
  const ParamCounts pd = count_params(dense), ps = count_params(surrogate);
  const double ratio = static_cast<double>(ps.total()) / static_cast<double>(pd.total());
  RunReport report;
  report.config = {{"command", "bench params"}, {"seed", ctx.seed}, {"model", to_json(surrogate)}};
  report.params = {{"dense", to_json(pd)}, {"surrogate", to_json(ps)}, {"ratio", ratio}};
  report.checks.push_back(band_check("param_ratio_band", ratio, 0.15, 0.45));
  emit(report, o);
  return report.all_passed() ? 0 : 1;
}

int run_bench_flops(CommonOptions& o) {
  const Context ctx = resolve(o);
  const ModelConfig dense = bench_model(ctx, Variant::dense), surrogate = bench_model(ctx, Variant::surrogate);
  const FlopLedger fd = count_flops(dense), fs = count_flops(surrogate);
  const double ratio = static_cast<double>(fs.total_flops()) / static_cast<double>(fd.total_flops());
  RunReport report;
  report.config = {{"command", "bench flops"}, {"seed", ctx.seed}, {"model", to_json(surrogate)}};
  report.flops = {{"dense", to_json(fd)}, {"surrogate", to_json(fs)}, {"ratio", ratio}};
  report.checks.push_back(band_check("flop_ratio_band", ratio, 0.15, 0.50));
  emit(report, o);
  return report.all_passed() ? 0 : 1;
}

int run_bench_scaling(CommonOptions& o, const std::string& sizes_text, const std::string& wall_text, bool no_wall) {
  const Context ctx = resolve(o);
  std::vector<std::size_t> sizes{256, 1024, 4096}, wall{1024, 2304, 4096, 9216, 16384};
  const json sc = section(ctx, "scaling");
  if (!sc.is_object()) throw ConfigError("scaling config must be an object");
  for (auto it = sc.begin(); it != sc.end(); ++it) {
    if (it.key() != "sizes" && it.key() != "wall_sizes") throw ConfigError("unknown scaling config key '" + it.key() + "'");
  }
  if (sc.contains("sizes")) sizes = sc["sizes"].get<std::vector<std::size_t>>();
  if (sc.contains("wall_sizes")) wall = sc["wall_sizes"].get<std::vector<std::size_t>>();
  if (!sizes_text.empty()) sizes = parse_sizes(sizes_text);
  if (!wall_text.empty()) wall = parse_sizes(wall_text);
  if (no_wall) wall.clear();

  const ScalingResult s = run_scaling(sizes, wall, ctx.seed);
  RunReport report;
  report.config = {{"command", "bench scaling"}, {"seed", ctx.seed}};
  report.scaling = to_json(s);
  report.checks.push_back(CheckResult::make("monarch_flop_slope", std::abs(s.monarch_slope - 1.5), 1e-12, 1));
  report.checks.push_back(CheckResult::make("dense_flop_slope", std::abs(s.dense_slope - 2.0), 1e-12, 1));
  if (!wall.empty()) report.checks.push_back(band_check("wall_clock_slope_band", s.wall_slope, 1.3, 1.8));
  emit(report, o);
  return report.all_passed() ? 0 : 1;
}

struct TrainFlags {
  std::optional<double> period, lr, dropout;
  std::optional<std::size_t> epochs, batch, samples, input_len, horizon, d_model, heads, layers;
  std::string variant, norm, dataset_out;
};

int run_train_sine(CommonOptions& o, const TrainFlags& f) {
  const Context ctx = resolve(o);
  ModelConfig mc;
  SineDatasetSpec ds;
  TrainConfig tc;
  apply_json(section(ctx, "model"), mc);
  apply_json(section(ctx, "dataset"), ds);
  apply_json(section(ctx, "train"), tc);
  mc.seed = ctx.seed;
  if (f.period) ds.period = *f.period;
  if (f.samples) ds.samples = *f.samples;
  if (f.input_len) ds.input_len = *f.input_len;
  if (f.horizon) ds.horizon = *f.horizon;
  if (f.lr) tc.lr = *f.lr;
  if (f.dropout) tc.dropout = *f.dropout;
  if (f.epochs) tc.epochs = *f.epochs;
  if (f.batch) tc.batch = *f.batch;
  if (f.d_model) mc.d_model = *f.d_model;
  if (f.heads) mc.heads = *f.heads;
  if (f.layers) mc.layers = *f.layers;
  if (!f.variant.empty()) mc.variant = parse_variant(f.variant);
  if (!f.norm.empty()) mc.norm = parse_norm_style(f.norm);
  // The model window follows the dataset window.
  mc.seq_len = ds.input_len;
  mc.horizon = ds.horizon;

  if (!f.dataset_out.empty()) {
    std::ofstream csv(f.dataset_out);
    if (!csv) throw std::runtime_error("cannot write dataset to '" + f.dataset_out + "'");
    write_series_csv(csv, generate_sine(ds).series);
  }

  const TrainingResult r = train(mc, ds, tc);
  RunReport report;
  report.config = {{"command", "train sine"}, {"seed", ctx.seed}, {"model", to_json(mc)},
                   {"dataset", to_json(ds)},  {"train", to_json(tc)}};
  report.training = to_json(r);
  report.checks.push_back(CheckResult::make("training_finite", r.failed ? INFINITY : 0.0, 0.0, 1, r.failure));
  report.checks.push_back(CheckResult::make("test_mse_below_target", r.test_mse, 0.05, 1,
                                            "best epoch " + std::to_string(r.best_epoch)));
  emit(report, o);
  return report.all_passed() ? 0 : 1;
}

int run_report_show(const CommonOptions& o, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open report '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    std::cerr << "error: " << path << " is not valid JSON: " << e.what() << '\n';
    return 1;
  }
  const auto problems = validate_report(doc);
  if (o.format == "csv") {
    std::cout << to_csv(doc);
  } else if (o.format == "json") {
    std::cout << doc.dump(2) << '\n';
  } else {
    std::cout << summarize(doc);
  }
  for (const auto& p : problems) std::cerr << "invalid report: " << p << '\n';
  return problems.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monarch surrogate blocks: verification, benchmarks, training"};
  app.require_subcommand(1);

  CommonOptions common;

  auto* verify = app.add_subcommand("verify", "run every verification check");
  add_common(verify, common);
  std::size_t seeds = 0;
  std::string checks;
  double threshold = NAN;
  verify->add_option("--seeds", seeds, "seeds per randomized check (default 100)");
  verify->add_option("--checks", checks, "comma-separated subset of checks");
  verify->add_option("--threshold", threshold, "replace every check threshold");

  auto* bench = app.add_subcommand("bench", "parameter, FLOP and scaling benchmarks");
  bench->require_subcommand(1);
  auto* params = bench->add_subcommand("params", "parameter counts, dense vs surrogate");
  auto* flops = bench->add_subcommand("flops", "FLOP ledger, dense vs surrogate");
  auto* scaling = bench->add_subcommand("scaling", "fitted log-log scaling exponents");
  for (auto* sub : {params, flops, scaling}) add_common(sub, common);
  std::string sizes, wall_sizes;
  bool no_wall = false;
  scaling->add_option("--sizes", sizes, "analytic sizes, comma-separated");
  scaling->add_option("--wall-sizes", wall_sizes, "wall-clock sizes, comma-separated");
  scaling->add_flag("--no-wall-clock", no_wall, "skip the wall-clock fit");

  auto* train_cmd = app.add_subcommand("train", "training runs");
  train_cmd->require_subcommand(1);
  auto* sine = train_cmd->add_subcommand("sine", "train a forecaster on a synthetic sine");
  add_common(sine, common);
  TrainFlags tf;
  sine->add_option("--period", tf.period);
  sine->add_option("--samples", tf.samples);
  sine->add_option("--input-len", tf.input_len);
  sine->add_option("--horizon", tf.horizon);
  sine->add_option("--epochs", tf.epochs);
  sine->add_option("--lr", tf.lr);
  sine->add_option("--batch", tf.batch);
  sine->add_option("--dropout", tf.dropout);
  sine->add_option("--d-model", tf.d_model);
  sine->add_option("--heads", tf.heads);
  sine->add_option("--layers", tf.layers);
  sine->add_option("--variant", tf.variant)->check(CLI::IsMember({"dense", "surrogate"}));
  sine->add_option("--norm", tf.norm)->check(CLI::IsMember({"post-ln", "pre-ln"}));
  sine->add_option("--dataset-out", tf.dataset_out, "write the series as CSV");

  auto* report = app.add_subcommand("report", "inspect run reports");
  report->require_subcommand(1);
  auto* show = report->add_subcommand("show", "print a report digest and validate it");
  add_common(show, common);
  std::string report_path;
  show->add_option("path", report_path, "report JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (verify->parsed()) return run_verify(common, seeds, checks, threshold);
    if (params->parsed()) return run_bench_params(common);
    if (flops->parsed()) return run_bench_flops(common);
    if (scaling->parsed()) return run_bench_scaling(common, sizes, wall_sizes, no_wall);
    if (sine->parsed()) return run_train_sine(common, tf);
    if (show->parsed()) return run_report_show(common, report_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kUsageError;
}
