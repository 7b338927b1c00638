#include "msb/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "msb/errors.hpp"

namespace msb {

double gradient_relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

double central_difference(const std::function<double()>& loss, Tensor& param, std::size_t index, double step) {
  const double saved = param[index];
  param[index] = saved + step;
  const double up = loss();
  param[index] = saved - step;
  const double down = loss();
  param[index] = saved;
  return (up - down) / (2.0 * step);
}

GradCheckReport check_gradients(const std::function<Var(Tape&)>& build,
                                const std::vector<std::pair<std::string, Tensor*>>& params, std::size_t probes,
                                std::mt19937_64& rng, double step) {
  if (params.empty()) throw ContractError("check_gradients: no parameters");

  std::vector<Tensor> analytic;
  {
    Tape tape;
    for (const auto& [name, t] : params) tape.param(*t);
    Var loss = build(tape);
    tape.backward(loss);
    for (const auto& [name, t] : params) analytic.push_back(tape.grad_of(*t));
  }

  auto eval = [&] {
    Tape tape(false);
    return build(tape).value()[0];
  };

  // Round-robin over tensors so each one is probed before any repeats.
  std::vector<std::size_t> order(params.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  GradCheckReport report;
  const std::size_t total = std::max(probes, params.size());
  for (std::size_t p = 0; p < total; ++p) {
    const std::size_t which = order[p % order.size()];
    Tensor& t = *params[which].second;
    std::uniform_int_distribution<std::size_t> pick(0, t.size() - 1);
    const std::size_t index = pick(rng);
    GradProbe probe;
    probe.tensor = params[which].first;
    probe.index = index;
    probe.analytic = analytic[which][index];
    probe.numeric = central_difference(eval, t, index, step);
    probe.rel_err = gradient_relative_error(probe.analytic, probe.numeric);
    report.max_rel_err = std::max(report.max_rel_err, probe.rel_err);
    report.probes.push_back(probe);
  }
  return report;
}

}  // namespace msb
