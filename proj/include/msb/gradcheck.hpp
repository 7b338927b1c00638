#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "msb/autograd.hpp"

namespace msb {

/// |a − n| / max(|a|, |n|, 1e-8).
double gradient_relative_error(double analytic, double numeric);

/// Central difference (f(θ+h) − f(θ−h)) / 2h for one entry of `param`.
/// The entry is restored before returning.
double central_difference(const std::function<double()>& loss, Tensor& param, std::size_t index, double step);

struct GradProbe {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradProbe> probes;
  double max_rel_err = 0.0;
};

/// Compares tape gradients against central differences.
///
/// `build` records a scalar loss on the given tape; it must read every
/// parameter through Tape::param. `probes` entries are drawn at random, with
/// every tensor probed at least once.
GradCheckReport check_gradients(const std::function<Var(Tape&)>& build,
                                 const std::vector<std::pair<std::string, Tensor*>>& params, std::size_t probes,
                                 std::mt19937_64& rng, double step = 1e-5);

}  // namespace msb
