#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lgtd/autograd.hpp"

namespace lgtd {

struct GradCheckResult {
  double max_rel_error = 0;
  std::string worst;  // "input[i] coord j: analytic a numeric n"
  std::size_t coords = 0;
};

/// Scalar-valued function of graph leaves.
using ScalarFn = std::function<Var(const std::vector<Var>&)>;

/// Compares reverse-mode gradients of `f` against central differences
/// (f(x + eps e) - f(x - eps e)) / 2eps. At most `max_coords` coordinates per
/// input are probed, chosen by `seed`. Error per coordinate is
/// |a - n| / max(|a|, |n|, floor), where floor tracks the finite-difference
/// roundoff (2.2e-11 |f| / eps, at least 1e-8); the maximum is returned. Inputs are
/// perturbed in place and restored.
GradCheckResult grad_check(const ScalarFn& f, const std::vector<Var>& inputs, double eps = 1e-6, int max_coords = 64,
                           std::uint64_t seed = 0);

/// Reduces a tensor-valued output to a scalar with fixed random weights so
/// every output element contributes to the checked gradient.
Var probe(const Var& out, std::uint64_t seed);

}  // namespace lgtd
