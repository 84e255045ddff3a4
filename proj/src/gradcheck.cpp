#include "lgtd/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "lgtd/ops.hpp"

namespace lgtd {

namespace {

double eval_scalar(const ScalarFn& f, const std::vector<Var>& inputs) {
  NoGradGuard no_grad;
  const Var out = f(inputs);
  if (out.value().numel() != 1) throw std::invalid_argument("grad_check: function must return a scalar");
  return out.value()[0];
}

}  // namespace

GradCheckResult grad_check(const ScalarFn& f, const std::vector<Var>& inputs, double eps, int max_coords,
                           std::uint64_t seed) {
  for (Var v : inputs) {
    if (!v.requires_grad()) throw std::invalid_argument("grad_check: every input must require grad");
    v.zero_grad();
  }
  const Var f0 = f(inputs);
  f0.backward();
  // Central differences carry roundoff of order eps_mach * |f| / eps. The
  // floor sits 1e5 above it, so a coordinate whose true gradient is exactly
  // zero scores about 1e-5 instead of 1.
  const double floor =
      std::max(1e-8, 1e5 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f0.value()[0])) / eps);
  std::vector<Tensor> analytic;
  for (const Var& v : inputs) analytic.push_back(v.has_grad() ? v.grad() : Tensor(v.shape()));

  std::mt19937_64 rng(seed);
  GradCheckResult res;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Var v = inputs[i];
    const std::size_t n = v.value().numel();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (max_coords > 0 && n > static_cast<std::size_t>(max_coords)) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords);
    }
    for (std::size_t j : coords) {
      double& x = v.mutable_value()[j];
      const double saved = x;
      x = saved + eps;
      const double fp = eval_scalar(f, inputs);
      x = saved - eps;
      const double fm = eval_scalar(f, inputs);
      x = saved;
      const double num = (fp - fm) / (2 * eps);
      const double a = analytic[i][j];
      const double err = std::abs(a - num) / std::max({std::abs(a), std::abs(num), floor});
      ++res.coords;
      if (err > res.max_rel_error || std::isnan(err)) {
        res.max_rel_error = std::isnan(err) ? INFINITY : err;
        std::ostringstream w;
        w << "input[" << i << "] coord " << j << ": analytic " << a << " numeric " << num;
        res.worst = w.str();
      }
    }
  }
  return res;
}

Var probe(const Var& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.5, 1.5);
  Tensor w(out.shape());
  for (double& x : w.values()) x = std::bernoulli_distribution(0.5)(rng) ? dist(rng) : -dist(rng);
  return ops::weighted_sum(out, w);
}

}  // namespace lgtd
