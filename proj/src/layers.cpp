#include "lgtd/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace lgtd {

Var ParameterSet::add(const std::string& name, Tensor init) {
  for (const auto& [existing, _] : entries_) {
    if (existing == name) throw std::logic_error("duplicate parameter name: " + name);
  }
  Var v(std::move(init), true);
  entries_.emplace_back(name, v);
  return v;
}

std::size_t ParameterSet::numel() const {
  std::size_t n = 0;
  for (const auto& [_, v] : entries_) n += v.value().numel();
  return n;
}

Var ParameterSet::find(const std::string& name) const {
  for (const auto& [n, v] : entries_) {
    if (n == name) return v;
  }
  throw std::out_of_range("no parameter named " + name);
}

void ParameterSet::zero_grad() {
  for (auto& [_, v] : entries_) v.zero_grad();
}

void ParameterSet::randomize(Rng& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& [_, v] : entries_) {
    for (double& x : v.mutable_value().values()) x = dist(rng);
  }
}

Conv2d::Conv2d(ParameterSet& params, const std::string& name, int in_channels, int out_channels, int kernel_size,
               Rng& rng, Init init)
    : in(in_channels), out(out_channels), kernel(kernel_size) {
  if (kernel_size % 2 == 0) throw std::invalid_argument(name + ": kernel size must be odd");
  Tensor w({out_channels, in_channels, kernel_size, kernel_size});
  if (init == Init::Default) {
    // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual framework default.
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel_size * kernel_size));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : w.values()) v = dist(rng);
  }
  weight = params.add(name + ".weight", std::move(w));
  bias = params.add(name + ".bias", Tensor({out_channels}));
}

ResidualBlock::ResidualBlock(ParameterSet& params, const std::string& name, int channels, Rng& rng)
    : conv1(params, name + ".conv1", channels, channels, 3, rng),
      conv2(params, name + ".conv2", channels, channels, 3, rng, Init::Zero) {}

LayerNorm::LayerNorm(ParameterSet& params, const std::string& name, int channels)
    : gamma(params.add(name + ".gamma", Tensor({channels}, 1.0))), beta(params.add(name + ".beta", Tensor({channels}))) {}

}  // namespace lgtd
