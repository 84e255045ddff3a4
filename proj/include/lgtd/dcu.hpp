#pragma once

#include "lgtd/layers.hpp"

namespace lgtd {

/// Difference compensation unit: guide + body(guide - comp), where body is
/// conv-ReLU-conv with a zero-initialised tail.
class CompensationUnit {
 public:
  CompensationUnit(ParameterSet& params, const std::string& prefix, int channels, Rng& rng);
  Var operator()(const Var& guide, const Var& comp) const;

 private:
  Conv2d conv1_, conv2_;
};

/// Concatenate-then-3x3-conv replacement used when DCUs are ablated.
class ConcatFusion {
 public:
  ConcatFusion(ParameterSet& params, const std::string& prefix, int channels, Rng& rng);
  Var operator()(const Var& spatial, const Var& temporal) const;

 private:
  Conv2d fuse_;
};

struct RefinedFeatures {
  Var short_term;  // F_s
  Var refined;     // F^_t
};

/// F_s = first(F_t, g_s); F^_t = second(F_s, F_l).
RefinedFeatures refine_chain(const CompensationUnit& first, const CompensationUnit& second, const Var& spatial,
                             const Var& short_term, const Var& long_term);

}  // namespace lgtd
