#include "lgtd/dcu.hpp"

namespace lgtd {

CompensationUnit::CompensationUnit(ParameterSet& params, const std::string& prefix, int channels, Rng& rng)
    : conv1_(params, prefix + ".conv1", channels, channels, 3, rng),
      conv2_(params, prefix + ".conv2", channels, channels, 3, rng, Init::Zero) {}

Var CompensationUnit::operator()(const Var& guide, const Var& comp) const {
  if (guide.shape() != comp.shape()) {
    throw std::invalid_argument("DCU shape mismatch: guide " + shape_str(guide.shape()) + " vs compensated " +
                                shape_str(comp.shape()));
  }
  return ops::add(guide, conv2_(ops::relu(conv1_(ops::sub(guide, comp)))));
}

ConcatFusion::ConcatFusion(ParameterSet& params, const std::string& prefix, int channels, Rng& rng)
    : fuse_(params, prefix + ".fuse", 2 * channels, channels, 3, rng) {}

Var ConcatFusion::operator()(const Var& spatial, const Var& temporal) const {
  return fuse_(ops::concat_channels({spatial, temporal}));
}

RefinedFeatures refine_chain(const CompensationUnit& first, const CompensationUnit& second, const Var& spatial,
                             const Var& short_term, const Var& long_term) {
  RefinedFeatures out;
  out.short_term = first(spatial, short_term);
  out.refined = second(out.short_term, long_term);
  return out;
}

}  // namespace lgtd
