#pragma once

#include <functional>
#include <vector>

#include "plab/graph.hpp"

namespace plab {

/// Builds a scalar loss node from freshly created parameter leaves. Must be a
/// pure function of the leaf values.
using LossBuilder = std::function<NodeId(Graph&, const std::vector<NodeId>&)>;

/// Compares reverse-mode gradients against central finite differences
/// (f(p+eps) - f(p-eps)) / 2eps, coordinate by coordinate, over every tensor
/// in `params`. Returns the max over all coordinates of
/// |analytic - numeric| / max(1, |numeric|). epsilon must lie in [1e-7, 1e-4].
double grad_check(const LossBuilder& builder, const std::vector<Tensor>& params, double epsilon);

} // namespace plab
