#pragma once

#include "pfl/energy.hpp"
#include "pfl/grid.hpp"

namespace pfl {

// Exact squared Euclidean distance from each pixel center to the nearest
// pixel where `target` is nonzero (separable lower-envelope transform).
// Pixels with no target anywhere get +infinity.
std::vector<double> squared_distance_transform(int width, int height, std::span<const std::uint8_t> target);

// Signed distance to the mask boundary, positive inside. The boundary sits
// halfway between a foreground and a background pixel center, so every
// value has magnitude at least 0.5. Empty masks give -inf everywhere and
// full masks +inf.
std::vector<double> signed_distance(const Mask& mask);

// eta = (1 + tanh(d / w)) / 2 from the signed distance d.
ScalarField order_parameter_from_mask(const Mask& mask, double interface_width, double dx = 1.0);

// Builds the phase state implied by an order-parameter field:
// cv = cv_eq + (1 - cv_eq) eta, ci = ci_eq (1 - eta).
PhaseState state_from_eta(const ScalarField& eta, const ModelParams& theta);

PhaseState extract_state(const Mask& mask, const ModelParams& theta, double interface_width, double dx = 1.0);

}  // namespace pfl
