#pragma once

// Straightforward serial versions of the grid kernels: per-pixel loops with
// periodic index wrapping, no workspaces, no threading. Expressions keep the
// same floating-point evaluation order as the parallel kernels, so results
// agree bitwise.

#include "pfl/energy.hpp"
#include "pfl/grid.hpp"

namespace pfl::reference {

ScalarField laplacian(const ScalarField& f);
double row_sum(const ScalarField& f);
ChemicalPotentials variational_derivatives(const PhaseState& s, const ModelParams& theta);
PhaseState step(const PhaseState& s, const ModelParams& theta, double dt);
double total_free_energy(const PhaseState& s, const ModelParams& theta);

}  // namespace pfl::reference
