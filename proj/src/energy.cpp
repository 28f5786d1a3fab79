#include "pfl/energy.hpp"

namespace pfl {

void PhaseState::validate() const {
  if (!cv.same_shape(eta) || !ci.same_shape(eta)) {
    throw DimensionMismatchError("phase state fields differ in shape or dx");
  }
}

ChemicalPotentials variational_derivatives(const PhaseState& state, const ModelParams& theta) {
  state.validate();
  const int w = state.width();
  const int h = state.height();
  const double dx = state.dx();
  ChemicalPotentials out{ScalarField(w, h, dx), ScalarField(w, h, dx), ScalarField(w, h, dx)};
  laplacian_into(state.cv, out.mu_v);
  laplacian_into(state.ci, out.mu_i);
  laplacian_into(state.eta, out.mu_eta);

  const double* cv = state.cv.values().data();
  const double* ci = state.ci.values().data();
  const double* eta = state.eta.values().data();
  double* mv = out.mu_v.values().data();
  double* mi = out.mu_i.values().data();
  double* me = out.mu_eta.values().data();
  const std::size_t n = state.eta.size();
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < n; ++k) {
    const BulkPartials b = bulk_partials(cv[k], ci[k], eta[k], theta);
    mv[k] = b.df_dcv - theta.kappa_v * mv[k];
    mi[k] = b.df_dci - theta.kappa_i * mi[k];
    me[k] = b.df_deta - theta.kappa_eta * me[k];
  }
  return out;
}

double total_free_energy(const PhaseState& state, const ModelParams& theta) {
  state.validate();
  const int w = state.width();
  const int h = state.height();
  const double dx = state.dx();
  const double inv_2dx = 1.0 / (2.0 * dx);
  auto grad_sq = [&](const ScalarField& u, int x, int y) {
    const int xl = x == 0 ? w - 1 : x - 1;
    const int xr = x == w - 1 ? 0 : x + 1;
    const int yu = y == 0 ? h - 1 : y - 1;
    const int yd = y == h - 1 ? 0 : y + 1;
    const double gx = (u(xr, y) - u(xl, y)) * inv_2dx;
    const double gy = (u(x, yd) - u(x, yu)) * inv_2dx;
    return gx * gx + gy * gy;
  };
  const double total = ordered_row_sum(h, [&](int y) {
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      const double f = bulk_partials(state.cv(x, y), state.ci(x, y), state.eta(x, y), theta).f;
      row += f + 0.5 * theta.kappa_v * grad_sq(state.cv, x, y) +
             0.5 * theta.kappa_i * grad_sq(state.ci, x, y) +
             0.5 * theta.kappa_eta * grad_sq(state.eta, x, y);
    }
    return row;
  });
  return total * dx * dx;
}

}  // namespace pfl
