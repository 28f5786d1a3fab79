#pragma once

#include "pfl/grid.hpp"
#include "pfl/params.hpp"

namespace pfl {

// Vacancy concentration, interstitial concentration and void order
// parameter at one simulation time.
struct PhaseState {
  ScalarField cv;
  ScalarField ci;
  ScalarField eta;
  double time = 0.0;

  // Throws DimensionMismatchError if the three fields disagree on shape or dx.
  void validate() const;
  int width() const { return eta.width(); }
  int height() const { return eta.height(); }
  double dx() const { return eta.dx(); }

  friend bool operator==(const PhaseState&, const PhaseState&) = default;
};

struct BulkPartials {
  double f = 0.0;
  double df_dcv = 0.0;
  double df_dci = 0.0;
  double df_deta = 0.0;
};

// Two-well bulk density f = h(eta) f_s + j(eta) f_v with h = (eta-1)^2,
// j = eta^2, f_s = A_v (cv-cv_eq)^2 + A_i (ci-ci_eq)^2 and
// f_v = B_v (cv-1)^2 + B_i ci^2.
inline BulkPartials bulk_partials(double cv, double ci, double eta, const ModelParams& p) {
  const double h = (eta - 1.0) * (eta - 1.0);
  const double j = eta * eta;
  const double sv = cv - p.cv_eq;
  const double si = ci - p.ci_eq;
  const double vv = cv - 1.0;
  const double f_s = p.A_v * sv * sv + p.A_i * si * si;
  const double f_v = p.B_v * vv * vv + p.B_i * ci * ci;
  BulkPartials out;
  out.f = h * f_s + j * f_v;
  out.df_dcv = 2.0 * h * p.A_v * sv + 2.0 * j * p.B_v * vv;
  out.df_dci = 2.0 * h * p.A_i * si + 2.0 * j * p.B_i * ci;
  out.df_deta = 2.0 * (eta - 1.0) * f_s + 2.0 * eta * f_v;
  return out;
}

struct ChemicalPotentials {
  ScalarField mu_v;
  ScalarField mu_i;
  ScalarField mu_eta;
};

// mu_u = df/du - kappa_u * laplacian(u) for each of the three fields.
ChemicalPotentials variational_derivatives(const PhaseState& state, const ModelParams& theta);

// Sum over pixels of f + kappa/2 |grad u|^2 (centered differences), times dx^2.
double total_free_energy(const PhaseState& state, const ModelParams& theta);

}  // namespace pfl
