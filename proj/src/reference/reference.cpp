#include "reference.hpp"

namespace pfl::reference {

namespace {

double lap_at(const ScalarField& f, int x, int y) {
  const double inv_dx2 = 1.0 / (f.dx() * f.dx());
  return (f.wrapped(x - 1, y) + f.wrapped(x + 1, y) + f.wrapped(x, y - 1) + f.wrapped(x, y + 1) -
          4.0 * f(x, y)) *
         inv_dx2;
}

}  // namespace

ScalarField laplacian(const ScalarField& f) {
  ScalarField out(f.width(), f.height(), f.dx());
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) out(x, y) = lap_at(f, x, y);
  }
  return out;
}

double row_sum(const ScalarField& f) {
  double total = 0.0;
  for (int y = 0; y < f.height(); ++y) {
    double s = 0.0;
    for (int x = 0; x < f.width(); ++x) s += f(x, y);
    total += s;
  }
  return total;
}

ChemicalPotentials variational_derivatives(const PhaseState& s, const ModelParams& th) {
  const int w = s.width();
  const int h = s.height();
  ChemicalPotentials mu{ScalarField(w, h, s.dx()), ScalarField(w, h, s.dx()), ScalarField(w, h, s.dx())};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const BulkPartials b = bulk_partials(s.cv(x, y), s.ci(x, y), s.eta(x, y), th);
      mu.mu_v(x, y) = b.df_dcv - th.kappa_v * lap_at(s.cv, x, y);
      mu.mu_i(x, y) = b.df_dci - th.kappa_i * lap_at(s.ci, x, y);
      mu.mu_eta(x, y) = b.df_deta - th.kappa_eta * lap_at(s.eta, x, y);
    }
  }
  return mu;
}

PhaseState step(const PhaseState& s, const ModelParams& th, double dt) {
  const ChemicalPotentials mu = reference::variational_derivatives(s, th);
  PhaseState out = s;
  for (int y = 0; y < s.height(); ++y) {
    for (int x = 0; x < s.width(); ++x) {
      const double reaction = th.R * s.cv(x, y) * s.ci(x, y);
      out.cv(x, y) = s.cv(x, y) + dt * (th.M_v * lap_at(mu.mu_v, x, y) - reaction + th.P);
      out.ci(x, y) = s.ci(x, y) + dt * (th.M_i * lap_at(mu.mu_i, x, y) - reaction + th.P);
      out.eta(x, y) = s.eta(x, y) - dt * th.L * mu.mu_eta(x, y);
    }
  }
  out.time = s.time + dt;
  return out;
}

double total_free_energy(const PhaseState& s, const ModelParams& th) {
  const double inv_2dx = 1.0 / (2.0 * s.dx());
  auto grad_sq = [&](const ScalarField& u, int x, int y) {
    const double gx = (u.wrapped(x + 1, y) - u.wrapped(x - 1, y)) * inv_2dx;
    const double gy = (u.wrapped(x, y + 1) - u.wrapped(x, y - 1)) * inv_2dx;
    return gx * gx + gy * gy;
  };
  double total = 0.0;
  for (int y = 0; y < s.height(); ++y) {
    double row = 0.0;
    for (int x = 0; x < s.width(); ++x) {
      const double f = bulk_partials(s.cv(x, y), s.ci(x, y), s.eta(x, y), th).f;
      row += f + 0.5 * th.kappa_v * grad_sq(s.cv, x, y) + 0.5 * th.kappa_i * grad_sq(s.ci, x, y) +
             0.5 * th.kappa_eta * grad_sq(s.eta, x, y);
    }
    total += row;
  }
  return total * s.dx() * s.dx();
}

}  // namespace pfl::reference
