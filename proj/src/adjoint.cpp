// Reverse accumulation of the training loss through the unrolled
// forward-Euler steps. Each backward step recomputes the Laplacians and
// chemical potentials of the stored forward state, so memory is one phase
// state per step of the longest pair.

#include <cmath>

#include "pfl/learn.hpp"
#include "pfl/sim.hpp"

namespace pfl {

namespace {

enum Index : std::size_t {
  kMv, kMi, kL, kKappaV, kKappaI, kKappaEta, kAv, kAi, kBv, kBi, kCvEq, kCiEq, kR, kP
};

struct AdjointFields {
  ScalarField v, i, eta;
};

struct BackwardWorkspace {
  StepWorkspace fwd;
  ScalarField lap_av, lap_ai;
  ScalarField w_v, w_i, w_eta;
  ScalarField lap_wv, lap_wi, lap_weta;
  std::vector<std::array<double, kNumParams>> row_grad;

  void ensure(int w, int h, double dx) {
    fwd.ensure(w, h, dx);
    if (lap_av.width() == w && lap_av.height() == h && lap_av.dx() == dx) return;
    for (ScalarField* f : {&lap_av, &lap_ai, &w_v, &w_i, &w_eta, &lap_wv, &lap_wi, &lap_weta}) {
      *f = ScalarField(w, h, dx);
    }
    row_grad.assign(static_cast<std::size_t>(h), {});
  }
};

// Given the adjoint of the state after a step taken from `s`, overwrite
// `adj` with the adjoint of `s` and add the parameter sensitivities of the
// step to `g`.
void backward_step(const PhaseState& s, const ModelParams& th, double dt, AdjointFields& adj, Gradient& g,
                   BackwardWorkspace& ws) {
  const int w = s.width();
  const int h = s.height();
  ws.ensure(w, h, s.dx());
  StepWorkspace& f = ws.fwd;

  laplacian_into(s.cv, f.lap_cv);
  laplacian_into(s.ci, f.lap_ci);
  laplacian_into(s.eta, f.lap_eta);
  const std::size_t n = s.eta.size();
  {
    const double* cv = s.cv.values().data();
    const double* ci = s.ci.values().data();
    const double* eta = s.eta.values().data();
    const double* lcv = f.lap_cv.values().data();
    const double* lci = f.lap_ci.values().data();
    const double* leta = f.lap_eta.values().data();
    double* mv = f.mu_v.values().data();
    double* mi = f.mu_i.values().data();
    double* me = f.mu_eta.values().data();
#pragma omp parallel for schedule(static)
    for (std::size_t k = 0; k < n; ++k) {
      const BulkPartials b = bulk_partials(cv[k], ci[k], eta[k], th);
      mv[k] = b.df_dcv - th.kappa_v * lcv[k];
      mi[k] = b.df_dci - th.kappa_i * lci[k];
      me[k] = b.df_deta - th.kappa_eta * leta[k];
    }
  }
  laplacian_into(f.mu_v, f.lap_mu_v);
  laplacian_into(f.mu_i, f.lap_mu_i);

  // Adjoints of the chemical potentials.
  laplacian_into(adj.v, ws.lap_av);
  laplacian_into(adj.i, ws.lap_ai);
  {
    const double* lav = ws.lap_av.values().data();
    const double* lai = ws.lap_ai.values().data();
    const double* ae = adj.eta.values().data();
    double* wv = ws.w_v.values().data();
    double* wi = ws.w_i.values().data();
    double* we = ws.w_eta.values().data();
#pragma omp parallel for schedule(static)
    for (std::size_t k = 0; k < n; ++k) {
      wv[k] = dt * th.M_v * lav[k];
      wi[k] = dt * th.M_i * lai[k];
      we[k] = -dt * th.L * ae[k];
    }
  }
  laplacian_into(ws.w_v, ws.lap_wv);
  laplacian_into(ws.w_i, ws.lap_wi);
  laplacian_into(ws.w_eta, ws.lap_weta);

  const double* cv = s.cv.values().data();
  const double* ci = s.ci.values().data();
  const double* eta = s.eta.values().data();
  const double* lcv = f.lap_cv.values().data();
  const double* lci = f.lap_ci.values().data();
  const double* leta = f.lap_eta.values().data();
  const double* me = f.mu_eta.values().data();
  const double* lmv = f.lap_mu_v.values().data();
  const double* lmi = f.lap_mu_i.values().data();
  const double* wv = ws.w_v.values().data();
  const double* wi = ws.w_i.values().data();
  const double* we = ws.w_eta.values().data();
  const double* lwv = ws.lap_wv.values().data();
  const double* lwi = ws.lap_wi.values().data();
  const double* lwe = ws.lap_weta.values().data();
  double* av = adj.v.values().data();
  double* ai = adj.i.values().data();
  double* ae = adj.eta.values().data();

#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    std::array<double, kNumParams> rg{};
    for (int x = 0; x < w; ++x) {
      const std::size_t k = static_cast<std::size_t>(y) * w + x;
      const double e = eta[k];
      const double hh = (e - 1.0) * (e - 1.0);
      const double jj = e * e;
      const double sv = cv[k] - th.cv_eq;
      const double si = ci[k] - th.ci_eq;
      const double vv = cv[k] - 1.0;
      const double f_s = th.A_v * sv * sv + th.A_i * si * si;
      const double f_v = th.B_v * vv * vv + th.B_i * ci[k] * ci[k];
      const double f_vv = 2.0 * (hh * th.A_v + jj * th.B_v);
      const double f_ii = 2.0 * (hh * th.A_i + jj * th.B_i);
      const double f_ee = 2.0 * f_s + 2.0 * f_v;
      const double f_ve = 4.0 * (e - 1.0) * th.A_v * sv + 4.0 * e * th.B_v * vv;
      const double f_ie = 4.0 * (e - 1.0) * th.A_i * si + 4.0 * e * th.B_i * ci[k];

      const double av_next = av[k];
      const double ai_next = ai[k];
      const double ae_next = ae[k];
      const double both = av_next + ai_next;

      rg[kMv] += dt * av_next * lmv[k];
      rg[kMi] += dt * ai_next * lmi[k];
      rg[kL] += -dt * ae_next * me[k];
      rg[kKappaV] += -wv[k] * lcv[k];
      rg[kKappaI] += -wi[k] * lci[k];
      rg[kKappaEta] += -we[k] * leta[k];
      rg[kAv] += wv[k] * 2.0 * hh * sv + we[k] * 2.0 * (e - 1.0) * sv * sv;
      rg[kAi] += wi[k] * 2.0 * hh * si + we[k] * 2.0 * (e - 1.0) * si * si;
      rg[kBv] += wv[k] * 2.0 * jj * vv + we[k] * 2.0 * e * vv * vv;
      rg[kBi] += wi[k] * 2.0 * jj * ci[k] + we[k] * 2.0 * e * ci[k] * ci[k];
      rg[kCvEq] += -wv[k] * 2.0 * hh * th.A_v - we[k] * 4.0 * (e - 1.0) * th.A_v * sv;
      rg[kCiEq] += -wi[k] * 2.0 * hh * th.A_i - we[k] * 4.0 * (e - 1.0) * th.A_i * si;
      rg[kR] += -dt * both * cv[k] * ci[k];
      rg[kP] += dt * both;

      av[k] = av_next + f_vv * wv[k] + f_ve * we[k] - th.kappa_v * lwv[k] - dt * th.R * ci[k] * both;
      ai[k] = ai_next + f_ii * wi[k] + f_ie * we[k] - th.kappa_i * lwi[k] - dt * th.R * cv[k] * both;
      ae[k] = ae_next + f_ve * wv[k] + f_ie * wi[k] + f_ee * we[k] - th.kappa_eta * lwe[k];
    }
    ws.row_grad[static_cast<std::size_t>(y)] = rg;
  }
  for (const auto& rg : ws.row_grad) {
    for (std::size_t p = 0; p < kNumParams; ++p) g[p] += rg[p];
  }
}

}  // namespace

Gradient LossProblem::gradient_adjoint(const ModelParams& theta, const std::vector<std::size_t>& subset,
                                       LossReport* report) const {
  const double dt = config_.dt;
  const double pair_weight = 1.0 / static_cast<double>(subset.size());
  Gradient g{};
  std::vector<double> per_pair(subset.size(), 0.0);
  StepWorkspace fwd_ws;
  BackwardWorkspace bwd_ws;
  std::vector<PhaseState> states;

  for (const RunGroup& group : group_subset(subset)) {
    states.resize(static_cast<std::size_t>(group.max_steps) + 1);
    states[0] = initial_state(group.init_pair, theta);
    try {
      for (long s = 1; s <= group.max_steps; ++s) {
        step_into(states[static_cast<std::size_t>(s) - 1], theta, dt, states[static_cast<std::size_t>(s)], fwd_ws, s);
      }
    } catch (const DivergedError& e) {
      throw GradientUnavailable(kNumParams, std::string("forward simulation diverged: ") + e.what());
    }
    const PhaseState& first = states.front();
    const int w = first.width();
    const int h = first.height();
    const double dx = first.dx();
    const double scale = 2.0 * pair_weight / static_cast<double>(first.eta.size());
    AdjointFields adj{ScalarField(w, h, dx), ScalarField(w, h, dx), ScalarField(w, h, dx)};

    // Members are sorted by steps; walk them from the longest horizon down.
    std::size_t m = group.members.size();
    auto seed_targets = [&](long s) {
      for (; m > 0 && pairs_[subset[group.members[m - 1]]].steps == s; --m) {
        const std::size_t pos = group.members[m - 1];
        const ScalarField& target = pairs_[subset[pos]].target_eta;
        const ScalarField& eta = states[static_cast<std::size_t>(s)].eta;
        per_pair[pos] = mean_squared_error(eta, target);
        auto ae = adj.eta.values();
        auto e = eta.values();
        auto t = target.values();
        for (std::size_t k = 0; k < ae.size(); ++k) ae[k] += scale * (e[k] - t[k]);
      }
    };
    for (long s = group.max_steps; s >= 1; --s) {
      seed_targets(s);
      backward_step(states[static_cast<std::size_t>(s) - 1], theta, dt, adj, g, bwd_ws);
    }
    seed_targets(0);

    const Prepared& init = pairs_[group.init_pair];
    if (init.init_from_mask) {
      // cv0 = cv_eq + (1 - cv_eq) eta0 and ci0 = ci_eq (1 - eta0)
      const double* e0 = init.init_eta.values().data();
      const double* av = adj.v.values().data();
      const double* ai = adj.i.values().data();
      const double dcv = ordered_row_sum(h, [&](int y) {
        double r = 0.0;
        for (int x = 0; x < w; ++x) {
          const std::size_t k = static_cast<std::size_t>(y) * w + x;
          r += av[k] * (1.0 - e0[k]);
        }
        return r;
      });
      const double dci = ordered_row_sum(h, [&](int y) {
        double r = 0.0;
        for (int x = 0; x < w; ++x) {
          const std::size_t k = static_cast<std::size_t>(y) * w + x;
          r += ai[k] * (1.0 - e0[k]);
        }
        return r;
      });
      g[kCvEq] += dcv;
      g[kCiEq] += dci;
    }
  }
  double mismatch_total = 0.0;
  for (double v : per_pair) mismatch_total += v;

  for (std::size_t p = 0; p < kNumParams; ++p) {
    if (!config_.bounds.range[p]) continue;
    if (theta[p] < config_.bounds.range[p]->first) g[p] -= config_.lambda1;
    if (theta[p] > config_.bounds.range[p]->second) g[p] += config_.lambda2;
  }

  if (report) {
    LossReport r;
    r.mismatch = mismatch_total / static_cast<double>(subset.size());
    std::tie(r.penalty_lo, r.penalty_hi) = bound_penalties(theta, config_.bounds, config_.lambda1, config_.lambda2);
    r.total = r.mismatch + r.penalty_lo + r.penalty_hi;
    *report = r;
  }
  return g;
}

}  // namespace pfl
