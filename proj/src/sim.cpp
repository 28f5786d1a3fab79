#include "pfl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pfl/extract.hpp"

namespace pfl {

namespace {

bool shape_matches(const ScalarField& f, int w, int h, double dx) {
  return f.width() == w && f.height() == h && f.dx() == dx;
}

void check_finite(const PhaseState& s, long step_index) {
  auto bad = [](std::span<const double> v) {
    for (double x : v) {
      if (!std::isfinite(x) || std::abs(x) > kDivergenceLimit) return true;
    }
    return false;
  };
  if (bad(s.cv.values()) || bad(s.ci.values()) || bad(s.eta.values())) {
    throw DivergedError(step_index, "simulation diverged: value non-finite or above " +
                                        std::to_string(kDivergenceLimit) + "; reduce dt");
  }
}

}  // namespace

void StepWorkspace::ensure(int width, int height, double dx) {
  if (shape_matches(lap_cv, width, height, dx)) return;
  for (ScalarField* f : {&lap_cv, &lap_ci, &lap_eta, &mu_v, &mu_i, &mu_eta, &lap_mu_v, &lap_mu_i}) {
    *f = ScalarField(width, height, dx);
  }
}

void step_into(const PhaseState& in, const ModelParams& theta, double dt, PhaseState& out, StepWorkspace& ws,
               long step_index) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  in.validate();
  const int w = in.width();
  const int h = in.height();
  const double dx = in.dx();
  ws.ensure(w, h, dx);
  if (!shape_matches(out.eta, w, h, dx) || !shape_matches(out.cv, w, h, dx) || !shape_matches(out.ci, w, h, dx)) {
    out = PhaseState{ScalarField(w, h, dx), ScalarField(w, h, dx), ScalarField(w, h, dx), 0.0};
  }

  laplacian_into(in.cv, ws.lap_cv);
  laplacian_into(in.ci, ws.lap_ci);
  laplacian_into(in.eta, ws.lap_eta);

  const std::size_t n = in.eta.size();
  const double* cv = in.cv.values().data();
  const double* ci = in.ci.values().data();
  const double* eta = in.eta.values().data();
  {
    const double* lcv = ws.lap_cv.values().data();
    const double* lci = ws.lap_ci.values().data();
    const double* leta = ws.lap_eta.values().data();
    double* mv = ws.mu_v.values().data();
    double* mi = ws.mu_i.values().data();
    double* me = ws.mu_eta.values().data();
#pragma omp parallel for schedule(static)
    for (std::size_t k = 0; k < n; ++k) {
      const BulkPartials b = bulk_partials(cv[k], ci[k], eta[k], theta);
      mv[k] = b.df_dcv - theta.kappa_v * lcv[k];
      mi[k] = b.df_dci - theta.kappa_i * lci[k];
      me[k] = b.df_deta - theta.kappa_eta * leta[k];
    }
  }

  laplacian_into(ws.mu_v, ws.lap_mu_v);
  laplacian_into(ws.mu_i, ws.lap_mu_i);

  const double* lmv = ws.lap_mu_v.values().data();
  const double* lmi = ws.lap_mu_i.values().data();
  const double* me = ws.mu_eta.values().data();
  double* ocv = out.cv.values().data();
  double* oci = out.ci.values().data();
  double* oeta = out.eta.values().data();
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < n; ++k) {
    const double reaction = theta.R * cv[k] * ci[k];
    ocv[k] = cv[k] + dt * (theta.M_v * lmv[k] - reaction + theta.P);
    oci[k] = ci[k] + dt * (theta.M_i * lmi[k] - reaction + theta.P);
    oeta[k] = eta[k] - dt * theta.L * me[k];
  }
  out.time = in.time + dt;
  check_finite(out, step_index);
}

PhaseState step(const PhaseState& state, const ModelParams& theta, double dt) {
  StepWorkspace ws;
  PhaseState out;
  step_into(state, theta, dt, out, ws);
  return out;
}

double stable_dt(const ModelParams& theta, double dx, double dt_cap) {
  constexpr double eps = 1e-300;
  const double conserved = std::max({theta.M_v * theta.kappa_v, theta.M_i * theta.kappa_i, eps});
  const double nonconserved = std::max(theta.L * theta.kappa_eta, eps);
  const double dx2 = dx * dx;
  return std::min({dx2 * dx2 / (32.0 * conserved), dx2 / (8.0 * nonconserved), dt_cap});
}

Trajectory run(const PhaseState& state0, const ModelParams& theta, double dt, long n_steps, long snapshot_every,
               const ProgressFn& progress) {
  if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
  if (snapshot_every < 1) throw std::invalid_argument("snapshot_every must be >= 1");
  state0.validate();
  Trajectory traj;
  traj.dt = dt;
  traj.theta = theta;
  traj.snapshots.push_back({0, state0});
  StepWorkspace ws;
  PhaseState cur = state0;
  PhaseState next;
  for (long s = 1; s <= n_steps; ++s) {
    step_into(cur, theta, dt, next, ws, s);
    // time is recomputed from the step count so snapshots satisfy t = step * dt exactly
    next.time = static_cast<double>(s) * dt;
    std::swap(cur, next);
    if (s % snapshot_every == 0 || s == n_steps) traj.snapshots.push_back({s, cur});
    if (progress) progress(s, n_steps);
  }
  return traj;
}

Channel channel_from_string(const std::string& name) {
  if (name == "cv") return Channel::cv;
  if (name == "ci") return Channel::ci;
  if (name == "eta") return Channel::eta;
  throw std::invalid_argument("unknown channel '" + name + "' (expected cv, ci or eta)");
}

GrayImage render_frame(const PhaseState& state, Channel channel, double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("render range must satisfy lo < hi");
  const ScalarField& f = channel == Channel::cv ? state.cv : channel == Channel::ci ? state.ci : state.eta;
  GrayImage img{f.width(), f.height(), std::vector<std::uint8_t>(f.size())};
  auto v = f.values();
  const double scale = 255.0 / (hi - lo);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double g = std::floor((v[i] - lo) * scale + 0.5);
    img.pixels[i] = static_cast<std::uint8_t>(std::clamp(g, 0.0, 255.0));
  }
  return img;
}

ModelParams default_theta_star() {
  ModelParams p;
  p.M_v = 1.0;
  p.M_i = 2.0;
  p.L = 1.0;
  p.kappa_v = 0.5;
  p.kappa_i = 0.25;
  p.kappa_eta = 2.0;
  p.A_v = 1.0;
  p.A_i = 0.5;
  p.B_v = 1.0;
  p.B_i = 0.5;
  p.cv_eq = 0.1;
  p.ci_eq = 0.05;
  p.R = 1.0;
  p.P = 0.1;
  return p;
}

Mask two_void_mask(std::uint64_t seed, const SynthOptions& o) {
  std::mt19937_64 rng(seed);
  const double margin = o.radius_large + 4.0 * o.interface_width / o.dx + 2.0;
  const double min_gap = o.radius_small + o.radius_large + 8.0 * o.interface_width / o.dx;
  std::uniform_real_distribution<double> ux(margin, o.width - 1 - margin);
  std::uniform_real_distribution<double> uy(margin, o.height - 1 - margin);
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 10000) throw std::runtime_error("cannot place two separated voids on this grid");
    x1 = ux(rng);
    y1 = uy(rng);
    x2 = ux(rng);
    y2 = uy(rng);
    if (std::hypot(x2 - x1, y2 - y1) >= min_gap) break;
  }
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(o.width) * o.height, 0);
  for (int y = 0; y < o.height; ++y) {
    for (int x = 0; x < o.width; ++x) {
      const bool in_small = std::hypot(x - x1, y - y1) <= o.radius_small;
      const bool in_large = std::hypot(x - x2, y - y2) <= o.radius_large;
      bits[static_cast<std::size_t>(y) * o.width + x] = (in_small || in_large) ? 1 : 0;
    }
  }
  return Mask::from_bitmap(o.width, o.height, bits);
}

SynthResult synth_two_voids(std::uint64_t seed, const ModelParams& theta_star, long n_steps, long snapshot_every,
                            const SynthOptions& options) {
  const Mask initial = two_void_mask(seed, options);
  const PhaseState state0 = extract_state(initial, theta_star, options.interface_width, options.dx);
  const double dt = options.dt_fraction * stable_dt(theta_star, options.dx);
  SynthResult out;
  out.trajectory = run(state0, theta_star, dt, n_steps, snapshot_every);
  out.masks.reserve(out.trajectory.snapshots.size());
  for (const Snapshot& s : out.trajectory.snapshots) out.masks.push_back(threshold(s.state.eta, 0.5));
  return out;
}

}  // namespace pfl
