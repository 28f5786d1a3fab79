#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfl/energy.hpp"
#include "pfl/image.hpp"

namespace pfl {

// Raised when a step produces a non-finite value or one with magnitude
// above kDivergenceLimit.
class DivergedError : public std::runtime_error {
 public:
  DivergedError(long step, const std::string& what)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

inline constexpr double kDivergenceLimit = 10.0;
inline constexpr double kDefaultDtCap = 0.1;

// Scratch fields reused across steps.
struct StepWorkspace {
  ScalarField lap_cv, lap_ci, lap_eta;
  ScalarField mu_v, mu_i, mu_eta;
  ScalarField lap_mu_v, lap_mu_i;

  void ensure(int width, int height, double dx);
};

// One forward-Euler step: Cahn-Hilliard for cv and ci with recombination
// and generation, Allen-Cahn for eta. `out` must not alias `in`.
void step_into(const PhaseState& in, const ModelParams& theta, double dt, PhaseState& out,
               StepWorkspace& ws, long step_index = -1);
PhaseState step(const PhaseState& state, const ModelParams& theta, double dt);

double stable_dt(const ModelParams& theta, double dx, double dt_cap = kDefaultDtCap);

struct Snapshot {
  long step = 0;
  PhaseState state;
};

struct Trajectory {
  double dt = 0.0;
  ModelParams theta;
  std::vector<Snapshot> snapshots;
};

// Called after every step with (steps done, total steps).
using ProgressFn = std::function<void(long, long)>;

Trajectory run(const PhaseState& state0, const ModelParams& theta, double dt, long n_steps,
               long snapshot_every, const ProgressFn& progress = {});

enum class Channel { cv, ci, eta };
Channel channel_from_string(const std::string& name);

GrayImage render_frame(const PhaseState& state, Channel channel, double lo = 0.0, double hi = 1.0);

struct SynthOptions {
  int width = 128;
  int height = 128;
  double dx = 1.0;
  double radius_small = 10.0;
  double radius_large = 16.0;
  double interface_width = 2.0;
  // Fraction of stable_dt(theta_star) used as the time step. The bound
  // ignores the bulk curvature, so a full step can be marginal.
  double dt_fraction = 0.32;
};

struct SynthResult {
  Trajectory trajectory;
  std::vector<Mask> masks;
};

// Ground-truth parameters used for synthetic data when none are given.
ModelParams default_theta_star();

// Two disks of distinct radii rasterized at pixel centers; centers drawn
// from the seed.
Mask two_void_mask(std::uint64_t seed, const SynthOptions& options);

SynthResult synth_two_voids(std::uint64_t seed, const ModelParams& theta_star, long n_steps,
                            long snapshot_every, const SynthOptions& options = {});

}  // namespace pfl
