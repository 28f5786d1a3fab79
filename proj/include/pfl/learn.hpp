#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <variant>
#include <vector>

#include "pfl/energy.hpp"
#include "pfl/grid.hpp"
#include "pfl/params.hpp"

namespace pfl {

class GradientUnavailable : public std::runtime_error {
 public:
  GradientUnavailable(std::size_t component, const std::string& what)
      : std::runtime_error(what), component_(component) {}
  // kNumParams when every component is affected.
  std::size_t component() const { return component_; }

 private:
  std::size_t component_;
};

class AbortedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A frame is either an annotated mask (phase fields are extracted from it)
// or a full phase state.
using FrameData = std::variant<Mask, PhaseState>;

struct TrainPair {
  FrameData init;
  FrameData target;
  long steps = 1;
};

enum class GradientMode { central_fd, adjoint };
GradientMode gradient_mode_from_string(const std::string& s);
std::string to_string(GradientMode mode);

struct TrainConfig {
  std::vector<TrainPair> pairs;
  ParamBounds bounds;
  double lambda1 = 1e3;
  double lambda2 = 1e3;
  double learning_rate = 0.01;
  long iterations = 100;
  double dt = 0.01;
  GradientMode gradient_mode = GradientMode::central_fd;
  std::uint64_t seed = 0;
  double interface_width = 2.0;
  double dx = 1.0;
  // Divide each gradient component by its running RMS before stepping.
  bool normalize_gradient = true;
  // Pairs drawn per iteration from the seeded generator; 0 uses all pairs.
  long batch_size = 0;

  // Throws SchemaError naming the offending field.
  void validate() const;
};

struct LossReport {
  double mismatch = 0.0;
  double penalty_lo = 0.0;  // already weighted by lambda1
  double penalty_hi = 0.0;  // already weighted by lambda2
  double total = 0.0;
  bool diverged = false;

  static LossReport divergence() {
    LossReport r;
    r.total = std::numeric_limits<double>::infinity();
    r.diverged = true;
    return r;
  }
};

using Gradient = std::array<double, kNumParams>;

// Precomputes the theta-independent parts of a training configuration
// (order-parameter fields of every mask) so repeated evaluations only pay
// for the simulations.
class LossProblem {
 public:
  explicit LossProblem(const TrainConfig& config);

  const TrainConfig& config() const { return config_; }
  std::size_t pair_count() const { return pairs_.size(); }

  LossReport loss(const ModelParams& theta) const;
  LossReport loss(const ModelParams& theta, const std::vector<std::size_t>& subset) const;

  Gradient gradient(const ModelParams& theta) const;
  Gradient gradient(const ModelParams& theta, const std::vector<std::size_t>& subset) const;

  // Reference finite-difference gradient regardless of the configured mode.
  Gradient gradient_central_fd(const ModelParams& theta, const std::vector<std::size_t>& subset) const;
  // Reverse accumulation through the unrolled steps; also returns the loss.
  Gradient gradient_adjoint(const ModelParams& theta, const std::vector<std::size_t>& subset,
                            LossReport* report = nullptr) const;

  PhaseState initial_state(std::size_t pair, const ModelParams& theta) const;
  const ScalarField& target_eta(std::size_t pair) const { return pairs_[pair].target_eta; }

 private:
  struct Prepared {
    bool init_from_mask = false;
    ScalarField init_eta;     // when init_from_mask
    PhaseState init_state;    // otherwise
    ScalarField target_eta;
    long steps = 1;
    std::size_t group = 0;  // first pair with an identical initial frame
  };

  // Pairs sharing an initial frame are simulated once, up to the longest
  // horizon among them.
  struct RunGroup {
    std::size_t init_pair = 0;
    std::vector<std::size_t> members;  // positions in the subset, by increasing steps
    long max_steps = 0;
  };
  std::vector<RunGroup> group_subset(const std::vector<std::size_t>& subset) const;

  std::vector<std::size_t> all_pairs() const;
  double mismatch(const ModelParams& theta, const std::vector<std::size_t>& subset) const;

  TrainConfig config_;
  std::vector<Prepared> pairs_;
};

// Hinge penalties lambda1 * sum max(0, lo - theta) and
// lambda2 * sum max(0, theta - hi) over bounded parameters.
std::pair<double, double> bound_penalties(const ModelParams& theta, const ParamBounds& bounds, double lambda1,
                                          double lambda2);

LossReport loss(const ModelParams& theta, const TrainConfig& config);
Gradient grad(const ModelParams& theta, const TrainConfig& config);

struct FitResult {
  ModelParams theta;
  std::vector<LossReport> history;  // history[0] is the loss at theta_init
};

using FitProgressFn = std::function<void(long iteration, long total, const LossReport&)>;

FitResult fit(const TrainConfig& config, const ModelParams& theta_init, const FitProgressFn& progress = {});

// Midpoint of each bounded range and 1.0 for unbounded parameters.
ModelParams default_initialization(const ParamBounds& bounds);

std::vector<Mask> predict_masks(const PhaseState& state0, const ModelParams& theta, double dt,
                                const std::vector<long>& step_list, double threshold_t);

double pixel_accuracy(const Mask& a, const Mask& b);
double mean_squared_error(const ScalarField& a, const ScalarField& b);

}  // namespace pfl
