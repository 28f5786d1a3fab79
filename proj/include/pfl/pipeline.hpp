#pragma once

// Artifact-producing entry points shared by the command-line tool and the
// HTTP service, so both write the same bytes for the same inputs.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfl/annot.hpp"
#include "pfl/learn.hpp"
#include "pfl/sim.hpp"
#include "pfl/slic.hpp"

namespace pfl::pipeline {

namespace fs = std::filesystem;

// A referenced frame, annotation or file does not exist.
class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Joins a relative reference onto root, rejecting absolute paths and "..".
fs::path resolve_under(const fs::path& root, const std::string& ref, const std::string& field);

// A frame reference is a mask PNG ("*.png"), a phase state ("*.pfs"), or a
// frame id whose annotation and superpixel map live under
// annotations/{id}.json and superpixels/{id}.json.
FrameData load_frame(const fs::path& root, const std::string& ref, const std::string& field);
Mask annotated_mask(const fs::path& root, const std::string& frame_id);

struct SynthSpec {
  std::uint64_t seed = 1;
  long steps = 400;
  long snapshot_every = 10;
  long pairs = 20;
  ModelParams theta = default_theta_star();
  SynthOptions options;
};

// Writes the trajectory, masks/, frames/ (eta rendered to 8 bits),
// theta_star.json and pairs.json. Pairs all start at the first snapshot and
// end at snapshots 1..pairs.
void synth(const SynthSpec& spec, const fs::path& out);

// TrainConfig JSON: pairs [{init, target, steps}], bounds, lambda1, lambda2,
// learning_rate, iterations, dt, gradient_mode, seed, interface_width, dx,
// normalize_gradient, batch_size, and an optional init parameter object.
// Frame references resolve under root.
struct LearnSpec {
  TrainConfig config;
  ModelParams init;
};
LearnSpec learn_spec_from_json(const nlohmann::json& j, const fs::path& root);

std::string history_csv(const std::vector<LossReport>& history);

// Writes params_out and, when non-empty, history_out.
FitResult learn(const LearnSpec& spec, const fs::path& params_out, const fs::path& history_out,
                const FitProgressFn& progress = {});

struct SimulateSpec {
  ModelParams theta;
  PhaseState init;
  double dt = 0.01;
  long steps = 100;
  long snapshot_every = 10;
};

// Writes the snapshot states and trajectory.json.
Trajectory simulate(const SimulateSpec& spec, const fs::path& out, const ProgressFn& progress = {});

// One frame_%06d.png per snapshot of the trajectory in traj_dir, numbered by
// step.
void render(const fs::path& traj_dir, Channel channel, const fs::path& out, double lo = 0.0, double hi = 1.0);

struct PredictSpec {
  ModelParams theta;
  Mask init;
  double interface_width = 2.0;
  double dt = 0.01;
  std::vector<long> steps;
  double threshold = 0.5;
};

// One mask_%06d.png per requested step.
void predict(const PredictSpec& spec, const fs::path& out);

struct MetricRow {
  std::string frame;
  double iou = 0.0;
  double pixel_accuracy = 0.0;
};

// Compares mask PNGs present under the same name in both directories.
std::vector<MetricRow> metrics(const fs::path& pred_dir, const fs::path& truth_dir);
std::string metrics_csv(const std::vector<MetricRow>& rows);

std::vector<long> parse_step_list(const std::string& text);

}  // namespace pfl::pipeline
