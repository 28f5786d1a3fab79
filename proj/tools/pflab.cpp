// pflab: command-line front end for the void phase-field toolkit.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "pfl/annot.hpp"
#include "pfl/fileio.hpp"
#include "pfl/image.hpp"
#include "pfl/params.hpp"
#include "pfl/pipeline.hpp"
#include "pfl/service.hpp"
#include "pfl/slic.hpp"

namespace fs = std::filesystem;
using namespace pfl;

namespace {

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 1;
  long steps = 400;
  long every = 10;
  std::string params;
  long pairs = 20;
  double dt_fraction = SynthOptions{}.dt_fraction;
};

struct SimulateArgs {
  std::string params, init, out;
  double dt = 0.0;
  long steps = 0;
  long every = 1;
};

struct LearnArgs {
  std::string data, bounds, out, history, init;
  double lambda1 = TrainConfig{}.lambda1;
  double lambda2 = TrainConfig{}.lambda2;
  double lr = TrainConfig{}.learning_rate;
  long iters = TrainConfig{}.iterations;
  std::string grad = "central_fd";
  std::uint64_t seed = 0;
  long batch_size = 0;
  bool verbose = false;
};

struct SegmentArgs {
  std::string image, out;
  int k = 400;
  double m = 10.0;
  int iters = 10;
};

struct ComposeArgs {
  std::string superpixels, annotation, out;
};

struct PredictArgs {
  std::string params, annotation, superpixels, steps, out;
  double dt = 0.0;
  double threshold = 0.5;
  double interface_width = 2.0;
};

struct RenderArgs {
  std::string traj, channel = "eta", out;
  double lo = 0.0;
  double hi = 1.0;
};

struct MetricsArgs {
  std::string pred, truth;
};

struct ServeArgs {
  std::string data, host = "127.0.0.1";
  int port = 8080;
  int workers = 0;
};

int run_synth(const SynthArgs& a) {
  pipeline::SynthSpec spec;
  spec.seed = a.seed;
  spec.steps = a.steps;
  spec.snapshot_every = a.every;
  spec.pairs = a.pairs;
  spec.options.dt_fraction = a.dt_fraction;
  if (!a.params.empty()) spec.theta = load_params(a.params);
  pipeline::synth(spec, a.out);
  return 0;
}

int run_simulate(const SimulateArgs& a) {
  pipeline::SimulateSpec spec;
  spec.theta = load_params(a.params);
  spec.init = read_pfs(a.init);
  spec.dt = a.dt;
  spec.steps = a.steps;
  spec.snapshot_every = a.every;
  pipeline::simulate(spec, a.out);
  return 0;
}

int run_learn(const LearnArgs& a) {
  nlohmann::json j = read_json_file((fs::path(a.data) / "pairs.json").string());
  if (!j.is_object()) throw SchemaError("pairs.json", "expected an object");
  j["bounds"] = read_json_file(a.bounds);
  j["lambda1"] = a.lambda1;
  j["lambda2"] = a.lambda2;
  j["learning_rate"] = a.lr;
  j["iterations"] = a.iters;
  j["gradient_mode"] = a.grad;
  j["seed"] = a.seed;
  j["batch_size"] = a.batch_size;
  if (!a.init.empty()) j["init"] = read_json_file(a.init);
  const pipeline::LearnSpec spec = pipeline::learn_spec_from_json(j, a.data);
  FitProgressFn progress;
  if (a.verbose) {
    progress = [](long it, long total, const LossReport& r) {
      std::fprintf(stderr, "iter %ld/%ld total %.6e mismatch %.6e\n", it, total, r.total, r.mismatch);
    };
  }
  pipeline::learn(spec, a.out, a.history, progress);
  return 0;
}

int run_segment(const SegmentArgs& a) {
  const GrayImage img = read_png(a.image);
  save_superpixels(slic_segment(img, {a.k, a.m, a.iters}), a.out);
  return 0;
}

int run_compose(const ComposeArgs& a) {
  const SuperpixelMap map = load_superpixels(a.superpixels);
  const Annotation ann = load_annotation(a.annotation, &map);
  write_mask_png(compose_mask(map, ann), a.out);
  return 0;
}

int run_predict(const PredictArgs& a) {
  pipeline::PredictSpec spec;
  spec.theta = load_params(a.params);
  const SuperpixelMap map = load_superpixels(a.superpixels);
  spec.init = compose_mask(map, load_annotation(a.annotation, &map));
  spec.interface_width = a.interface_width;
  spec.dt = a.dt;
  spec.steps = pipeline::parse_step_list(a.steps);
  spec.threshold = a.threshold;
  pipeline::predict(spec, a.out);
  return 0;
}

int run_render(const RenderArgs& a) {
  pipeline::render(a.traj, channel_from_string(a.channel), a.out, a.lo, a.hi);
  return 0;
}

int run_metrics(const MetricsArgs& a) {
  const auto rows = pipeline::metrics(a.pred, a.truth);
  if (rows.empty()) throw std::runtime_error("no mask file names in common between " + a.pred + " and " + a.truth);
  std::cout << pipeline::metrics_csv(rows);
  return 0;
}

int run_serve(const ServeArgs& a) {
  // Signals are taken synchronously by a dedicated thread so shutdown runs
  // outside signal context.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  Service service({a.data, a.workers});
  if (!service.bind(a.host, a.port)) throw std::runtime_error("cannot bind " + a.host + ":" + std::to_string(a.port));
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    service.stop();
  });
  std::fprintf(stderr, "serving %s on http://%s:%d with %d workers\n", a.data.c_str(), a.host.c_str(), a.port,
               service.worker_count());
  service.serve();
  // serve() also returns if the listener fails; wake the waiter either way.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-field nano-void toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Synthesize a two-void trajectory with masks and frames");
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--seed", synth.seed, "Seed for the void centers");
  c_synth->add_option("--steps", synth.steps, "Number of steps")->check(CLI::PositiveNumber);
  c_synth->add_option("--snapshot-every", synth.every, "Snapshot stride")->check(CLI::PositiveNumber);
  c_synth->add_option("--params", synth.params, "Ground-truth parameters (JSON)")->check(CLI::ExistingFile);
  c_synth->add_option("--pairs", synth.pairs, "Training pairs written to pairs.json")->check(CLI::NonNegativeNumber);
  c_synth->add_option("--dt-fraction", synth.dt_fraction, "Time step as a fraction of the stability bound")
      ->check(CLI::PositiveNumber);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Run the phase-field model from a state file");
  c_sim->add_option("--params", sim.params, "Parameters (JSON)")->required()->check(CLI::ExistingFile);
  c_sim->add_option("--init", sim.init, "Initial state (.pfs)")->required()->check(CLI::ExistingFile);
  c_sim->add_option("--dt", sim.dt, "Time step")->required()->check(CLI::PositiveNumber);
  c_sim->add_option("--steps", sim.steps, "Number of steps")->required()->check(CLI::NonNegativeNumber);
  c_sim->add_option("--snapshot-every", sim.every, "Snapshot stride")->check(CLI::PositiveNumber);
  c_sim->add_option("--out", sim.out, "Output directory")->required();

  LearnArgs learn;
  auto* c_learn = app.add_subcommand("learn", "Fit parameters to annotated frame pairs");
  c_learn->add_option("--data", learn.data, "Directory holding pairs.json")->required()->check(CLI::ExistingDirectory);
  c_learn->add_option("--bounds", learn.bounds, "Parameter bounds (JSON)")->required()->check(CLI::ExistingFile);
  c_learn->add_option("--lambda1", learn.lambda1, "Lower-bound penalty weight")->check(CLI::NonNegativeNumber);
  c_learn->add_option("--lambda2", learn.lambda2, "Upper-bound penalty weight")->check(CLI::NonNegativeNumber);
  c_learn->add_option("--lr", learn.lr, "Learning rate")->check(CLI::PositiveNumber);
  c_learn->add_option("--iters", learn.iters, "Iterations")->check(CLI::NonNegativeNumber);
  c_learn->add_option("--grad", learn.grad, "Gradient mode")->check(CLI::IsMember({"central_fd", "adjoint"}));
  c_learn->add_option("--seed", learn.seed, "Seed for pair sampling");
  c_learn->add_option("--batch-size", learn.batch_size, "Pairs per iteration, 0 for all")
      ->check(CLI::NonNegativeNumber);
  c_learn->add_option("--init", learn.init, "Initial parameters (JSON)")->check(CLI::ExistingFile);
  c_learn->add_option("--out", learn.out, "Fitted parameters (JSON)")->required();
  c_learn->add_option("--history", learn.history, "Loss history (CSV)");
  c_learn->add_flag("--verbose", learn.verbose, "Print the loss each iteration to stderr");

  SegmentArgs seg;
  auto* c_seg = app.add_subcommand("segment", "SLIC superpixels of a grayscale frame");
  c_seg->add_option("--image", seg.image, "Frame (PNG)")->required()->check(CLI::ExistingFile);
  c_seg->add_option("--k", seg.k, "Requested superpixel count")->required();
  c_seg->add_option("--m", seg.m, "Compactness")->check(CLI::PositiveNumber);
  c_seg->add_option("--iters", seg.iters, "Iterations")->check(CLI::NonNegativeNumber);
  c_seg->add_option("--out", seg.out, "Superpixel map (JSON)")->required();

  ComposeArgs comp;
  auto* c_comp = app.add_subcommand("compose", "Turn an annotation into a mask");
  c_comp->add_option("--superpixels", comp.superpixels, "Superpixel map (JSON)")->required()->check(CLI::ExistingFile);
  c_comp->add_option("--annotation", comp.annotation, "Annotation (JSON)")->required()->check(CLI::ExistingFile);
  c_comp->add_option("--out", comp.out, "Mask (PNG)")->required();

  PredictArgs pred;
  auto* c_pred = app.add_subcommand("predict", "Predict masks from an annotated frame");
  c_pred->add_option("--params", pred.params, "Parameters (JSON)")->required()->check(CLI::ExistingFile);
  c_pred->add_option("--init-annotation", pred.annotation, "Annotation of the initial frame")
      ->required()
      ->check(CLI::ExistingFile);
  c_pred->add_option("--superpixels", pred.superpixels, "Superpixel map of the initial frame")
      ->required()
      ->check(CLI::ExistingFile);
  c_pred->add_option("--dt", pred.dt, "Time step")->required()->check(CLI::PositiveNumber);
  c_pred->add_option("--steps", pred.steps, "Comma-separated increasing step list")->required();
  c_pred->add_option("--threshold", pred.threshold, "Mask threshold on eta");
  c_pred->add_option("--interface-width", pred.interface_width, "Interface width for extraction")
      ->check(CLI::PositiveNumber);
  c_pred->add_option("--out", pred.out, "Output directory")->required();

  RenderArgs ren;
  auto* c_ren = app.add_subcommand("render", "Render trajectory snapshots to 8-bit PNG frames");
  c_ren->add_option("--traj", ren.traj, "Trajectory directory")->required()->check(CLI::ExistingDirectory);
  c_ren->add_option("--channel", ren.channel, "Field to render")->check(CLI::IsMember({"cv", "ci", "eta"}));
  c_ren->add_option("--lo", ren.lo, "Value mapped to 0");
  c_ren->add_option("--hi", ren.hi, "Value mapped to 255");
  c_ren->add_option("--out", ren.out, "Output directory")->required();

  MetricsArgs met;
  auto* c_met = app.add_subcommand("metrics", "IOU and pixel accuracy of predicted masks as CSV");
  c_met->add_option("--pred", met.pred, "Predicted masks")->required()->check(CLI::ExistingDirectory);
  c_met->add_option("--truth", met.truth, "Reference masks")->required()->check(CLI::ExistingDirectory);

  ServeArgs srv;
  auto* c_srv = app.add_subcommand("serve", "Serve the HTTP API over a data directory");
  c_srv->add_option("--data", srv.data, "Data directory")->required();
  c_srv->add_option("--host", srv.host, "Listen address");
  c_srv->add_option("--port", srv.port, "Port")->check(CLI::Range(1, 65535));
  c_srv->add_option("--workers", srv.workers, "Concurrent jobs, 0 for half the cores")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*c_synth) return run_synth(synth);
    if (*c_sim) return run_simulate(sim);
    if (*c_learn) return run_learn(learn);
    if (*c_seg) return run_segment(seg);
    if (*c_comp) return run_compose(comp);
    if (*c_pred) return run_predict(pred);
    if (*c_ren) return run_render(ren);
    if (*c_met) return run_metrics(met);
    if (*c_srv) return run_serve(srv);
  } catch (const std::exception& e) {
    std::cerr << "pflab " << app.get_subcommands().front()->get_name() << ": " << e.what() << "\n";
    return 2;
  }
  return 1;
}
