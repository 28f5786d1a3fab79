#include "pfl/pipeline.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <set>

#include "pfl/extract.hpp"
#include "pfl/fileio.hpp"
#include "pfl/image.hpp"
#include "pfl/params.hpp"

namespace pfl::pipeline {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double number_field(const nlohmann::json& j, const char* key, double fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw SchemaError(key, "expected a number");
  return it->get<double>();
}

long integer_field(const nlohmann::json& j, const char* key, long fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_integer()) throw SchemaError(key, "expected an integer");
  return it->get<long>();
}

}  // namespace

fs::path resolve_under(const fs::path& root, const std::string& ref, const std::string& field) {
  const fs::path rel(ref);
  if (ref.empty() || rel.is_absolute()) throw SchemaError(field, "expected a relative reference");
  for (const auto& part : rel) {
    if (part == "..") throw SchemaError(field, "reference leaves the data directory");
  }
  return root / rel;
}

Mask annotated_mask(const fs::path& root, const std::string& frame_id) {
  const fs::path sp_file = resolve_under(root / "superpixels", frame_id + ".json", "frame_id");
  const fs::path ann_file = resolve_under(root / "annotations", frame_id + ".json", "frame_id");
  if (!fs::exists(ann_file)) throw NotFoundError("no annotation for frame " + frame_id);
  if (!fs::exists(sp_file)) throw NotFoundError("no superpixels for frame " + frame_id);
  const SuperpixelMap map = load_superpixels(sp_file.string());
  return compose_mask(map, load_annotation(ann_file.string(), &map));
}

FrameData load_frame(const fs::path& root, const std::string& ref, const std::string& field) {
  if (ends_with(ref, ".png") || ends_with(ref, ".pfs")) {
    const fs::path file = resolve_under(root, ref, field);
    if (!fs::exists(file)) throw NotFoundError(field + ": no such file " + ref);
    if (ends_with(ref, ".png")) return read_mask_png(file.string());
    return read_pfs(file);
  }
  return annotated_mask(root, ref);
}

void synth(const SynthSpec& spec, const fs::path& out) {
  if (spec.steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (spec.snapshot_every < 1) throw std::invalid_argument("snapshot-every must be >= 1");
  const SynthResult r = synth_two_voids(spec.seed, spec.theta, spec.steps, spec.snapshot_every, spec.options);
  save_trajectory(r.trajectory, out);
  fs::create_directories(out / "masks");
  fs::create_directories(out / "frames");
  for (std::size_t k = 0; k < r.masks.size(); ++k) {
    const Snapshot& s = r.trajectory.snapshots[k];
    write_mask_png(r.masks[k], (out / "masks" / mask_file_name(s.step)).string());
    write_png(render_frame(s.state, Channel::eta), (out / "frames" / frame_file_name(s.step)).string());
  }
  save_params(spec.theta, (out / "theta_star.json").string());

  nlohmann::ordered_json manifest;
  manifest["dt"] = r.trajectory.dt;
  manifest["interface_width"] = spec.options.interface_width;
  manifest["dx"] = spec.options.dx;
  auto pairs = nlohmann::ordered_json::array();
  const auto& snaps = r.trajectory.snapshots;
  const std::size_t n_pairs = std::min(static_cast<std::size_t>(std::max(0L, spec.pairs)), snaps.size() - 1);
  for (std::size_t k = 1; k <= n_pairs; ++k) {
    nlohmann::ordered_json p;
    p["init"] = "masks/" + mask_file_name(snaps[0].step);
    p["target"] = "masks/" + mask_file_name(snaps[k].step);
    p["steps"] = snaps[k].step - snaps[0].step;
    pairs.push_back(std::move(p));
  }
  manifest["pairs"] = std::move(pairs);
  write_text_file(out / "pairs.json", manifest.dump(2) + "\n");
}

LearnSpec learn_spec_from_json(const nlohmann::json& j, const fs::path& root) {
  if (!j.is_object()) throw SchemaError("config", "expected an object");
  LearnSpec spec;
  TrainConfig& c = spec.config;
  c.lambda1 = number_field(j, "lambda1", c.lambda1);
  c.lambda2 = number_field(j, "lambda2", c.lambda2);
  c.learning_rate = number_field(j, "learning_rate", c.learning_rate);
  c.iterations = integer_field(j, "iterations", c.iterations);
  c.dt = number_field(j, "dt", c.dt);
  c.interface_width = number_field(j, "interface_width", c.interface_width);
  c.dx = number_field(j, "dx", c.dx);
  c.batch_size = integer_field(j, "batch_size", c.batch_size);
  if (auto it = j.find("seed"); it != j.end()) {
    if (!it->is_number_unsigned()) throw SchemaError("seed", "expected a non-negative integer");
    c.seed = it->get<std::uint64_t>();
  }
  if (auto it = j.find("gradient_mode"); it != j.end()) {
    if (!it->is_string()) throw SchemaError("gradient_mode", "expected a string");
    try {
      c.gradient_mode = gradient_mode_from_string(it->get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw SchemaError("gradient_mode", e.what());
    }
  }
  if (auto it = j.find("normalize_gradient"); it != j.end()) {
    if (!it->is_boolean()) throw SchemaError("normalize_gradient", "expected a boolean");
    c.normalize_gradient = it->get<bool>();
  }
  if (auto it = j.find("bounds"); it != j.end()) c.bounds = bounds_from_json(*it, "bounds");

  auto it = j.find("pairs");
  if (it == j.end()) throw SchemaError("pairs", "missing");
  if (!it->is_array()) throw SchemaError("pairs", "expected an array");
  for (std::size_t i = 0; i < it->size(); ++i) {
    const std::string path = "pairs[" + std::to_string(i) + "]";
    const auto& p = (*it)[i];
    if (!p.is_object()) throw SchemaError(path, "expected an object");
    for (const char* key : {"init", "target"}) {
      if (!p.contains(key) || !p[key].is_string()) throw SchemaError(path + "." + key, "expected a frame reference");
    }
    if (!p.contains("steps") || !p["steps"].is_number_integer()) throw SchemaError(path + ".steps", "expected an integer");
    TrainPair pair;
    pair.init = load_frame(root, p["init"].get<std::string>(), path + ".init");
    pair.target = load_frame(root, p["target"].get<std::string>(), path + ".target");
    pair.steps = p["steps"].get<long>();
    c.pairs.push_back(std::move(pair));
  }
  c.validate();

  if (auto init = j.find("init"); init != j.end()) {
    spec.init = params_from_json(*init, "init");
  } else {
    spec.init = default_initialization(c.bounds);
  }
  return spec;
}

std::string history_csv(const std::vector<LossReport>& history) {
  std::string out = "iteration,mismatch,penalty_lo,penalty_hi,total\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    const LossReport& r = history[i];
    out += std::to_string(i) + "," + format_double(r.mismatch) + "," + format_double(r.penalty_lo) + "," +
           format_double(r.penalty_hi) + "," + format_double(r.total) + "\n";
  }
  return out;
}

FitResult learn(const LearnSpec& spec, const fs::path& params_out, const fs::path& history_out,
                const FitProgressFn& progress) {
  FitResult result = fit(spec.config, spec.init, progress);
  if (params_out.has_parent_path()) fs::create_directories(params_out.parent_path());
  save_params(result.theta, params_out.string());
  if (!history_out.empty()) {
    if (history_out.has_parent_path()) fs::create_directories(history_out.parent_path());
    write_text_file(history_out, history_csv(result.history));
  }
  return result;
}

Trajectory simulate(const SimulateSpec& spec, const fs::path& out, const ProgressFn& progress) {
  Trajectory traj = run(spec.init, spec.theta, spec.dt, spec.steps, spec.snapshot_every, progress);
  save_trajectory(traj, out);
  return traj;
}

void render(const fs::path& traj_dir, Channel channel, const fs::path& out, double lo, double hi) {
  const Trajectory traj = load_trajectory(traj_dir);
  fs::create_directories(out);
  for (const Snapshot& s : traj.snapshots) {
    write_png(render_frame(s.state, channel, lo, hi), (out / frame_file_name(s.step)).string());
  }
}

void predict(const PredictSpec& spec, const fs::path& out) {
  const PhaseState s0 = extract_state(spec.init, spec.theta, spec.interface_width);
  const std::vector<Mask> masks = predict_masks(s0, spec.theta, spec.dt, spec.steps, spec.threshold);
  fs::create_directories(out);
  for (std::size_t k = 0; k < masks.size(); ++k) {
    write_mask_png(masks[k], (out / mask_file_name(spec.steps[k])).string());
  }
}

std::vector<MetricRow> metrics(const fs::path& pred_dir, const fs::path& truth_dir) {
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(pred_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png" && fs::exists(truth_dir / e.path().filename())) {
      names.insert(e.path().filename().string());
    }
  }
  std::vector<MetricRow> rows;
  for (const std::string& name : names) {
    const Mask p = read_mask_png((pred_dir / name).string());
    const Mask t = read_mask_png((truth_dir / name).string());
    rows.push_back({fs::path(name).stem().string(), iou(p, t), pixel_accuracy(p, t)});
  }
  return rows;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = "frame,iou,pixel_accuracy\n";
  double si = 0.0;
  double sa = 0.0;
  char buf[128];
  for (const MetricRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f\n", r.frame.c_str(), r.iou, r.pixel_accuracy);
    out += buf;
    si += r.iou;
    sa += r.pixel_accuracy;
  }
  if (!rows.empty()) {
    const double n = static_cast<double>(rows.size());
    std::snprintf(buf, sizeof buf, "mean,%.6f,%.6f\n", si / n, sa / n);
    out += buf;
  }
  return out;
}

std::vector<long> parse_step_list(const std::string& text) {
  std::vector<long> steps;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(item, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad step '" + item + "'");
    }
    if (used != item.size() || v < 0) throw std::invalid_argument("bad step '" + item + "'");
    if (!steps.empty() && v <= steps.back()) throw std::invalid_argument("steps must be increasing");
    steps.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return steps;
}

}  // namespace pfl::pipeline
