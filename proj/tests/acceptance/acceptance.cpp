// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. `acceptance N...` runs only the listed ones.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "pfl/annot.hpp"
#include "pfl/extract.hpp"
#include "pfl/fileio.hpp"
#include "pfl/image.hpp"
#include "pfl/learn.hpp"
#include "pfl/service.hpp"
#include "pfl/sim.hpp"
#include "pfl/slic.hpp"

namespace fs = std::filesystem;
using namespace pfl;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

int pflab(const std::string& args, std::string* out = nullptr) {
  const std::string cmd = std::string(PFLAB_PATH) + " " + args + (out ? "" : " > /dev/null");
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return -1;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) {
    if (out) out->append(buf, n);
  }
  const int status = pclose(p);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& tag) {
  std::random_device rd;
  fs::path p = fs::temp_directory_path() / ("pfl-accept-" + tag + "-" + std::to_string(rd()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* const kBounded[] = {"M_v", "M_i", "L", "kappa_v", "kappa_i", "kappa_eta", "A_v", "B_v", "R"};

// --- 1: parameter recovery on synthetic data ------------------------------

struct SeedOutcome {
  double mse100 = 0.0;
  double min_accuracy = 0.0;
  std::size_t held_out = 0;
  bool in_boxes = false;
  std::string error;
};

SeedOutcome recovery_seed(std::uint64_t seed, const fs::path& dir) {
  SeedOutcome o;
  const fs::path data = dir / "data";
  const std::string s = std::to_string(seed);
  if (pflab("synth --out " + q(data) + " --seed " + s + " --steps 400 --snapshot-every 10 --pairs 20") != 0) {
    o.error = "synth failed";
    return o;
  }
  const ModelParams star = load_params((data / "theta_star.json").string());

  ParamBounds bounds;
  for (const char* name : kBounded) {
    const std::size_t p = *ModelParams::index_of(name);
    bounds.range[p] = std::make_pair(0.5 * star[p], 1.5 * star[p]);
  }
  save_bounds(bounds, (dir / "bounds.json").string());
  // bounded: box midpoints; unbounded: the generating values
  ModelParams init = default_initialization(bounds);
  for (std::size_t p = 0; p < kNumParams; ++p) {
    if (!bounds.range[p]) init[p] = star[p];
  }
  save_params(init, (dir / "init.json").string());

  if (pflab("learn --data " + q(data) + " --bounds " + q(dir / "bounds.json") + " --init " + q(dir / "init.json") +
            " --lambda1 1000 --lambda2 1000 --lr 0.01 --iters 500 --grad adjoint --seed " + s + " --out " +
            q(dir / "params.json") + " --history " + q(dir / "history.csv")) != 0) {
    o.error = "learn failed";
    return o;
  }
  const ModelParams fitted = load_params((dir / "params.json").string());
  o.in_boxes = bounds.contains(fitted);

  // (a) 100 steps from the first annotated frame
  const json manifest = json::parse(read_text_file(data / "pairs.json"));
  const double dt = manifest["dt"].get<double>();
  const double width = manifest["interface_width"].get<double>();
  const Mask first = read_mask_png((data / "masks" / mask_file_name(0)).string());
  write_pfs(extract_state(first, fitted, width), dir / "init.pfs");
  if (pflab("simulate --params " + q(dir / "params.json") + " --init " + q(dir / "init.pfs") + " --dt " +
            fmt("%.17g", dt) + " --steps 100 --snapshot-every 100 --out " + q(dir / "sim")) != 0) {
    o.error = "simulate with the fitted parameters failed";
    return o;
  }
  o.mse100 = mean_squared_error(read_pfs(dir / "sim" / snapshot_file_name(100)).eta,
                                read_pfs(data / snapshot_file_name(100)).eta);

  // (b) annotate the first frame through superpixels: select every superpixel
  // touching a void and erase the background part of each selection
  const fs::path frame = data / "frames" / frame_file_name(0);
  if (pflab("segment --image " + q(frame) + " --k 400 --m 10 --iters 10 --out " + q(dir / "sp.json")) != 0) {
    o.error = "segment failed";
    return o;
  }
  const SuperpixelMap map = load_superpixels((dir / "sp.json").string());
  const auto truth0 = first.to_bitmap();
  std::set<std::int32_t> touched;
  for (std::size_t k = 0; k < truth0.size(); ++k) {
    if (truth0[k]) touched.insert(map.labels[k]);
  }
  Annotation ann;
  ann.frame_id = "frame_000000";
  ann.superpixel_ref = content_hash(map);
  ann.selected.assign(touched.begin(), touched.end());
  std::vector<std::uint8_t> erase(truth0.size(), 0);
  for (std::size_t k = 0; k < truth0.size(); ++k) erase[k] = !truth0[k] && touched.count(map.labels[k]);
  ann.erased = Mask::from_bitmap(map.width, map.height, erase);
  ann.author = "acceptance";
  ann.timestamp = "2024-01-01T00:00:00Z";
  save_annotation(ann, (dir / "ann.json").string());

  std::string steps;
  for (long k = 210; k <= 400; k += 10) steps += (steps.empty() ? "" : ",") + std::to_string(k);
  if (pflab("predict --params " + q(dir / "params.json") + " --init-annotation " + q(dir / "ann.json") +
            " --superpixels " + q(dir / "sp.json") + " --dt " + fmt("%.17g", dt) + " --steps " + steps +
            " --threshold 0.5 --out " + q(dir / "pred")) != 0) {
    o.error = "predict failed";
    return o;
  }
  std::string csv;
  if (pflab("metrics --pred " + q(dir / "pred") + " --truth " + q(data / "masks"), &csv) != 0) {
    o.error = "metrics failed";
    return o;
  }
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  o.min_accuracy = 1.0;
  while (std::getline(lines, line)) {
    if (line.rfind("mean,", 0) == 0) continue;
    o.min_accuracy = std::min(o.min_accuracy, std::stod(line.substr(line.rfind(',') + 1)));
    ++o.held_out;
  }
  return o;
}

Verdict criterion_recovery() {
  constexpr double kMseLimit = 2.0 * 3.3e-4;
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const fs::path dir = scratch("recovery");
    const auto t0 = std::chrono::steady_clock::now();
    const SeedOutcome o = recovery_seed(seed, dir);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    fs::remove_all(dir);
    const bool ok = o.error.empty() && o.mse100 <= kMseLimit && o.held_out >= 10 && o.min_accuracy >= 0.96 &&
                    o.in_boxes;
    pass = pass && ok;
    detail += " seed" + std::to_string(seed) + "[";
    if (!o.error.empty()) {
      detail += o.error + "]";
      continue;
    }
    detail += "mse100=" + fmt("%.3e", o.mse100) + " min_acc=" + fmt("%.4f", o.min_accuracy) + " over " +
              std::to_string(o.held_out) + " held-out, in_boxes=" + (o.in_boxes ? "yes" : "no") + ", " +
              fmt("%.0f", secs) + "s]";
    std::cerr << "  recovery seed " << seed << " done\n";
  }
  return {pass, "limits mse<=" + fmt("%.1e", kMseLimit) + " acc>=0.96;" + detail};
}

// --- 2: conservation -------------------------------------------------------

ModelParams closed(ModelParams p) {
  p.P = 0.0;
  p.R = 0.0;
  return p;
}

Verdict criterion_conservation() {
  const ModelParams theta = closed(default_theta_star());
  const SynthOptions opt;
  const PhaseState s0 = extract_state(two_void_mask(1, opt), theta, opt.interface_width);
  const double dt = opt.dt_fraction * stable_dt(theta, opt.dx);
  const Trajectory t = run(s0, theta, dt, 1000, 1000);
  const PhaseState& end = t.snapshots.back().state;
  const double dv = std::abs(mean(end.cv) - mean(s0.cv)) / std::abs(mean(s0.cv));
  const double di = std::abs(mean(end.ci) - mean(s0.ci)) / std::abs(mean(s0.ci));
  return {dv < 1e-10 && di < 1e-10, "relative drift cv=" + fmt("%.2e", dv) + " ci=" + fmt("%.2e", di) + " (< 1e-10)"};
}

// --- 3: energy decay -------------------------------------------------------

Verdict criterion_energy() {
  const ModelParams theta = closed(default_theta_star());
  const SynthOptions opt;
  PhaseState s = extract_state(two_void_mask(1, opt), theta, opt.interface_width);
  const double dt = 0.1 * stable_dt(theta, opt.dx);
  const double e_start = total_free_energy(s, theta);
  double prev = e_start;
  int non_increasing = 0;
  StepWorkspace ws;
  PhaseState next;
  for (int i = 1; i <= 500; ++i) {
    step_into(s, theta, dt, next, ws, i);
    std::swap(s, next);
    const double e = total_free_energy(s, theta);
    if (e <= prev) ++non_increasing;
    prev = e;
  }
  const double frac = non_increasing / 500.0;
  return {frac >= 0.99 && prev < e_start, "non-increasing at " + fmt("%.1f", 100.0 * frac) + "% of steps, F " +
                                              fmt("%.6g", e_start) + " -> " + fmt("%.6g", prev)};
}

// --- 4: gradient oracles ---------------------------------------------------

// Bulk density written out independently in extended precision, so the
// central-difference oracle below is not limited by double rounding.
long double bulk_f_ld(long double cv, long double ci, long double eta, const ModelParams& p) {
  const long double h = (eta - 1) * (eta - 1);
  const long double j = eta * eta;
  const long double fs = p.A_v * (cv - p.cv_eq) * (cv - p.cv_eq) + p.A_i * (ci - p.ci_eq) * (ci - p.ci_eq);
  const long double fv = p.B_v * (cv - 1) * (cv - 1) + p.B_i * ci * ci;
  return h * fs + j * fv;
}

Verdict criterion_gradients() {
  const ModelParams star = default_theta_star();
  const SynthResult data = synth_two_voids(1, star, 30, 10);
  TrainConfig c;
  c.dt = data.trajectory.dt;
  for (std::size_t k = 1; k < data.masks.size(); ++k) c.pairs.push_back({data.masks[0], data.masks[k], 10L * long(k)});
  for (const char* name : kBounded) {
    const std::size_t p = *ModelParams::index_of(name);
    c.bounds.range[p] = std::make_pair(0.8 * star[p], 1.2 * star[p]);
  }
  const LossProblem problem(c);
  std::vector<std::size_t> all(c.pairs.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  std::mt19937_64 rng(2024);

  // near theta*, inside the boxes: total gradient against central differences
  std::uniform_real_distribution<double> near(-0.1, 0.1);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    ModelParams t = star;
    for (std::size_t p = 0; p < kNumParams; ++p) t[p] *= 1.0 + near(rng);
    const Gradient fd = problem.gradient_central_fd(t, all);
    const Gradient ad = problem.gradient_adjoint(t, all);
    for (std::size_t p = 0; p < kNumParams; ++p) {
      if (std::abs(fd[p]) > 1e-10) worst = std::max(worst, std::abs(ad[p] - fd[p]) / std::abs(fd[p]));
    }
  }

  // farther out the hinges are active and their O(100) values quantize a
  // 1e-6 difference of the total; compare the mismatch part instead
  std::uniform_real_distribution<double> far(-0.3, 0.3);
  double worst_far = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    ModelParams t = star;
    for (std::size_t p = 0; p < kNumParams; ++p) t[p] *= 1.0 + far(rng);
    const Gradient ad = problem.gradient_adjoint(t, all);
    for (std::size_t p = 0; p < kNumParams; ++p) {
      double hinge = 0.0;
      if (const auto& r = c.bounds.range[p]) {
        if (t[p] < r->first) hinge = -c.lambda1;
        if (t[p] > r->second) hinge = c.lambda2;
      }
      const double h = std::max(1e-6, 1e-6 * std::abs(t[p]));
      ModelParams a = t;
      ModelParams b = t;
      a[p] += h;
      b[p] -= h;
      const double fd = (problem.loss(a, all).mismatch - problem.loss(b, all).mismatch) / (a[p] - b[p]);
      if (std::abs(fd) > 1e-10) worst_far = std::max(worst_far, std::abs(ad[p] - hinge - fd) / std::abs(fd));
    }
  }

  std::uniform_real_distribution<double> pos(0.05, 3.0);
  std::uniform_real_distribution<double> unit(0.0, 0.4);
  std::uniform_real_distribution<double> x(-0.2, 1.2);
  double worst_bulk = 0.0;
  double worst_f = 0.0;
  const long double h = 1e-6L;
  for (int trial = 0; trial < 1000; ++trial) {
    ModelParams p;
    for (std::size_t i = 0; i < kNumParams; ++i) p[i] = pos(rng);
    p.cv_eq = unit(rng);
    p.ci_eq = unit(rng);
    const double cv = x(rng), ci = x(rng), eta = x(rng);
    const BulkPartials b = bulk_partials(cv, ci, eta, p);
    const long double f0 = bulk_f_ld(cv, ci, eta, p);
    worst_f = std::max(worst_f, static_cast<double>(std::abs(b.f - f0) / std::max(std::abs(f0), 1e-8L)));
    const long double fd[3] = {(bulk_f_ld(cv + h, ci, eta, p) - bulk_f_ld(cv - h, ci, eta, p)) / (2 * h),
                               (bulk_f_ld(cv, ci + h, eta, p) - bulk_f_ld(cv, ci - h, eta, p)) / (2 * h),
                               (bulk_f_ld(cv, ci, eta + h, p) - bulk_f_ld(cv, ci, eta - h, p)) / (2 * h)};
    const double an[3] = {b.df_dcv, b.df_dci, b.df_deta};
    for (int k = 0; k < 3; ++k) {
      worst_bulk = std::max(worst_bulk, static_cast<double>(std::abs(an[k] - fd[k]) / std::max(std::abs(fd[k]), 1e-8L)));
    }
  }
  const bool ok = worst < 1e-3 && worst_far < 1e-3 && worst_bulk < 1e-6 && worst_f < 1e-12;
  return {ok, "adjoint vs central worst rel " + fmt("%.2e", worst) + " near theta*, " + fmt("%.2e", worst_far) +
                  " mismatch part with hinges active (< 1e-3); bulk partials worst rel " + fmt("%.2e", worst_bulk) +
                  " (< 1e-6), f vs independent f " + fmt("%.2e", worst_f)};
}

// --- 5: superpixels --------------------------------------------------------

bool four_connected(const SuperpixelMap& m) {
  std::vector<char> seen(m.labels.size(), 0);
  std::set<int> started;
  for (int start = 0; start < m.width * m.height; ++start) {
    if (seen[start]) continue;
    const int label = m.labels[start];
    if (!started.insert(label).second) return false;  // second component of a label
    std::queue<int> todo;
    todo.push(start);
    seen[start] = 1;
    while (!todo.empty()) {
      const int k = todo.front();
      todo.pop();
      const int px = k % m.width, py = k / m.width;
      const int nb[4][2] = {{px - 1, py}, {px + 1, py}, {px, py - 1}, {px, py + 1}};
      for (const auto& n : nb) {
        if (n[0] < 0 || n[0] >= m.width || n[1] < 0 || n[1] >= m.height) continue;
        const int j = n[1] * m.width + n[0];
        if (!seen[j] && m.labels[j] == label) {
          seen[j] = 1;
          todo.push(j);
        }
      }
    }
  }
  return true;
}

bool partitions(const SuperpixelMap& m) {
  if (m.labels.size() != static_cast<std::size_t>(m.width) * m.height) return false;
  std::vector<char> used(m.n_labels, 0);
  for (int l : m.labels) {
    if (l < 0 || l >= m.n_labels) return false;
    used[l] = 1;
  }
  for (char u : used) {
    if (!u) return false;
  }
  return true;
}

Verdict criterion_superpixels() {
  const int n = 64;
  GrayImage blocks{n, n, std::vector<std::uint8_t>(n * n)};
  const std::uint8_t shade[4] = {25, 95, 165, 235};
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) blocks.pixels[y * n + x] = shade[(y >= n / 2) * 2 + (x >= n / 2)];
  }
  const SuperpixelMap bm = slic_segment(blocks, {4, 40.0, 10});
  auto block_of = [&](int x, int y) { return (y >= n / 2) * 2 + (x >= n / 2); };
  std::map<int, std::array<int, 4>> votes;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) ++votes[bm.at(x, y)][block_of(x, y)];
  }
  // a pixel is cross-block when it lies outside its superpixel's majority block
  std::size_t cross = 0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const auto& v = votes[bm.at(x, y)];
      const int major = static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
      if (block_of(x, y) != major) ++cross;
    }
  }

  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int bad = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int w = 32 + static_cast<int>(rng() % 64);
    const int h = 32 + static_cast<int>(rng() % 64);
    GrayImage img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
    for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng());
    const SlicOptions o{4 + static_cast<int>(rng() % 60), 1.0 + 40.0 * u(rng), 10};
    const SuperpixelMap a = slic_segment(img, o);
    const SuperpixelMap b = slic_segment(img, o);
    if (!(a == b) || !partitions(a) || !four_connected(a)) ++bad;
  }
  return {cross == 0 && bad == 0, "quadrant cross-block pixels=" + std::to_string(cross) +
                                      "; random images failing partition/connectivity/determinism=" +
                                      std::to_string(bad) + "/50"};
}

// --- 6: annotation algebra -------------------------------------------------

Verdict criterion_annotation() {
  std::mt19937_64 rng(31337);
  const fs::path dir = scratch("annot");
  int compose_bad = 0, iou_bad = 0, bytes_bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 16 + static_cast<int>(rng() % 48);
    const int h = 16 + static_cast<int>(rng() % 48);
    GrayImage img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
    for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng());
    const SuperpixelMap map = slic_segment(img, {4 + static_cast<int>(rng() % 30), 10.0, 5});
    Annotation a;
    a.frame_id = "f" + std::to_string(trial);
    a.superpixel_ref = content_hash(map);
    for (int l = 0; l < map.n_labels; ++l) {
      if (rng() % 2) a.selected.push_back(l);
    }
    std::vector<std::uint8_t> er(static_cast<std::size_t>(w) * h);
    for (auto& v : er) v = rng() % 5 == 0;
    a.erased = Mask::from_bitmap(w, h, er);
    a.author = "a";
    a.timestamp = "2024-02-02T02:02:02Z";

    const std::set<std::int32_t> sel(a.selected.begin(), a.selected.end());
    const auto got = compose_mask(map, a).to_bitmap();
    std::vector<std::uint8_t> expect(got.size());
    for (std::size_t k = 0; k < got.size(); ++k) expect[k] = sel.count(map.labels[k]) && !er[k];
    if (got != expect) ++compose_bad;

    std::vector<std::uint8_t> other(got.size());
    for (auto& v : other) v = rng() % 3 == 0;
    std::size_t inter = 0, uni = 0;
    for (std::size_t k = 0; k < got.size(); ++k) {
      inter += expect[k] && other[k];
      uni += expect[k] || other[k];
    }
    const double brute = uni == 0 ? 1.0 : double(inter) / double(uni);
    if (iou(Mask::from_bitmap(w, h, expect), Mask::from_bitmap(w, h, other)) != brute) ++iou_bad;

    save_annotation(a, (dir / "one.json").string());
    save_annotation(load_annotation((dir / "one.json").string(), &map), (dir / "two.json").string());
    if (read_file_bytes(dir / "one.json") != read_file_bytes(dir / "two.json")) ++bytes_bad;
  }
  fs::remove_all(dir);
  return {compose_bad == 0 && iou_bad == 0 && bytes_bad == 0,
          "mismatches over 100 triples: compose=" + std::to_string(compose_bad) + " iou=" + std::to_string(iou_bad) +
              " save/load/save=" + std::to_string(bytes_bad)};
}

// --- 7: service and command-line artifacts agree -----------------------------

Verdict criterion_parity() {
  const fs::path root = scratch("parity");
  std::string why;
  auto same_file = [&](const fs::path& a, const fs::path& b) {
    if (!fs::exists(a) || !fs::exists(b) || read_file_bytes(a) != read_file_bytes(b)) {
      why += " differs:" + b.filename().string();
      return false;
    }
    return true;
  };

  if (pflab("synth --out " + q(root) + " --seed 4 --steps 60 --snapshot-every 10 --pairs 4") != 0) {
    return {false, "synth failed"};
  }
  const json manifest = json::parse(read_text_file(root / "pairs.json"));
  const double dt = manifest["dt"].get<double>();
  write_text_file(root / "bounds.json", R"({"M_v": [0.5, 1.5], "L": [0.5, 1.5], "kappa_eta": [1, 3]})" "\n");

  // command-line twins
  const fs::path cli = scratch("parity-cli");
  const bool cli_ok =
      pflab("learn --data " + q(root) + " --bounds " + q(root / "bounds.json") + " --lambda1 100 --lambda2 100" +
            " --lr 0.02 --iters 15 --grad central_fd --seed 9 --out " + q(cli / "params.json") + " --history " +
            q(cli / "history.csv")) == 0 &&
      pflab("simulate --params " + q(root / "theta_star.json") + " --init " + q(root / snapshot_file_name(0)) +
            " --dt " + fmt("%.17g", dt) + " --steps 40 --snapshot-every 20 --out " + q(cli / "sim")) == 0 &&
      pflab("render --traj " + q(cli / "sim") + " --channel eta --out " + q(cli / "sim/frames")) == 0;
  if (!cli_ok) return {false, "command-line run failed"};

  Service service({root, 1});
  const int port = service.bind_any("127.0.0.1");
  if (port < 0) return {false, "cannot bind"};
  std::thread server([&] { service.serve(); });
  service.wait_until_ready();
  httplib::Client http("127.0.0.1", port);
  http.set_read_timeout(600, 0);

  json learn = manifest;
  learn["bounds"] = json::parse(read_text_file(root / "bounds.json"));
  learn["lambda1"] = 100.0;
  learn["lambda2"] = 100.0;
  learn["learning_rate"] = 0.02;
  learn["iterations"] = 15;
  learn["gradient_mode"] = "central_fd";
  learn["seed"] = 9;
  json sim = {{"theta", json::parse(read_text_file(root / "theta_star.json"))},
              {"init", snapshot_file_name(0)},
              {"dt", dt},
              {"n_steps", 40},
              {"snapshot_every", 20}};

  auto wait = [&](const std::string& kind, const json& body) -> std::string {
    auto r = http.Post("/api/jobs/" + kind, body.dump(), "application/json");
    if (!r || r->status != 202) {
      why += " " + kind + " rejected";
      return "";
    }
    const std::string id = json::parse(r->body)["job_id"];
    for (;;) {
      auto j = json::parse(http.Get("/api/jobs/" + id)->body);
      if (j["status"] == "done") return id;
      if (j["status"] == "failed") {
        why += " " + kind + " failed: " + j["error"].get<std::string>();
        return "";
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
  };
  const std::string learn_id = wait("learn", learn);
  const std::string sim_id = wait("simulate", sim);
  bool frames_ok = !sim_id.empty();
  if (frames_ok) {
    for (long k : {0L, 20L, 40L}) {
      auto r = http.Get("/api/results/" + sim_id + "/frame/" + std::to_string(k) + ".png");
      const auto expect = read_file_bytes(cli / "sim/frames" / frame_file_name(k));
      if (!r || r->status != 200 || r->body != std::string(expect.begin(), expect.end())) {
        frames_ok = false;
        why += " served frame " + std::to_string(k) + " differs";
      }
    }
  }
  service.stop();
  server.join();

  bool ok = !learn_id.empty() && !sim_id.empty() && frames_ok;
  if (!learn_id.empty()) {
    const fs::path job = root / "jobs" / learn_id;
    ok = same_file(cli / "params.json", job / "params.json") && ok;
    ok = same_file(cli / "history.csv", job / "history.csv") && ok;
  }
  if (!sim_id.empty()) {
    const fs::path job = root / "jobs" / sim_id;
    for (const char* f : {"trajectory.json", "state_000000.pfs", "state_000020.pfs", "state_000040.pfs"}) {
      ok = same_file(cli / "sim" / f, job / f) && ok;
    }
  }
  fs::remove_all(root);
  fs::remove_all(cli);
  return {ok, ok ? "learn (params.json, history.csv) and simulate (states, manifest, frames) byte-identical"
                 : "mismatch:" + why};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"synthetic parameter recovery", criterion_recovery},
      {"conservation without sources", criterion_conservation},
      {"energy decay", criterion_energy},
      {"gradient oracles", criterion_gradients},
      {"superpixel validity and purity", criterion_superpixels},
      {"annotation algebra", criterion_annotation},
      {"service and command-line parity", criterion_parity},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(number)) continue;
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s AC%d %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", number, criteria[i].first.c_str(),
                v.detail.c_str(), secs);
    std::fflush(stdout);
    if (!v.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
