#include "pfl/learn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pfl/extract.hpp"
#include "pfl/sim.hpp"

namespace pfl {

GradientMode gradient_mode_from_string(const std::string& s) {
  if (s == "central_fd") return GradientMode::central_fd;
  if (s == "adjoint") return GradientMode::adjoint;
  throw std::invalid_argument("unknown gradient mode '" + s + "' (expected central_fd or adjoint)");
}

std::string to_string(GradientMode mode) { return mode == GradientMode::adjoint ? "adjoint" : "central_fd"; }

void TrainConfig::validate() const {
  if (pairs.empty()) throw SchemaError("pairs", "must not be empty");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].steps < 1) throw SchemaError("pairs[" + std::to_string(i) + "].steps", "must be >= 1");
  }
  if (!std::isfinite(lambda1) || lambda1 < 0.0) throw SchemaError("lambda1", "must be finite and >= 0");
  if (!std::isfinite(lambda2) || lambda2 < 0.0) throw SchemaError("lambda2", "must be finite and >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw SchemaError("learning_rate", "must be > 0");
  if (iterations < 0) throw SchemaError("iterations", "must be >= 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw SchemaError("dt", "must be > 0");
  if (!(interface_width > 0.0)) throw SchemaError("interface_width", "must be > 0");
  if (!(dx > 0.0)) throw SchemaError("dx", "must be > 0");
  if (batch_size < 0) throw SchemaError("batch_size", "must be >= 0");
}

std::pair<double, double> bound_penalties(const ModelParams& theta, const ParamBounds& bounds, double lambda1,
                                          double lambda2) {
  double lo = 0.0;
  double hi = 0.0;
  for (std::size_t p = 0; p < kNumParams; ++p) {
    if (!bounds.range[p]) continue;
    lo += std::max(0.0, bounds.range[p]->first - theta[p]);
    hi += std::max(0.0, theta[p] - bounds.range[p]->second);
  }
  return {lambda1 * lo, lambda2 * hi};
}

double mean_squared_error(const ScalarField& a, const ScalarField& b) {
  if (a.width() != b.width() || a.height() != b.height()) throw DimensionMismatchError("field shapes differ");
  const int w = a.width();
  const double* av = a.values().data();
  const double* bv = b.values().data();
  const double s = ordered_row_sum(a.height(), [&](int y) {
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      const std::size_t k = static_cast<std::size_t>(y) * w + x;
      const double d = av[k] - bv[k];
      row += d * d;
    }
    return row;
  });
  return s / static_cast<double>(a.size());
}

LossProblem::LossProblem(const TrainConfig& config) : config_(config) {
  config_.validate();
  pairs_.reserve(config_.pairs.size());
  int w = -1;
  int h = -1;
  auto check_dims = [&](int fw, int fh, std::size_t i) {
    if (w < 0) {
      w = fw;
      h = fh;
    } else if (fw != w || fh != h) {
      throw DimensionMismatchError("pair " + std::to_string(i) + " has different frame dimensions");
    }
  };
  for (std::size_t i = 0; i < config_.pairs.size(); ++i) {
    const TrainPair& tp = config_.pairs[i];
    Prepared p;
    p.steps = tp.steps;
    if (const Mask* m = std::get_if<Mask>(&tp.init)) {
      p.init_from_mask = true;
      p.init_eta = order_parameter_from_mask(*m, config_.interface_width, config_.dx);
      check_dims(m->width(), m->height(), i);
    } else {
      p.init_state = std::get<PhaseState>(tp.init);
      p.init_state.validate();
      check_dims(p.init_state.width(), p.init_state.height(), i);
    }
    if (const Mask* m = std::get_if<Mask>(&tp.target)) {
      p.target_eta = order_parameter_from_mask(*m, config_.interface_width, config_.dx);
      check_dims(m->width(), m->height(), i);
    } else {
      p.target_eta = std::get<PhaseState>(tp.target).eta;
      check_dims(p.target_eta.width(), p.target_eta.height(), i);
    }
    p.group = i;
    for (std::size_t j = 0; j < i; ++j) {
      if (pairs_[j].group == j && tp.init == config_.pairs[j].init) {
        p.group = j;
        break;
      }
    }
    pairs_.push_back(std::move(p));
  }
}

std::vector<LossProblem::RunGroup> LossProblem::group_subset(const std::vector<std::size_t>& subset) const {
  std::vector<RunGroup> groups;
  for (std::size_t pos = 0; pos < subset.size(); ++pos) {
    const Prepared& p = pairs_.at(subset[pos]);
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const RunGroup& g) { return pairs_[g.init_pair].group == p.group; });
    if (it == groups.end()) {
      groups.push_back({subset[pos], {}, 0});
      it = groups.end() - 1;
    }
    it->members.push_back(pos);
    it->max_steps = std::max(it->max_steps, p.steps);
  }
  for (RunGroup& g : groups) {
    std::stable_sort(g.members.begin(), g.members.end(), [&](std::size_t a, std::size_t b) {
      return pairs_[subset[a]].steps < pairs_[subset[b]].steps;
    });
  }
  return groups;
}

std::vector<std::size_t> LossProblem::all_pairs() const {
  std::vector<std::size_t> idx(pairs_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

PhaseState LossProblem::initial_state(std::size_t pair, const ModelParams& theta) const {
  const Prepared& p = pairs_.at(pair);
  if (p.init_from_mask) return state_from_eta(p.init_eta, theta);
  return p.init_state;
}

double LossProblem::mismatch(const ModelParams& theta, const std::vector<std::size_t>& subset) const {
  StepWorkspace ws;
  std::vector<double> per_pair(subset.size(), 0.0);
  for (const RunGroup& g : group_subset(subset)) {
    PhaseState cur = initial_state(g.init_pair, theta);
    PhaseState next;
    std::size_t m = 0;
    for (long s = 0;; ++s) {
      for (; m < g.members.size() && pairs_[subset[g.members[m]]].steps == s; ++m) {
        per_pair[g.members[m]] = mean_squared_error(cur.eta, pairs_[subset[g.members[m]]].target_eta);
      }
      if (s == g.max_steps) break;
      step_into(cur, theta, config_.dt, next, ws, s + 1);
      std::swap(cur, next);
    }
  }
  double total = 0.0;
  for (double v : per_pair) total += v;
  return total / static_cast<double>(subset.size());
}

LossReport LossProblem::loss(const ModelParams& theta) const { return loss(theta, all_pairs()); }

LossReport LossProblem::loss(const ModelParams& theta, const std::vector<std::size_t>& subset) const {
  if (!theta.all_finite()) return LossReport::divergence();
  LossReport r;
  try {
    r.mismatch = mismatch(theta, subset);
  } catch (const DivergedError&) {
    return LossReport::divergence();
  }
  std::tie(r.penalty_lo, r.penalty_hi) = bound_penalties(theta, config_.bounds, config_.lambda1, config_.lambda2);
  r.total = r.mismatch + r.penalty_lo + r.penalty_hi;
  if (!std::isfinite(r.total)) return LossReport::divergence();
  return r;
}

Gradient LossProblem::gradient(const ModelParams& theta) const { return gradient(theta, all_pairs()); }

Gradient LossProblem::gradient(const ModelParams& theta, const std::vector<std::size_t>& subset) const {
  return config_.gradient_mode == GradientMode::adjoint ? gradient_adjoint(theta, subset)
                                                        : gradient_central_fd(theta, subset);
}

Gradient LossProblem::gradient_central_fd(const ModelParams& theta, const std::vector<std::size_t>& subset) const {
  Gradient g{};
  for (std::size_t p = 0; p < kNumParams; ++p) {
    const double h = std::max(1e-6, 1e-6 * std::abs(theta[p]));
    ModelParams plus = theta;
    ModelParams minus = theta;
    plus[p] += h;
    minus[p] -= h;
    const LossReport lp = loss(plus, subset);
    const LossReport lm = loss(minus, subset);
    if (lp.diverged || lm.diverged) {
      throw GradientUnavailable(p, "loss diverges near " + std::string(ModelParams::names()[p]));
    }
    // (plus - minus) is the step actually taken after rounding
    g[p] = (lp.total - lm.total) / (plus[p] - minus[p]);
  }
  return g;
}

LossReport loss(const ModelParams& theta, const TrainConfig& config) { return LossProblem(config).loss(theta); }

Gradient grad(const ModelParams& theta, const TrainConfig& config) { return LossProblem(config).gradient(theta); }

ModelParams default_initialization(const ParamBounds& bounds) {
  ModelParams p;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    p[i] = bounds.range[i] ? 0.5 * (bounds.range[i]->first + bounds.range[i]->second) : 1.0;
  }
  return p;
}

FitResult fit(const TrainConfig& config, const ModelParams& theta_init, const FitProgressFn& progress) {
  constexpr int kMaxHalvings = 6;
  constexpr int kMaxDivergedIterations = 10;
  constexpr double kRmsDecay = 0.9;
  constexpr double kRmsEps = 1e-12;

  const LossProblem problem(config);
  const bool batching = config.batch_size > 0 && static_cast<std::size_t>(config.batch_size) < problem.pair_count();
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(problem.pair_count());
  std::iota(order.begin(), order.end(), std::size_t{0});

  FitResult result;
  result.theta = theta_init;
  LossReport current = problem.loss(theta_init);
  if (current.diverged) throw AbortedError("loss is not finite at the initial parameters");
  result.history.push_back(current);
  if (progress) progress(0, config.iterations, current);

  Gradient mean_sq{};
  bool have_mean_sq = false;
  double scale = 1.0;
  int diverged_streak = 0;

  for (long it = 1; it <= config.iterations; ++it) {
    std::vector<std::size_t> subset = order;
    if (batching) {
      std::shuffle(order.begin(), order.end(), rng);
      subset.assign(order.begin(), order.begin() + config.batch_size);
      std::sort(subset.begin(), subset.end());
    }

    LossReport base = current;
    Gradient g{};
    try {
      if (config.gradient_mode == GradientMode::adjoint) {
        g = problem.gradient_adjoint(result.theta, subset, &base);
      } else {
        if (batching) base = problem.loss(result.theta, subset);
        g = problem.gradient_central_fd(result.theta, subset);
      }
    } catch (const GradientUnavailable&) {
      scale *= 0.5;
      if (++diverged_streak >= kMaxDivergedIterations) {
        throw AbortedError("gradient unavailable for " + std::to_string(diverged_streak) + " consecutive iterations");
      }
      result.history.push_back(current);
      if (progress) progress(it, config.iterations, current);
      continue;
    }

    Gradient dir = g;
    if (config.normalize_gradient) {
      for (std::size_t p = 0; p < kNumParams; ++p) {
        mean_sq[p] = have_mean_sq ? kRmsDecay * mean_sq[p] + (1.0 - kRmsDecay) * g[p] * g[p] : g[p] * g[p];
        dir[p] = g[p] / (std::sqrt(mean_sq[p]) + kRmsEps);
      }
      have_mean_sq = true;
    }

    bool accepted = false;
    bool any_diverged = false;
    ModelParams candidate;
    LossReport trial;
    auto line_search = [&] {
      for (int attempt = 0; attempt <= kMaxHalvings; ++attempt) {
        candidate = result.theta;
        for (std::size_t p = 0; p < kNumParams; ++p) candidate[p] -= scale * config.learning_rate * dir[p];
        candidate = candidate.clamped_to_domain();
        trial = problem.loss(candidate, subset);
        if (!trial.diverged && trial.total <= base.total) {
          accepted = true;
          return;
        }
        any_diverged = any_diverged || trial.diverged;
        if (attempt < kMaxHalvings) scale *= 0.5;
      }
    };
    line_search();
    if (!accepted) {
      // A normalized component resting on its bound and pushed outward
      // makes every trial pay the hinge. Hold those still and retry.
      bool froze = false;
      for (std::size_t p = 0; p < kNumParams; ++p) {
        const auto& r = config.bounds.range[p];
        if (!r) continue;
        const bool out_lo = dir[p] > 0.0 && result.theta[p] - config.learning_rate * dir[p] < r->first;
        const bool out_hi = dir[p] < 0.0 && result.theta[p] - config.learning_rate * dir[p] > r->second;
        if ((out_lo && result.theta[p] >= r->first) || (out_hi && result.theta[p] <= r->second)) {
          dir[p] = 0.0;
          froze = true;
        }
      }
      if (froze) {
        scale = 1.0;
        line_search();
      }
    }

    if (accepted) {
      result.theta = candidate;
      current = trial;
      diverged_streak = 0;
      scale = std::min(1.0, scale * 1.25);
    } else {
      diverged_streak = any_diverged ? diverged_streak + 1 : 0;
      // Every halving failed; start the next iteration from the full rate.
      scale = 1.0;
      if (diverged_streak >= kMaxDivergedIterations) {
        throw AbortedError("loss diverged for " + std::to_string(diverged_streak) +
                           " consecutive iterations after learning-rate halving");
      }
      if (batching) current = base;
    }
    result.history.push_back(current);
    if (progress) progress(it, config.iterations, current);
  }
  return result;
}

std::vector<Mask> predict_masks(const PhaseState& state0, const ModelParams& theta, double dt,
                                const std::vector<long>& step_list, double threshold_t) {
  for (std::size_t i = 0; i < step_list.size(); ++i) {
    if (step_list[i] < 0 || (i > 0 && step_list[i] <= step_list[i - 1])) {
      throw std::invalid_argument("step list must be non-negative and strictly increasing");
    }
  }
  std::vector<Mask> out;
  out.reserve(step_list.size());
  StepWorkspace ws;
  PhaseState cur = state0;
  PhaseState next;
  long done = 0;
  for (long target : step_list) {
    while (done < target) {
      step_into(cur, theta, dt, next, ws, done + 1);
      std::swap(cur, next);
      ++done;
    }
    out.push_back(threshold(cur.eta, threshold_t));
  }
  return out;
}

double pixel_accuracy(const Mask& a, const Mask& b) {
  const std::size_t both = intersection_count(a, b);
  const double n = static_cast<double>(a.width()) * a.height();
  const double disagree = static_cast<double>(a.count() + b.count() - 2 * both);
  return (n - disagree) / n;
}

}  // namespace pfl
