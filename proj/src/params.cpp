#include "pfl/params.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <sstream>

namespace pfl {

namespace {

using Member = double ModelParams::*;

constexpr std::array<Member, kNumParams> kMembers = {
    &ModelParams::M_v,     &ModelParams::M_i,   &ModelParams::L,     &ModelParams::kappa_v,
    &ModelParams::kappa_i, &ModelParams::kappa_eta, &ModelParams::A_v, &ModelParams::A_i,
    &ModelParams::B_v,     &ModelParams::B_i,   &ModelParams::cv_eq, &ModelParams::ci_eq,
    &ModelParams::R,       &ModelParams::P};

void write_text(const std::string& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file);
  out << text;
}

}  // namespace

nlohmann::json read_json_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(file, e.what());
  }
}

const std::array<std::string_view, kNumParams>& ModelParams::names() {
  static constexpr std::array<std::string_view, kNumParams> kNames = {
      "M_v", "M_i", "L",   "kappa_v", "kappa_i", "kappa_eta", "A_v",
      "A_i", "B_v", "B_i", "cv_eq",   "ci_eq",   "R",         "P"};
  return kNames;
}

std::optional<std::size_t> ModelParams::index_of(std::string_view name) {
  const auto& n = names();
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (n[i] == name) return i;
  }
  return std::nullopt;
}

double& ModelParams::operator[](std::size_t i) { return this->*kMembers.at(i); }
double ModelParams::operator[](std::size_t i) const { return this->*kMembers.at(i); }

std::array<double, kNumParams> ModelParams::to_array() const {
  std::array<double, kNumParams> a{};
  for (std::size_t i = 0; i < kNumParams; ++i) a[i] = (*this)[i];
  return a;
}

ModelParams ModelParams::from_array(const std::array<double, kNumParams>& a) {
  ModelParams p;
  for (std::size_t i = 0; i < kNumParams; ++i) p[i] = a[i];
  return p;
}

bool ModelParams::all_finite() const {
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (!std::isfinite((*this)[i])) return false;
  }
  return true;
}

std::size_t ParamBounds::bounded_count() const {
  std::size_t n = 0;
  for (const auto& r : range) n += r.has_value() ? 1 : 0;
  return n;
}

bool ParamBounds::contains(const ModelParams& theta) const {
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (range[i] && (theta[i] < range[i]->first || theta[i] > range[i]->second)) return false;
  }
  return true;
}

nlohmann::ordered_json to_json(const ModelParams& theta) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < kNumParams; ++i) j[std::string(ModelParams::names()[i])] = theta[i];
  return j;
}

std::pair<double, double> ModelParams::domain(std::size_t i) {
  if (i == 10 || i == 11) return {0.0, 1.0};
  return {0.0, std::numeric_limits<double>::infinity()};
}

bool ModelParams::in_domain() const {
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto [lo, hi] = domain(i);
    if (!((*this)[i] >= lo && (*this)[i] <= hi)) return false;
  }
  return true;
}

ModelParams ModelParams::clamped_to_domain() const {
  ModelParams p = *this;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto [lo, hi] = domain(i);
    p[i] = std::clamp(p[i], lo, hi);
  }
  return p;
}

ModelParams params_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  ModelParams p;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const std::string key(ModelParams::names()[i]);
    const std::string field = path + "." + key;
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(field, "missing");
    if (!it->is_number()) throw SchemaError(field, "expected a number");
    p[i] = it->get<double>();
    if (!std::isfinite(p[i])) throw SchemaError(field, "not finite");
    const auto [lo, hi] = ModelParams::domain(i);
    if (p[i] < lo || p[i] > hi) throw SchemaError(field, "outside the physical range");
  }
  for (const auto& [key, value] : j.items()) {
    if (!ModelParams::index_of(key)) throw SchemaError(path + "." + key, "unknown parameter");
  }
  return p;
}

nlohmann::ordered_json to_json(const ParamBounds& bounds) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (bounds.range[i]) {
      j[std::string(ModelParams::names()[i])] = {bounds.range[i]->first, bounds.range[i]->second};
    }
  }
  return j;
}

ParamBounds bounds_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  ParamBounds b;
  for (const auto& [key, value] : j.items()) {
    const std::string field = path + "." + key;
    auto idx = ModelParams::index_of(key);
    if (!idx) throw SchemaError(field, "unknown parameter");
    if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number()) {
      throw SchemaError(field, "expected [min, max]");
    }
    double lo = value[0].get<double>();
    double hi = value[1].get<double>();
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw SchemaError(field, "bounds must be finite");
    if (lo > hi) throw SchemaError(field, "min exceeds max");
    b.range[*idx] = std::make_pair(lo, hi);
  }
  return b;
}

ModelParams load_params(const std::string& file) { return params_from_json(read_json_file(file)); }

void save_params(const ModelParams& theta, const std::string& file) {
  write_text(file, to_json(theta).dump(2) + "\n");
}

ParamBounds load_bounds(const std::string& file) { return bounds_from_json(read_json_file(file)); }

void save_bounds(const ParamBounds& bounds, const std::string& file) {
  write_text(file, to_json(bounds).dump(2) + "\n");
}

}  // namespace pfl
