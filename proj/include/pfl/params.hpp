#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "json.hpp"

namespace pfl {

inline constexpr std::size_t kNumParams = 14;

// The 14 scalar model parameters. Order here is the canonical order for
// gradients, JSON output and CSV columns.
struct ModelParams {
  double M_v = 0.0;        // vacancy diffusivity
  double M_i = 0.0;        // interstitial diffusivity
  double L = 0.0;          // order-parameter mobility
  double kappa_v = 0.0;
  double kappa_i = 0.0;
  double kappa_eta = 0.0;
  double A_v = 0.0;        // solid-well curvatures
  double A_i = 0.0;
  double B_v = 0.0;        // void-well curvatures
  double B_i = 0.0;
  double cv_eq = 0.0;      // solid equilibrium concentrations
  double ci_eq = 0.0;
  double R = 0.0;          // recombination rate
  double P = 0.0;          // generation rate

  static const std::array<std::string_view, kNumParams>& names();
  static std::optional<std::size_t> index_of(std::string_view name);

  double& operator[](std::size_t i);
  double operator[](std::size_t i) const;

  std::array<double, kNumParams> to_array() const;
  static ModelParams from_array(const std::array<double, kNumParams>& a);

  bool all_finite() const;

  // Physical range of parameter i: every coefficient is non-negative and the
  // equilibrium concentrations lie in [0, 1].
  static std::pair<double, double> domain(std::size_t i);
  bool in_domain() const;
  ModelParams clamped_to_domain() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Optional closed interval per parameter.
struct ParamBounds {
  std::array<std::optional<std::pair<double, double>>, kNumParams> range{};

  std::size_t bounded_count() const;
  bool contains(const ModelParams& theta) const;
};

class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Parse errors become SchemaError naming the file.
nlohmann::json read_json_file(const std::string& file);

nlohmann::ordered_json to_json(const ModelParams& theta);
ModelParams params_from_json(const nlohmann::json& j, const std::string& path = "theta");

nlohmann::ordered_json to_json(const ParamBounds& bounds);
ParamBounds bounds_from_json(const nlohmann::json& j, const std::string& path = "bounds");

ModelParams load_params(const std::string& file);
void save_params(const ModelParams& theta, const std::string& file);
ParamBounds load_bounds(const std::string& file);
void save_bounds(const ParamBounds& bounds, const std::string& file);

}  // namespace pfl
