#include "pfl/extract.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pfl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1-D squared distance transform of a sampled function (Felzenszwalb and
// Huttenlocher). f holds 0 at sites and +inf elsewhere, or a column
// result from the previous pass.
void dt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[static_cast<std::size_t>(q)] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s;
    for (;;) {
      const int p = v[static_cast<std::size_t>(k)];
      s = ((f[static_cast<std::size_t>(q)] + static_cast<double>(q) * q) -
           (f[static_cast<std::size_t>(p)] + static_cast<double>(p) * p)) /
          (2.0 * (q - p));
      if (s <= z[static_cast<std::size_t>(k)] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(j) + 1] < q) ++j;
    const int p = v[static_cast<std::size_t>(j)];
    const double diff = q - p;
    d[static_cast<std::size_t>(q)] = diff * diff + f[static_cast<std::size_t>(p)];
  }
}

}  // namespace

std::vector<double> squared_distance_transform(int width, int height, std::span<const std::uint8_t> target) {
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (target.size() != n) throw DimensionMismatchError("distance transform input size mismatch");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = target[i] ? 0.0 : kInf;

  {
    std::vector<double> f(static_cast<std::size_t>(height)), d(f.size()), z(f.size() + 1);
    std::vector<int> v(f.size());
    for (int x = 0; x < width; ++x) {
      for (int y = 0; y < height; ++y) f[static_cast<std::size_t>(y)] = out[static_cast<std::size_t>(y) * width + x];
      dt_1d(f, d, v, z);
      for (int y = 0; y < height; ++y) out[static_cast<std::size_t>(y) * width + x] = d[static_cast<std::size_t>(y)];
    }
  }
  {
    std::vector<double> f(static_cast<std::size_t>(width)), d(f.size()), z(f.size() + 1);
    std::vector<int> v(f.size());
    for (int y = 0; y < height; ++y) {
      double* row = out.data() + static_cast<std::size_t>(y) * width;
      std::copy(row, row + width, f.begin());
      dt_1d(f, d, v, z);
      std::copy(d.begin(), d.end(), row);
    }
  }
  return out;
}

std::vector<double> signed_distance(const Mask& mask) {
  const std::vector<std::uint8_t> inside = mask.to_bitmap();
  std::vector<std::uint8_t> outside(inside.size());
  for (std::size_t i = 0; i < inside.size(); ++i) outside[i] = inside[i] ? 0 : 1;
  const auto to_outside = squared_distance_transform(mask.width(), mask.height(), outside);
  const auto to_inside = squared_distance_transform(mask.width(), mask.height(), inside);
  std::vector<double> d(inside.size());
  for (std::size_t i = 0; i < inside.size(); ++i) {
    d[i] = inside[i] ? std::sqrt(to_outside[i]) - 0.5 : -(std::sqrt(to_inside[i]) - 0.5);
  }
  return d;
}

ScalarField order_parameter_from_mask(const Mask& mask, double interface_width, double dx) {
  if (!(interface_width > 0.0)) throw std::invalid_argument("interface_width must be positive");
  ScalarField eta(mask.width(), mask.height(), dx);
  const auto d = signed_distance(mask);
  auto v = eta.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    // d is in pixels; tanh(+-inf) gives exactly 0 or 1 for empty or full masks
    v[i] = 0.5 * (1.0 + std::tanh(d[i] * dx / interface_width));
  }
  return eta;
}

PhaseState state_from_eta(const ScalarField& eta, const ModelParams& theta) {
  PhaseState s{ScalarField(eta.width(), eta.height(), eta.dx()), ScalarField(eta.width(), eta.height(), eta.dx()),
               eta, 0.0};
  auto e = eta.values();
  auto cv = s.cv.values();
  auto ci = s.ci.values();
  for (std::size_t i = 0; i < e.size(); ++i) {
    cv[i] = theta.cv_eq + (1.0 - theta.cv_eq) * e[i];
    ci[i] = theta.ci_eq * (1.0 - e[i]);
  }
  return s;
}

PhaseState extract_state(const Mask& mask, const ModelParams& theta, double interface_width, double dx) {
  return state_from_eta(order_parameter_from_mask(mask, interface_width, dx), theta);
}

}  // namespace pfl
