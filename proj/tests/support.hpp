#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "pfl/extract.hpp"
#include "pfl/grid.hpp"
#include "pfl/sim.hpp"

namespace fs = std::filesystem;

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("pfl-" + tag + "-" + std::to_string(rd()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline pfl::ScalarField random_field(int w, int h, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0,
                                     double dx = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  pfl::ScalarField f(w, h, dx);
  for (double& v : f.values()) v = u(rng);
  return f;
}

// Random mask with roughly `density` foreground.
inline pfl::Mask random_mask(int w, int h, std::mt19937_64& rng, double density = 0.5) {
  std::bernoulli_distribution b(density);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h);
  for (auto& v : bits) v = b(rng) ? 1 : 0;
  return pfl::Mask::from_bitmap(w, h, bits);
}

inline pfl::Mask disk_mask(int w, int h, double cx, double cy, double r) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      bits[static_cast<std::size_t>(y) * w + x] = dx * dx + dy * dy <= r * r ? 1 : 0;
    }
  }
  return pfl::Mask::from_bitmap(w, h, bits);
}

// Small two-void state for fast kernel tests.
inline pfl::PhaseState small_two_void(const pfl::ModelParams& theta, int n = 48) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(n) * n, 0);
  const pfl::Mask a = disk_mask(n, n, n * 0.3, n * 0.35, n * 0.12);
  const pfl::Mask b = disk_mask(n, n, n * 0.68, n * 0.62, n * 0.2);
  auto ba = a.to_bitmap();
  auto bb = b.to_bitmap();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = ba[i] | bb[i];
  return pfl::extract_state(pfl::Mask::from_bitmap(n, n, bits), theta, 2.0);
}

}  // namespace testing
