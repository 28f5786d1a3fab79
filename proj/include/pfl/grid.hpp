#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pfl {

class DimensionMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Periodic 2-D field of doubles, row-major. x is the column, y the row.
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(int width, int height, double dx, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  double dx() const { return dx_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(int x, int y) { return values_[index(x, y)]; }
  double operator()(int x, int y) const { return values_[index(x, y)]; }

  // Periodic access; x and y may be any integer.
  double wrapped(int x, int y) const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool same_shape(const ScalarField& other) const {
    return width_ == other.width_ && height_ == other.height_ && dx_ == other.dx_;
  }

  friend bool operator==(const ScalarField&, const ScalarField&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  double dx_ = 1.0;
  std::vector<double> values_;
};

struct Run {
  int row = 0;
  int start = 0;
  int length = 0;
  friend bool operator==(const Run&, const Run&) = default;
};

// Binary pixel set stored as canonical runs: sorted by (row, start),
// disjoint, and maximal (no two runs in a row touch).
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height) : width_(width), height_(height) {}

  // Validates bounds and overlap; merges touching runs.
  static Mask from_runs(int width, int height, std::vector<Run> runs);
  // bitmap is row-major, nonzero = foreground.
  static Mask from_bitmap(int width, int height, std::span<const std::uint8_t> bitmap);

  std::vector<std::uint8_t> to_bitmap() const;

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<Run>& runs() const { return runs_; }
  std::size_t count() const;
  bool empty() const { return runs_.empty(); }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Run> runs_;
};

void require_same_dims(const Mask& a, const Mask& b);

// 5-point periodic Laplacian. Rows are processed in parallel; each output
// value depends only on its stencil, so results do not depend on threading.
ScalarField laplacian(const ScalarField& f);
void laplacian_into(const ScalarField& f, ScalarField& out);

// Sum with a fixed order: each row summed left to right, then row sums
// accumulated top to bottom.
double sum(const ScalarField& f);
double mean(const ScalarField& f);

Mask threshold(const ScalarField& f, double t);

// Pixels set in both masks, by merging the run lists.
std::size_t intersection_count(const Mask& a, const Mask& b);

// Sum of per-row partial sums in row order. row_fn(y) returns the
// contribution of row y; rows may be evaluated concurrently.
template <typename RowFn>
double ordered_row_sum(int height, RowFn&& row_fn) {
  std::vector<double> partial(static_cast<std::size_t>(height));
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) partial[static_cast<std::size_t>(y)] = row_fn(y);
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace pfl
