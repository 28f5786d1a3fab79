#include "pfl/grid.hpp"

#include <algorithm>
#include <cmath>

namespace pfl {

ScalarField::ScalarField(int width, int height, double dx, double fill)
    : width_(width), height_(height), dx_(dx) {
  if (width < 4 || height < 4) throw std::invalid_argument("ScalarField needs width, height >= 4");
  if (!(dx > 0.0) || !std::isfinite(dx)) throw std::invalid_argument("ScalarField needs dx > 0");
  values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

double ScalarField::wrapped(int x, int y) const {
  x %= width_;
  if (x < 0) x += width_;
  y %= height_;
  if (y < 0) y += height_;
  return values_[index(x, y)];
}

Mask Mask::from_runs(int width, int height, std::vector<Run> runs) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("mask dimensions must be positive");
  std::sort(runs.begin(), runs.end(), [](const Run& a, const Run& b) {
    return a.row != b.row ? a.row < b.row : a.start < b.start;
  });
  Mask m(width, height);
  for (const Run& r : runs) {
    if (r.length <= 0) continue;
    if (r.row < 0 || r.row >= height || r.start < 0 || r.start + r.length > width) {
      throw std::out_of_range("mask run outside bounds");
    }
    if (!m.runs_.empty() && m.runs_.back().row == r.row) {
      Run& last = m.runs_.back();
      if (r.start < last.start + last.length) throw std::invalid_argument("mask runs overlap");
      if (r.start == last.start + last.length) {
        last.length += r.length;
        continue;
      }
    }
    m.runs_.push_back(r);
  }
  return m;
}

Mask Mask::from_bitmap(int width, int height, std::span<const std::uint8_t> bitmap) {
  if (bitmap.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw DimensionMismatchError("bitmap size does not match mask dimensions");
  }
  Mask m(width, height);
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* row = bitmap.data() + static_cast<std::size_t>(y) * width;
    int x = 0;
    while (x < width) {
      if (!row[x]) {
        ++x;
        continue;
      }
      int start = x;
      while (x < width && row[x]) ++x;
      m.runs_.push_back({y, start, x - start});
    }
  }
  return m;
}

std::vector<std::uint8_t> Mask::to_bitmap() const {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_), 0);
  for (const Run& r : runs_) {
    std::fill_n(bits.begin() + static_cast<std::ptrdiff_t>(r.row) * width_ + r.start, r.length, 1);
  }
  return bits;
}

std::size_t Mask::count() const {
  std::size_t n = 0;
  for (const Run& r : runs_) n += static_cast<std::size_t>(r.length);
  return n;
}

void require_same_dims(const Mask& a, const Mask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionMismatchError("mask dimensions differ: " + std::to_string(a.width()) + "x" +
                                 std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                                 "x" + std::to_string(b.height()));
  }
}

void laplacian_into(const ScalarField& f, ScalarField& out) {
  const int w = f.width();
  const int h = f.height();
  const double inv_dx2 = 1.0 / (f.dx() * f.dx());
  const double* in = f.values().data();
  double* o = out.values().data();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const double* row = in + static_cast<std::size_t>(y) * w;
    const double* up = in + static_cast<std::size_t>(y == 0 ? h - 1 : y - 1) * w;
    const double* down = in + static_cast<std::size_t>(y == h - 1 ? 0 : y + 1) * w;
    double* orow = o + static_cast<std::size_t>(y) * w;
    orow[0] = (row[w - 1] + row[1] + up[0] + down[0] - 4.0 * row[0]) * inv_dx2;
    for (int x = 1; x < w - 1; ++x) {
      orow[x] = (row[x - 1] + row[x + 1] + up[x] + down[x] - 4.0 * row[x]) * inv_dx2;
    }
    orow[w - 1] = (row[w - 2] + row[0] + up[w - 1] + down[w - 1] - 4.0 * row[w - 1]) * inv_dx2;
  }
}

ScalarField laplacian(const ScalarField& f) {
  ScalarField out(f.width(), f.height(), f.dx());
  laplacian_into(f, out);
  return out;
}

double sum(const ScalarField& f) {
  const int w = f.width();
  const double* v = f.values().data();
  return ordered_row_sum(f.height(), [&](int y) {
    const double* row = v + static_cast<std::size_t>(y) * w;
    double s = 0.0;
    for (int x = 0; x < w; ++x) s += row[x];
    return s;
  });
}

double mean(const ScalarField& f) { return sum(f) / static_cast<double>(f.size()); }

Mask threshold(const ScalarField& f, double t) {
  std::vector<std::uint8_t> bits(f.size());
  auto v = f.values();
  for (std::size_t i = 0; i < v.size(); ++i) bits[i] = v[i] >= t ? 1 : 0;
  return Mask::from_bitmap(f.width(), f.height(), bits);
}

std::size_t intersection_count(const Mask& a, const Mask& b) {
  require_same_dims(a, b);
  std::size_t n = 0;
  const auto& ra = a.runs();
  const auto& rb = b.runs();
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < ra.size() && j < rb.size()) {
    const Run& x = ra[i];
    const Run& y = rb[j];
    if (x.row != y.row) {
      (x.row < y.row ? i : j)++;
      continue;
    }
    const int lo = std::max(x.start, y.start);
    const int hi = std::min(x.start + x.length, y.start + y.length);
    if (hi > lo) n += static_cast<std::size_t>(hi - lo);
    (x.start + x.length < y.start + y.length ? i : j)++;
  }
  return n;
}

}  // namespace pfl
