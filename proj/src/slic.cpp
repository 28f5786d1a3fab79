#include "pfl/slic.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "pfl/fileio.hpp"
#include "pfl/params.hpp"

namespace pfl {

namespace {

struct Center {
  double x = 0.0;
  double y = 0.0;
  double g = 0.0;
};

}  // namespace

SuperpixelMap slic_segment(const GrayImage& image, const SlicOptions& options) {
  const int w = image.width;
  const int h = image.height;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (options.k < 2 || static_cast<std::size_t>(options.k) > n / 4) {
    throw InvalidKError("k must lie in [2, N/4] = [2, " + std::to_string(n / 4) + "], got " +
                        std::to_string(options.k));
  }
  if (!(options.m > 0.0) || !std::isfinite(options.m)) throw std::invalid_argument("compactness m must be positive");
  if (options.max_iter < 0) throw std::invalid_argument("max_iter must be non-negative");

  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = image.pixels[i] * (100.0 / 255.0);
  auto gat = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return g[static_cast<std::size_t>(y) * w + x];
  };

  const double s = std::sqrt(static_cast<double>(n) / options.k);
  const int nx = std::max(1, static_cast<int>(std::lround(w / s)));
  const int ny = std::max(1, static_cast<int>(std::lround(h / s)));

  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int cx = static_cast<int>((i + 0.5) * w / nx);
      const int cy = static_cast<int>((j + 0.5) * h / ny);
      int bx = cx;
      int by = cy;
      double best = std::numeric_limits<double>::infinity();
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int x = cx + dx;
          const int y = cy + dy;
          if (x < 0 || x >= w || y < 0 || y >= h) continue;
          const double gx = gat(x + 1, y) - gat(x - 1, y);
          const double gy = gat(x, y + 1) - gat(x, y - 1);
          const double grad = gx * gx + gy * gy;
          if (grad < best) {
            best = grad;
            bx = x;
            by = y;
          }
        }
      }
      centers.push_back({static_cast<double>(bx), static_cast<double>(by), gat(bx, by)});
    }
  }

  // Until a center claims it, a pixel belongs to its grid cell.
  std::vector<std::int32_t> labels(n);
  for (int y = 0; y < h; ++y) {
    const int cj = std::min(ny - 1, y * ny / h);
    for (int x = 0; x < w; ++x) {
      const int ci = std::min(nx - 1, x * nx / w);
      labels[static_cast<std::size_t>(y) * w + x] = cj * nx + ci;
    }
  }

  const double spatial = (options.m * options.m) / (s * s);
  std::vector<double> dist(n);
  for (int iter = 0; iter < options.max_iter; ++iter) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
      for (std::size_t c = 0; c < centers.size(); ++c) {
        const Center& ct = centers[c];
        const double ddy = y - ct.y;
        if (std::abs(ddy) > s) continue;
        const int x0 = std::max(0, static_cast<int>(std::ceil(ct.x - s)));
        const int x1 = std::min(w - 1, static_cast<int>(std::floor(ct.x + s)));
        for (int x = x0; x <= x1; ++x) {
          const std::size_t p = static_cast<std::size_t>(y) * w + x;
          const double dg = g[p] - ct.g;
          const double ddx = x - ct.x;
          const double d2 = dg * dg + (ddx * ddx + ddy * ddy) * spatial;
          if (d2 < dist[p]) {
            dist[p] = d2;
            labels[p] = static_cast<std::int32_t>(c);
          }
        }
      }
    }

    std::vector<Center> sums(centers.size());
    std::vector<std::size_t> counts(centers.size(), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        Center& sm = sums[static_cast<std::size_t>(labels[p])];
        sm.x += x;
        sm.y += y;
        sm.g += g[p];
        ++counts[static_cast<std::size_t>(labels[p])];
      }
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (counts[c] == 0) continue;
      const double inv = 1.0 / static_cast<double>(counts[c]);
      centers[c] = {sums[c].x * inv, sums[c].y * inv, sums[c].g * inv};
    }
  }

  return enforce_connectivity(w, h, labels, options.k);
}

SuperpixelMap enforce_connectivity(int width, int height, const std::vector<std::int32_t>& labels, int k) {
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t min_size = k > 0 ? n / static_cast<std::size_t>(k) / 4 : 0;
  return enforce_connectivity(width, height, labels, min_size);
}

SuperpixelMap enforce_connectivity(int width, int height, const std::vector<std::int32_t>& labels,
                                   std::size_t min_size) {
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (width <= 0 || height <= 0 || labels.size() != n) {
    throw DimensionMismatchError("label array does not match " + std::to_string(width) + "x" + std::to_string(height));
  }
  SuperpixelMap out;
  out.width = width;
  out.height = height;
  out.labels.assign(n, -1);

  std::vector<std::size_t> component;
  std::vector<std::size_t> stack;
  std::int32_t next = 0;
  for (std::size_t start = 0; start < n; ++start) {
    if (out.labels[start] >= 0) continue;
    const std::int32_t original = labels[start];
    component.clear();
    stack.assign(1, start);
    out.labels[start] = next;  // provisional, marks visited
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      component.push_back(p);
      const int x = static_cast<int>(p % width);
      const int y = static_cast<int>(p / width);
      const std::size_t nb[4] = {x > 0 ? p - 1 : n, x + 1 < width ? p + 1 : n, y > 0 ? p - width : n,
                                 y + 1 < height ? p + width : n};
      for (std::size_t q : nb) {
        if (q == n || out.labels[q] >= 0 || labels[q] != original) continue;
        out.labels[q] = next;
        stack.push_back(q);
      }
    }

    const int sx = static_cast<int>(start % width);
    std::int32_t adjacent = -1;
    if (sx > 0) {
      adjacent = out.labels[start - 1];
    } else if (start >= static_cast<std::size_t>(width)) {
      adjacent = out.labels[start - width];
    }
    if (component.size() < min_size && adjacent >= 0) {
      for (std::size_t p : component) out.labels[p] = adjacent;
    } else {
      ++next;
    }
  }
  out.n_labels = next;
  return out;
}

Mask boundaries(const SuperpixelMap& map) {
  const int w = map.width;
  const int h = map.height;
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int32_t l = map.at(x, y);
      const bool right = x + 1 < w && map.at(x + 1, y) != l;
      const bool below = y + 1 < h && map.at(x, y + 1) != l;
      bits[static_cast<std::size_t>(y) * w + x] = right || below;
    }
  }
  return Mask::from_bitmap(w, h, bits);
}

std::string check_superpixel_map(const SuperpixelMap& map) {
  const std::size_t n = static_cast<std::size_t>(map.width) * static_cast<std::size_t>(map.height);
  if (map.width <= 0 || map.height <= 0) return "non-positive dimensions";
  if (map.labels.size() != n) return "label array size differs from width*height";
  if (map.n_labels <= 0) return "n_labels must be positive";
  std::vector<std::size_t> seen(static_cast<std::size_t>(map.n_labels), 0);
  for (std::int32_t l : map.labels) {
    if (l < 0 || l >= map.n_labels) return "label " + std::to_string(l) + " out of range";
    ++seen[static_cast<std::size_t>(l)];
  }
  for (std::size_t l = 0; l < seen.size(); ++l) {
    if (seen[l] == 0) return "label " + std::to_string(l) + " unused";
  }
  // One flood fill per label; a second component of a label shows up as an
  // unvisited pixel whose label was already filled.
  std::vector<std::uint8_t> visited(n, 0);
  std::vector<std::uint8_t> filled(seen.size(), 0);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < n; ++start) {
    if (visited[start]) continue;
    const std::int32_t l = map.labels[start];
    if (filled[static_cast<std::size_t>(l)]) return "label " + std::to_string(l) + " is not 4-connected";
    filled[static_cast<std::size_t>(l)] = 1;
    stack.assign(1, start);
    visited[start] = 1;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(p % map.width);
      const int y = static_cast<int>(p / map.width);
      const std::size_t nb[4] = {x > 0 ? p - 1 : n, x + 1 < map.width ? p + 1 : n, y > 0 ? p - map.width : n,
                                 y + 1 < map.height ? p + map.width : n};
      for (std::size_t q : nb) {
        if (q == n || visited[q] || map.labels[q] != l) continue;
        visited[q] = 1;
        stack.push_back(q);
      }
    }
  }
  return {};
}

Mask label_mask(const SuperpixelMap& map, std::int32_t label) {
  std::vector<Run> runs;
  for (int y = 0; y < map.height; ++y) {
    int x = 0;
    while (x < map.width) {
      if (map.at(x, y) != label) {
        ++x;
        continue;
      }
      const int start = x;
      while (x < map.width && map.at(x, y) == label) ++x;
      runs.push_back({y, start, x - start});
    }
  }
  return Mask::from_runs(map.width, map.height, std::move(runs));
}

nlohmann::ordered_json to_json(const SuperpixelMap& map) {
  nlohmann::ordered_json j;
  j["width"] = map.width;
  j["height"] = map.height;
  j["n_labels"] = map.n_labels;
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (int y = 0; y < map.height; ++y) {
    int x = 0;
    while (x < map.width) {
      const std::int32_t l = map.at(x, y);
      const int start = x;
      while (x < map.width && map.at(x, y) == l) ++x;
      runs.push_back({y, start, x - start, l});
    }
  }
  j["runs"] = std::move(runs);
  return j;
}

SuperpixelMap superpixels_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  auto get_int = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(path + "." + key, "missing");
    if (!it->is_number_integer()) throw SchemaError(path + "." + key, "expected an integer");
    const long long v = it->get<long long>();
    if (v <= 0 || v > std::numeric_limits<std::int32_t>::max()) throw SchemaError(path + "." + key, "must be positive");
    return static_cast<int>(v);
  };
  SuperpixelMap map;
  map.width = get_int("width");
  map.height = get_int("height");
  map.n_labels = get_int("n_labels");
  const std::size_t n = static_cast<std::size_t>(map.width) * static_cast<std::size_t>(map.height);
  if (static_cast<std::size_t>(map.n_labels) > n) throw SchemaError(path + ".n_labels", "exceeds pixel count");

  auto it = j.find("runs");
  if (it == j.end()) throw SchemaError(path + ".runs", "missing");
  if (!it->is_array()) throw SchemaError(path + ".runs", "expected an array");
  map.labels.assign(n, -1);
  std::size_t covered = 0;
  for (std::size_t r = 0; r < it->size(); ++r) {
    const std::string rp = path + ".runs[" + std::to_string(r) + "]";
    const auto& run = (*it)[r];
    if (!run.is_array() || run.size() != 4) throw SchemaError(rp, "expected [row, start, length, label]");
    for (const auto& v : run) {
      if (!v.is_number_integer()) throw SchemaError(rp, "expected integers");
    }
    const long long row = run[0].get<long long>();
    const long long start = run[1].get<long long>();
    const long long length = run[2].get<long long>();
    const long long label = run[3].get<long long>();
    if (row < 0 || row >= map.height || start < 0 || length < 1 || start + length > map.width) {
      throw SchemaError(rp, "run outside the image");
    }
    if (label < 0 || label >= map.n_labels) throw SchemaError(rp, "label out of range");
    for (long long x = start; x < start + length; ++x) {
      std::int32_t& slot = map.labels[static_cast<std::size_t>(row) * map.width + static_cast<std::size_t>(x)];
      if (slot >= 0) throw SchemaError(rp, "overlaps an earlier run");
      slot = static_cast<std::int32_t>(label);
    }
    covered += static_cast<std::size_t>(length);
  }
  if (covered != n) throw SchemaError(path + ".runs", "runs do not cover the image");
  std::vector<std::uint8_t> used(static_cast<std::size_t>(map.n_labels), 0);
  for (std::int32_t l : map.labels) used[static_cast<std::size_t>(l)] = 1;
  for (std::size_t l = 0; l < used.size(); ++l) {
    if (!used[l]) throw SchemaError(path + ".n_labels", "label " + std::to_string(l) + " never occurs");
  }
  return map;
}

std::string dump_superpixels(const SuperpixelMap& map) { return to_json(map).dump(); }

void save_superpixels(const SuperpixelMap& map, const std::string& file) {
  write_text_file(file, dump_superpixels(map) + "\n");
}

SuperpixelMap load_superpixels(const std::string& file) { return superpixels_from_json(read_json_file(file)); }

std::string content_hash(const SuperpixelMap& map) {
  const std::string text = dump_superpixels(map);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 15]);
  }
  return "sha256:" + out;
}

}  // namespace pfl
