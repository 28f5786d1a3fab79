#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfl/grid.hpp"
#include "pfl/image.hpp"

namespace pfl {

class InvalidKError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SuperpixelMap {
  int width = 0;
  int height = 0;
  int n_labels = 0;
  std::vector<std::int32_t> labels;  // row-major

  std::int32_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  friend bool operator==(const SuperpixelMap&, const SuperpixelMap&) = default;
};

struct SlicOptions {
  int k = 400;
  double m = 10.0;
  int max_iter = 10;
};

SuperpixelMap slic_segment(const GrayImage& image, const SlicOptions& options);

// Components smaller than min_size take the label of the pixel left of (or
// above) their first pixel in scan order. Labels are renumbered densely in
// scan order.
SuperpixelMap enforce_connectivity(int width, int height, const std::vector<std::int32_t>& labels,
                                   std::size_t min_size);
// min_size = (N/K)/4
SuperpixelMap enforce_connectivity(int width, int height, const std::vector<std::int32_t>& labels, int k);

// Pixels whose right or bottom neighbour carries a different label.
Mask boundaries(const SuperpixelMap& map);

// Empty string when every invariant holds, otherwise a description of the
// first violation.
std::string check_superpixel_map(const SuperpixelMap& map);

// Pixels of one label as a mask.
Mask label_mask(const SuperpixelMap& map, std::int32_t label);

nlohmann::ordered_json to_json(const SuperpixelMap& map);
SuperpixelMap superpixels_from_json(const nlohmann::json& j, const std::string& path = "superpixels");
std::string dump_superpixels(const SuperpixelMap& map);
void save_superpixels(const SuperpixelMap& map, const std::string& file);
SuperpixelMap load_superpixels(const std::string& file);

// "sha256:" plus the lowercase hex digest of the canonical JSON text.
std::string content_hash(const SuperpixelMap& map);

}  // namespace pfl
