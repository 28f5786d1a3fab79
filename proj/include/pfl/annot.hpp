#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfl/grid.hpp"
#include "pfl/slic.hpp"

namespace pfl {

class StaleAnnotationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LabelOutOfRangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

struct Annotation {
  std::string frame_id;
  std::string superpixel_ref;          // content_hash of the map the labels index
  std::vector<std::int32_t> selected;  // sorted, unique
  Mask erased;
  std::string author;
  std::string timestamp;  // ISO-8601

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Polyline drawn with a round brush.
struct BrushStroke {
  std::vector<Point> points;
  double radius = 3.0;
};

// A pixel is covered when its center (x, y) lies within radius of some
// segment of a stroke (or of the point itself for one-point strokes).
Mask rasterize_strokes(int width, int height, const std::vector<BrushStroke>& strokes);

Mask compose_mask(const SuperpixelMap& map, const Annotation& ann);

// Intersection over union; 1.0 when both masks are empty.
double iou(const Mask& a, const Mask& b);

nlohmann::ordered_json mask_to_json(const Mask& mask);
Mask mask_from_json(const nlohmann::json& j, const std::string& path);

nlohmann::ordered_json to_json(const Annotation& ann);
// With a map, labels and erased dimensions are checked against it.
Annotation annotation_from_json(const nlohmann::json& j, const SuperpixelMap* map = nullptr,
                                const std::string& path = "annotation");
std::vector<BrushStroke> strokes_from_json(const nlohmann::json& j, const std::string& path);

std::string dump_annotation(const Annotation& ann);
void save_annotation(const Annotation& ann, const std::string& file);
Annotation load_annotation(const std::string& file, const SuperpixelMap* map = nullptr);

bool is_iso8601(const std::string& s);
// Current UTC time, second resolution.
std::string utc_timestamp();

}  // namespace pfl
