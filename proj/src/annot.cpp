#include "pfl/annot.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <regex>

#include "pfl/fileio.hpp"
#include "pfl/params.hpp"

namespace pfl {

namespace {

double segment_distance2(double px, double py, const Point& a, const Point& b) {
  const double ex = b.x - a.x;
  const double ey = b.y - a.y;
  const double len2 = ex * ex + ey * ey;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((px - a.x) * ex + (py - a.y) * ey) / len2, 0.0, 1.0);
  const double dx = px - (a.x + t * ex);
  const double dy = py - (a.y + t * ey);
  return dx * dx + dy * dy;
}

void stamp_segment(std::vector<std::uint8_t>& bits, int w, int h, const Point& a, const Point& b, double r) {
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - r)));
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - r)));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + r)));
  const double r2 = r * r;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (segment_distance2(x, y, a, b) <= r2) bits[static_cast<std::size_t>(y) * w + x] = 1;
    }
  }
}

const nlohmann::json& field(const nlohmann::json& j, const std::string& path, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path + "." + key, "missing");
  return *it;
}

std::string string_field(const nlohmann::json& j, const std::string& path, const char* key) {
  const auto& v = field(j, path, key);
  if (!v.is_string()) throw SchemaError(path + "." + key, "expected a string");
  return v.get<std::string>();
}

}  // namespace

Mask rasterize_strokes(int width, int height, const std::vector<BrushStroke>& strokes) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(width) * height, 0);
  for (const BrushStroke& s : strokes) {
    if (s.points.empty()) continue;
    if (s.points.size() == 1) {
      stamp_segment(bits, width, height, s.points[0], s.points[0], s.radius);
      continue;
    }
    for (std::size_t i = 1; i < s.points.size(); ++i) {
      stamp_segment(bits, width, height, s.points[i - 1], s.points[i], s.radius);
    }
  }
  return Mask::from_bitmap(width, height, bits);
}

Mask compose_mask(const SuperpixelMap& map, const Annotation& ann) {
  const std::string hash = content_hash(map);
  if (ann.superpixel_ref != hash) {
    throw StaleAnnotationError("annotation indexes superpixels " + ann.superpixel_ref + " but the map is " + hash);
  }
  if (ann.erased.width() != map.width || ann.erased.height() != map.height) {
    throw DimensionMismatchError("erased mask does not match the superpixel map");
  }
  std::vector<std::uint8_t> chosen(static_cast<std::size_t>(map.n_labels), 0);
  for (std::int32_t l : ann.selected) {
    if (l < 0 || l >= map.n_labels) {
      throw LabelOutOfRangeError("selected label " + std::to_string(l) + " outside [0, " +
                                 std::to_string(map.n_labels) + ")");
    }
    chosen[static_cast<std::size_t>(l)] = 1;
  }
  std::vector<std::uint8_t> bits(map.labels.size());
  for (std::size_t p = 0; p < bits.size(); ++p) bits[p] = chosen[static_cast<std::size_t>(map.labels[p])];
  for (const Run& r : ann.erased.runs()) {
    std::fill_n(bits.begin() + static_cast<std::ptrdiff_t>(r.row) * map.width + r.start, r.length, 0);
  }
  return Mask::from_bitmap(map.width, map.height, bits);
}

double iou(const Mask& a, const Mask& b) {
  const std::size_t both = intersection_count(a, b);
  const std::size_t either = a.count() + b.count() - both;
  if (either == 0) return 1.0;
  return static_cast<double>(both) / static_cast<double>(either);
}

nlohmann::ordered_json mask_to_json(const Mask& mask) {
  nlohmann::ordered_json j;
  j["width"] = mask.width();
  j["height"] = mask.height();
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (const Run& r : mask.runs()) runs.push_back({r.row, r.start, r.length});
  j["runs"] = std::move(runs);
  return j;
}

Mask mask_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  auto dim = [&](const char* key) {
    const auto& v = field(j, path, key);
    if (!v.is_number_integer() || v.get<long long>() <= 0 || v.get<long long>() > (1 << 20)) {
      throw SchemaError(path + "." + key, "expected a positive integer");
    }
    return static_cast<int>(v.get<long long>());
  };
  const int w = dim("width");
  const int h = dim("height");
  const auto& runs = field(j, path, "runs");
  if (!runs.is_array()) throw SchemaError(path + ".runs", "expected an array");
  std::vector<Run> out;
  out.reserve(runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    const std::string rp = path + ".runs[" + std::to_string(i) + "]";
    if (!r.is_array() || r.size() != 3 || !r[0].is_number_integer() || !r[1].is_number_integer() ||
        !r[2].is_number_integer()) {
      throw SchemaError(rp, "expected [row, start, length]");
    }
    const long long row = r[0].get<long long>();
    const long long start = r[1].get<long long>();
    const long long length = r[2].get<long long>();
    if (row < 0 || row >= h || start < 0 || length < 1 || start + length > w) {
      throw SchemaError(rp, "run outside the mask");
    }
    out.push_back({static_cast<int>(row), static_cast<int>(start), static_cast<int>(length)});
  }
  try {
    return Mask::from_runs(w, h, std::move(out));
  } catch (const std::exception& e) {
    throw SchemaError(path + ".runs", e.what());
  }
}

nlohmann::ordered_json to_json(const Annotation& ann) {
  nlohmann::ordered_json j;
  j["frame_id"] = ann.frame_id;
  j["superpixel_ref"] = ann.superpixel_ref;
  j["selected"] = ann.selected;
  j["erased"] = mask_to_json(ann.erased);
  j["author"] = ann.author;
  j["timestamp"] = ann.timestamp;
  return j;
}

Annotation annotation_from_json(const nlohmann::json& j, const SuperpixelMap* map, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  Annotation ann;
  ann.frame_id = string_field(j, path, "frame_id");
  if (ann.frame_id.empty()) throw SchemaError(path + ".frame_id", "must not be empty");
  ann.superpixel_ref = string_field(j, path, "superpixel_ref");
  ann.author = string_field(j, path, "author");
  ann.timestamp = string_field(j, path, "timestamp");
  if (!is_iso8601(ann.timestamp)) throw SchemaError(path + ".timestamp", "expected an ISO-8601 date-time");

  const auto& sel = field(j, path, "selected");
  if (!sel.is_array()) throw SchemaError(path + ".selected", "expected an array");
  for (std::size_t i = 0; i < sel.size(); ++i) {
    const std::string sp = path + ".selected[" + std::to_string(i) + "]";
    if (!sel[i].is_number_integer()) throw SchemaError(sp, "expected an integer label");
    const long long l = sel[i].get<long long>();
    if (l < 0 || (map && l >= map->n_labels) || l > std::numeric_limits<std::int32_t>::max()) {
      throw SchemaError(sp, "label " + std::to_string(l) + " out of range");
    }
    ann.selected.push_back(static_cast<std::int32_t>(l));
  }
  std::sort(ann.selected.begin(), ann.selected.end());
  ann.selected.erase(std::unique(ann.selected.begin(), ann.selected.end()), ann.selected.end());

  ann.erased = mask_from_json(field(j, path, "erased"), path + ".erased");
  if (map) {
    if (ann.erased.width() != map->width || ann.erased.height() != map->height) {
      throw SchemaError(path + ".erased", "dimensions differ from the superpixel map");
    }
  }
  return ann;
}

std::vector<BrushStroke> strokes_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
  std::vector<BrushStroke> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string sp = path + "[" + std::to_string(i) + "]";
    const auto& s = j[i];
    if (!s.is_object()) throw SchemaError(sp, "expected an object");
    BrushStroke stroke;
    const auto& r = field(s, sp, "radius");
    if (!r.is_number() || !std::isfinite(r.get<double>()) || r.get<double>() < 0.0) {
      throw SchemaError(sp + ".radius", "expected a non-negative number");
    }
    stroke.radius = r.get<double>();
    const auto& pts = field(s, sp, "points");
    if (!pts.is_array()) throw SchemaError(sp + ".points", "expected an array");
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const auto& p = pts[k];
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number() ||
          !std::isfinite(p[0].get<double>()) || !std::isfinite(p[1].get<double>())) {
        throw SchemaError(sp + ".points[" + std::to_string(k) + "]", "expected [x, y]");
      }
      stroke.points.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    out.push_back(std::move(stroke));
  }
  return out;
}

std::string dump_annotation(const Annotation& ann) { return to_json(ann).dump() + "\n"; }

void save_annotation(const Annotation& ann, const std::string& file) { write_text_file(file, dump_annotation(ann)); }

Annotation load_annotation(const std::string& file, const SuperpixelMap* map) {
  return annotation_from_json(read_json_file(file), map);
}

bool is_iso8601(const std::string& s) {
  static const std::regex kPattern(
      R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d+)?(Z|[+-]\d{2}:\d{2}))");
  return std::regex_match(s, kPattern);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace pfl
