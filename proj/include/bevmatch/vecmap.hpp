/*
 * Copyright 2026 The bevmatch Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef BEVMATCH_VECMAP_HPP_
#define BEVMATCH_VECMAP_HPP_

#include <optional>
#include <string>
#include <vector>

namespace bevmatch {

// Planar point or vector in the local east-north frame, meters.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

// Tangent-plane anchor. x points east, y points north.
class LocalFrame {
 public:
  static constexpr double kEarthRadius = 6378137.0;

  LocalFrame() = default;
  // Throws InvalidInputError when the origin is outside WGS-84 ranges.
  LocalFrame(double origin_lat, double origin_lon);

  double origin_lat() const { return origin_lat_; }
  double origin_lon() const { return origin_lon_; }

  friend bool operator==(const LocalFrame&, const LocalFrame&) = default;

 private:
  double origin_lat_ = 0.0;
  double origin_lon_ = 0.0;
};

struct Road {
  std::vector<Vec2> centerline;
  // Corridor width in meters. Unset for SD maps, where a global width is
  // applied at rasterization time.
  std::optional<double> width;

  friend bool operator==(const Road&, const Road&) = default;
};

struct Building {
  // Implicitly closed; the first vertex is not repeated.
  std::vector<Vec2> boundary;

  friend bool operator==(const Building&, const Building&) = default;
};

enum class MapMode { kSd, kHd };

struct VectorMap {
  LocalFrame frame;
  MapMode mode = MapMode::kSd;
  std::vector<Road> roads;
  std::vector<Building> buildings;

  bool empty() const { return roads.empty() && buildings.empty(); }
  friend bool operator==(const VectorMap&, const VectorMap&) = default;
};

struct Box {
  Vec2 min;
  Vec2 max;

  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
  friend bool operator==(const Box&, const Box&) = default;
};

// Equirectangular projection about the frame origin on a sphere of
// LocalFrame::kEarthRadius. Valid within one degree of latitude of the
// origin; throws InvalidInputError otherwise or for out-of-range input.
Vec2 project_wgs84_to_local(double lat, double lon, const LocalFrame& frame);

// Signed shoelace area; callers use the absolute value.
double polygon_area(const std::vector<Vec2>& polygon);

// Tight box over building vertices and road vertices, the latter inflated
// by half their effective width. Roads without a width (SD mode) use
// `sd_width` when given, otherwise they contribute bare vertices.
// Throws EmptyMapError for a map with no elements.
Box map_bounds(const VectorMap& map, std::optional<double> sd_width = {});

// Checks all type invariants; throws InvalidInputError naming the element.
void validate(const VectorMap& map);

// JSON file format: {"frame": {"origin_lat", "origin_lon"}, "mode": "sd"|"hd",
// "roads": [{"centerline": [[x, y], ...], "width": number|null}],
// "buildings": [{"boundary": [[x, y], ...]}]}.
std::string vector_map_to_json(const VectorMap& map);
VectorMap vector_map_from_json(const std::string& text);
void write_vector_map(const VectorMap& map, const std::string& path);
VectorMap read_vector_map(const std::string& path);

}  // namespace bevmatch

#endif  // BEVMATCH_VECMAP_HPP_
