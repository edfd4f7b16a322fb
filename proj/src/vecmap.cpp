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

#include "bevmatch/vecmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "bevmatch/error.hpp"
#include "json.hpp"

namespace bevmatch {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void check_wgs84(double lat, double lon) {
  if (!(lat >= -90.0 && lat <= 90.0) || !(lon >= -180.0 && lon <= 180.0)) {
    std::ostringstream os;
    os << "coordinate out of WGS-84 range: lat=" << lat << " lon=" << lon;
    throw InvalidInputError(os.str());
  }
}

bool finite(Vec2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

nlohmann::json points_to_json(const std::vector<Vec2>& points) {
  auto out = nlohmann::json::array();
  for (const Vec2& p : points) out.push_back({p.x, p.y});
  return out;
}

std::vector<Vec2> points_from_json(const nlohmann::json& j) {
  std::vector<Vec2> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) {
      throw FormatError("point must be a two-element array");
    }
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

}  // namespace

LocalFrame::LocalFrame(double origin_lat, double origin_lon)
    : origin_lat_(origin_lat), origin_lon_(origin_lon) {
  check_wgs84(origin_lat, origin_lon);
}

Vec2 project_wgs84_to_local(double lat, double lon, const LocalFrame& frame) {
  check_wgs84(lat, lon);
  if (!(std::abs(lat - frame.origin_lat()) < 1.0)) {
    std::ostringstream os;
    os << "latitude " << lat << " is more than 1 degree from frame origin "
       << frame.origin_lat();
    throw InvalidInputError(os.str());
  }
  const double r = LocalFrame::kEarthRadius;
  return {r * std::cos(frame.origin_lat() * kDegToRad) *
              ((lon - frame.origin_lon()) * kDegToRad),
          r * ((lat - frame.origin_lat()) * kDegToRad)};
}

double polygon_area(const std::vector<Vec2>& polygon) {
  double twice = 0.0;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = polygon[i];
    const Vec2& b = polygon[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

Box map_bounds(const VectorMap& map, std::optional<double> sd_width) {
  if (map.empty()) throw EmptyMapError("map has no roads or buildings");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Box box{{kInf, kInf}, {-kInf, -kInf}};
  auto extend = [&box](Vec2 p, double pad) {
    box.min.x = std::min(box.min.x, p.x - pad);
    box.min.y = std::min(box.min.y, p.y - pad);
    box.max.x = std::max(box.max.x, p.x + pad);
    box.max.y = std::max(box.max.y, p.y + pad);
  };
  for (const Road& road : map.roads) {
    const double pad = 0.5 * road.width.value_or(sd_width.value_or(0.0));
    for (const Vec2& p : road.centerline) extend(p, pad);
  }
  for (const Building& b : map.buildings) {
    for (const Vec2& p : b.boundary) extend(p, 0.0);
  }
  return box;
}

void validate(const VectorMap& map) {
  for (std::size_t i = 0; i < map.roads.size(); ++i) {
    const Road& road = map.roads[i];
    const std::string name = "road " + std::to_string(i);
    if (road.centerline.size() < 2) {
      throw InvalidInputError(name + ": centerline needs at least 2 points");
    }
    for (std::size_t k = 0; k < road.centerline.size(); ++k) {
      if (!finite(road.centerline[k])) {
        throw InvalidInputError(name + ": non-finite vertex");
      }
      if (k > 0 && road.centerline[k] == road.centerline[k - 1]) {
        throw InvalidInputError(name + ": repeated consecutive vertex");
      }
    }
    if (road.width && !(*road.width > 0.0 && std::isfinite(*road.width))) {
      throw InvalidInputError(name + ": width must be positive");
    }
    if (map.mode == MapMode::kHd && !road.width) {
      throw InvalidInputError(name + ": HD maps require per-road widths");
    }
  }
  for (std::size_t i = 0; i < map.buildings.size(); ++i) {
    const Building& b = map.buildings[i];
    const std::string name = "building " + std::to_string(i);
    if (b.boundary.size() < 3) {
      throw InvalidInputError(name + ": boundary needs at least 3 vertices");
    }
    for (const Vec2& p : b.boundary) {
      if (!finite(p)) throw InvalidInputError(name + ": non-finite vertex");
    }
    if (b.boundary.front() == b.boundary.back()) {
      throw InvalidInputError(name + ": closing vertex must not be repeated");
    }
    if (polygon_area(b.boundary) == 0.0) {
      throw InvalidInputError(name + ": zero area");
    }
  }
}

std::string vector_map_to_json(const VectorMap& map) {
  nlohmann::json j;
  j["frame"] = {{"origin_lat", map.frame.origin_lat()},
                {"origin_lon", map.frame.origin_lon()}};
  j["mode"] = map.mode == MapMode::kHd ? "hd" : "sd";
  j["roads"] = nlohmann::json::array();
  for (const Road& road : map.roads) {
    nlohmann::json r;
    r["centerline"] = points_to_json(road.centerline);
    r["width"] = road.width ? nlohmann::json(*road.width) : nlohmann::json();
    j["roads"].push_back(std::move(r));
  }
  j["buildings"] = nlohmann::json::array();
  for (const Building& b : map.buildings) {
    j["buildings"].push_back({{"boundary", points_to_json(b.boundary)}});
  }
  return j.dump(1);
}

VectorMap vector_map_from_json(const std::string& text) {
  VectorMap map;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto& frame = j.at("frame");
    map.frame = LocalFrame(frame.at("origin_lat").get<double>(),
                           frame.at("origin_lon").get<double>());
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "hd") {
      map.mode = MapMode::kHd;
    } else if (mode == "sd") {
      map.mode = MapMode::kSd;
    } else {
      throw FormatError("unknown map mode '" + mode + "'");
    }
    for (const auto& r : j.at("roads")) {
      Road road;
      road.centerline = points_from_json(r.at("centerline"));
      if (r.contains("width") && !r["width"].is_null()) {
        road.width = r["width"].get<double>();
      }
      map.roads.push_back(std::move(road));
    }
    for (const auto& b : j.at("buildings")) {
      map.buildings.push_back({points_from_json(b.at("boundary"))});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("vector map JSON: ") + e.what());
  }
  validate(map);
  return map;
}

void write_vector_map(const VectorMap& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << vector_map_to_json(map) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

VectorMap read_vector_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return vector_map_from_json(ss.str());
}

}  // namespace bevmatch
