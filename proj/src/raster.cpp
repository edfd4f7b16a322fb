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

#include "bevmatch/raster.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "bevmatch/error.hpp"

namespace bevmatch {
namespace {

static_assert(std::endian::native == std::endian::little,
              "BSG1 I/O assumes a little-endian host");

constexpr char kMagic[4] = {'B', 'S', 'G', '1'};
constexpr std::size_t kHeaderBytes = 4 + 3 * 4 + 4 + 2 * 8;
// Refuse headers describing more than 2^31 values.
constexpr std::uint64_t kMaxValues = std::uint64_t{1} << 31;

// Maps world points to and from continuous pixel coordinates of a placed
// grid. Pixel centers sit at integer coordinates.
class Placement {
 public:
  explicit Placement(const GridPlacement& p)
      : spec_(p.spec), c_(snap(std::cos(p.theta))),
        s_(snap(std::sin(p.theta))), identity_(p.theta == 0.0) {}

  Vec2 world(int row, int col) const {
    if (identity_) return spec_.pixel_center(row, col);
    const Vec2 o = spec_.pixel_offset(row, col);
    return spec_.center + Vec2{c_ * o.x - s_ * o.y, s_ * o.x + c_ * o.y};
  }

  // Inclusive pixel window covering the world box, clamped to the grid.
  // Returns false when the window is empty.
  bool window(Vec2 lo, Vec2 hi, int* r0, int* r1, int* c0, int* c1) const {
    double rmin = std::numeric_limits<double>::infinity();
    double rmax = -rmin, cmin = rmin, cmax = -rmin;
    for (Vec2 p : {lo, hi, Vec2{lo.x, hi.y}, Vec2{hi.x, lo.y}}) {
      const Vec2 d = p - spec_.center;
      const Vec2 local{c_ * d.x + s_ * d.y, -s_ * d.x + c_ * d.y};
      const double col = local.x / spec_.resolution + 0.5 * spec_.width - 0.5;
      const double row = 0.5 * spec_.height - 0.5 - local.y / spec_.resolution;
      rmin = std::min(rmin, row);
      rmax = std::max(rmax, row);
      cmin = std::min(cmin, col);
      cmax = std::max(cmax, col);
    }
    *r0 = static_cast<int>(std::max(0.0, std::floor(rmin) - 1));
    *c0 = static_cast<int>(std::max(0.0, std::floor(cmin) - 1));
    *r1 = static_cast<int>(
        std::min(static_cast<double>(spec_.height - 1), std::ceil(rmax) + 1));
    *c1 = static_cast<int>(
        std::min(static_cast<double>(spec_.width - 1), std::ceil(cmax) + 1));
    return *r0 <= *r1 && *c0 <= *c1;
  }

  const GridSpec& spec() const { return spec_; }

 private:
  // Quarter turns then rotate pixel offsets exactly.
  static double snap(double v) { return std::abs(v) < 1e-15 ? 0.0 : v; }

  GridSpec spec_;
  double c_;
  double s_;
  bool identity_;
};

double segment_distance_sq(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len_sq = dot(ab, ab);
  double t = len_sq > 0.0 ? dot(p - a, ab) / len_sq : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec2 d = p - (a + t * ab);
  return dot(d, d);
}

bool on_segment(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const Vec2 ap = p - a;
  const double cross = ab.x * ap.y - ab.y * ap.x;
  const double scale = std::max({std::abs(ab.x), std::abs(ab.y), 1.0});
  if (std::abs(cross) > 1e-12 * scale * scale) return false;
  return p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) &&
         p.y >= std::min(a.y, b.y) && p.y <= std::max(a.y, b.y);
}

bool inside_polygon(Vec2 p, const std::vector<Vec2>& poly) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if (on_segment(p, a, b)) return true;
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

void write_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + 4);
}

template <typename T>
T read_scalar(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

template <typename T>
void append_scalar(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

}  // namespace

void GridSpec::check() const {
  if (height <= 0 || width <= 0) {
    throw ConfigError("grid dimensions must be positive, got " +
                      std::to_string(height) + "x" + std::to_string(width));
  }
  if (!(resolution > 0.0) || !std::isfinite(resolution)) {
    throw ConfigError("grid resolution must be positive");
  }
}

Grid::Grid(GridSpec spec, int channels)
    : spec_(spec), channels_(channels),
      data_(static_cast<std::size_t>(channels) * spec.pixels(), 0.0f) {
  spec_.check();
  if (channels <= 0) throw ConfigError("grid needs at least one channel");
}

Grid::Grid(GridSpec spec, int channels, std::vector<float> data)
    : spec_(spec), channels_(channels), data_(std::move(data)) {
  spec_.check();
  if (channels <= 0) throw ConfigError("grid needs at least one channel");
  if (data_.size() != static_cast<std::size_t>(channels) * spec_.pixels()) {
    throw ShapeError("grid data has " + std::to_string(data_.size()) +
                     " values, expected " +
                     std::to_string(channels * spec_.pixels()));
  }
}

MapTile::MapTile(Grid grid) : grid_(std::move(grid)) {
  if (grid_.channels() != kNumChannels) {
    throw InvalidInputError("map tile needs 2 channels, got " +
                            std::to_string(grid_.channels()));
  }
  for (float v : grid_.data()) {
    if (v != 0.0f && v != 1.0f) {
      throw InvalidInputError("map tile values must be 0 or 1");
    }
  }
}

BevObservation::BevObservation(Grid grid) : grid_(std::move(grid)) {
  if (grid_.channels() != kNumChannels) {
    throw InvalidInputError("observation needs 2 channels, got " +
                            std::to_string(grid_.channels()));
  }
  for (float v : grid_.data()) {
    if (!std::isfinite(v)) {
      throw InvalidInputError("observation contains non-finite values");
    }
  }
}

BinaryChannel rasterize_roads(const VectorMap& map, const GridSpec& spec,
                              std::optional<double> sd_width) {
  return rasterize_roads(map, GridPlacement{spec, 0.0}, sd_width);
}

BinaryChannel rasterize_roads(const VectorMap& map,
                              const GridPlacement& placement,
                              std::optional<double> sd_width) {
  placement.spec.check();
  const Placement grid(placement);
  const GridSpec& spec = grid.spec();
  BinaryChannel out(spec.pixels(), 0);
  for (std::size_t ri = 0; ri < map.roads.size(); ++ri) {
    const Road& road = map.roads[ri];
    double width = 0.0;
    if (map.mode == MapMode::kHd || road.width) {
      if (!road.width) {
        throw ConfigError("HD road " + std::to_string(ri) + " has no width");
      }
      width = *road.width;
    } else {
      if (!sd_width) {
        throw ConfigError("road " + std::to_string(ri) +
                          " has no width and no SD road width is set");
      }
      width = *sd_width;
    }
    if (!(width > 0.0)) throw ConfigError("road width must be positive");
    const double half = 0.5 * width;
    const double half_sq = half * half;
    for (std::size_t k = 0; k + 1 < road.centerline.size(); ++k) {
      const Vec2 a = road.centerline[k];
      const Vec2 b = road.centerline[k + 1];
      const Vec2 lo{std::min(a.x, b.x) - half, std::min(a.y, b.y) - half};
      const Vec2 hi{std::max(a.x, b.x) + half, std::max(a.y, b.y) + half};
      int r0, r1, c0, c1;
      if (!grid.window(lo, hi, &r0, &r1, &c0, &c1)) continue;
      for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
          std::uint8_t& px = out[static_cast<std::size_t>(r) * spec.width + c];
          if (px) continue;
          if (segment_distance_sq(grid.world(r, c), a, b) <= half_sq) px = 1;
        }
      }
    }
  }
  return out;
}

BinaryChannel rasterize_buildings(const VectorMap& map, const GridSpec& spec) {
  return rasterize_buildings(map, GridPlacement{spec, 0.0});
}

BinaryChannel rasterize_buildings(const VectorMap& map,
                                  const GridPlacement& placement) {
  placement.spec.check();
  const Placement grid(placement);
  const GridSpec& spec = grid.spec();
  BinaryChannel out(spec.pixels(), 0);
  for (const Building& b : map.buildings) {
    if (b.boundary.size() < 3) continue;
    Vec2 lo = b.boundary.front(), hi = b.boundary.front();
    for (const Vec2& p : b.boundary) {
      lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
    }
    int r0, r1, c0, c1;
    if (!grid.window(lo, hi, &r0, &r1, &c0, &c1)) continue;
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        std::uint8_t& px = out[static_cast<std::size_t>(r) * spec.width + c];
        if (px) continue;
        const Vec2 p = grid.world(r, c);
        if (p.x < lo.x || p.x > hi.x || p.y < lo.y || p.y > hi.y) continue;
        if (inside_polygon(p, b.boundary)) px = 1;
      }
    }
  }
  return out;
}

MapTile query_tile(const VectorMap& map, const InitPrior& prior,
                   const GridShape& shape, std::optional<double> sd_width) {
  const GridSpec spec = shape.at(prior.position);
  Grid grid(spec, kNumChannels);
  const BinaryChannel roads = rasterize_roads(map, spec, sd_width);
  const BinaryChannel buildings = rasterize_buildings(map, spec);
  std::copy(roads.begin(), roads.end(), grid.channel(kRoads).begin());
  std::copy(buildings.begin(), buildings.end(),
            grid.channel(kBuildings).begin());
  return MapTile(std::move(grid));
}

ChannelMask parse_channel_mask(const std::string& s) {
  if (s == "both") return ChannelMask::kBoth;
  if (s == "roads") return ChannelMask::kRoads;
  if (s == "buildings") return ChannelMask::kBuildings;
  throw ConfigError("unknown channel mask '" + s +
                    "' (expected both, roads or buildings)");
}

std::string to_string(ChannelMask mask) {
  switch (mask) {
    case ChannelMask::kRoads:
      return "roads";
    case ChannelMask::kBuildings:
      return "buildings";
    case ChannelMask::kBoth:
      break;
  }
  return "both";
}

void apply_channel_mask(Grid& grid, ChannelMask mask) {
  if (grid.channels() != kNumChannels) {
    throw ShapeError("channel mask needs a 2-channel grid");
  }
  if (mask == ChannelMask::kRoads) {
    std::ranges::fill(grid.channel(kBuildings), 0.0f);
  } else if (mask == ChannelMask::kBuildings) {
    std::ranges::fill(grid.channel(kRoads), 0.0f);
  }
}

std::vector<std::uint8_t> encode_grid(const Grid& grid) {
  for (float v : grid.data()) {
    if (!std::isfinite(v)) throw FormatError("grid contains non-finite values");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + grid.data().size() * 4);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  write_u32(out, static_cast<std::uint32_t>(grid.channels()));
  write_u32(out, static_cast<std::uint32_t>(grid.height()));
  write_u32(out, static_cast<std::uint32_t>(grid.width()));
  append_scalar(out, static_cast<float>(grid.spec().resolution));
  append_scalar(out, grid.spec().center.x);
  append_scalar(out, grid.spec().center.y);
  const auto* p = reinterpret_cast<const std::uint8_t*>(grid.data().data());
  out.insert(out.end(), p, p + grid.data().size() * sizeof(float));
  return out;
}

Grid decode_grid(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) throw FormatError("BSG1: truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("BSG1: bad magic");
  }
  const auto channels = read_scalar<std::uint32_t>(bytes, 4);
  const auto height = read_scalar<std::uint32_t>(bytes, 8);
  const auto width = read_scalar<std::uint32_t>(bytes, 12);
  const auto resolution = read_scalar<float>(bytes, 16);
  const auto cx = read_scalar<double>(bytes, 20);
  const auto cy = read_scalar<double>(bytes, 28);
  if (channels == 0 || height == 0 || width == 0) {
    throw FormatError("BSG1: zero dimension");
  }
  const std::uint64_t count = std::uint64_t{channels} * height * width;
  if (height > kMaxValues || width > kMaxValues || channels > kMaxValues ||
      count > kMaxValues) {
    throw FormatError("BSG1: dimensions overflow");
  }
  if (bytes.size() != kHeaderBytes + count * 4) {
    throw FormatError("BSG1: payload has " +
                      std::to_string(bytes.size() - kHeaderBytes) +
                      " bytes, expected " + std::to_string(count * 4));
  }
  if (!(resolution > 0.0f) || !std::isfinite(resolution)) {
    throw FormatError("BSG1: resolution must be positive");
  }
  std::vector<float> data(count);
  std::memcpy(data.data(), bytes.data() + kHeaderBytes, count * 4);
  GridSpec spec{static_cast<int>(height), static_cast<int>(width), resolution,
                {cx, cy}};
  return Grid(spec, static_cast<int>(channels), std::move(data));
}

void write_grid(const Grid& grid, const std::string& path) {
  const auto bytes = encode_grid(grid);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

Grid read_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_grid(bytes);
}

void write_pgm(std::span<const float> values, int height, int width,
               const std::string& path) {
  if (values.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("PGM export: value count does not match dimensions");
  }
  bool binary = true;
  float lo = std::numeric_limits<float>::infinity();
  float hi = -lo;
  for (float v : values) {
    if (v != 0.0f && v != 1.0f) binary = false;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<std::uint8_t> pixels(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (binary) {
      pixels[i] = values[i] != 0.0f ? 255 : 0;
    } else if (hi > lo) {
      pixels[i] = static_cast<std::uint8_t>(
          std::lround(255.0 * (values[i] - lo) / (hi - lo)));
    } else {
      pixels[i] = 0;
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

void write_pgm(const Grid& grid, int channel, const std::string& path) {
  if (channel < 0 || channel >= grid.channels()) {
    throw ShapeError("PGM export: channel " + std::to_string(channel) +
                     " out of range");
  }
  write_pgm(grid.channel(channel), grid.height(), grid.width(), path);
}

}  // namespace bevmatch
