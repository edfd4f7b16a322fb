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

#ifndef BEVMATCH_RASTER_HPP_
#define BEVMATCH_RASTER_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bevmatch/vecmap.hpp"

namespace bevmatch {

// Geometry of a north-up raster. Row 0 is the north edge and columns grow
// eastward. Pixel (row, col) has its center at
//   center + ((col + 0.5 - width/2) * res, (height/2 - row - 0.5) * res).
struct GridSpec {
  int height = 0;
  int width = 0;
  double resolution = 0.5;
  Vec2 center;

  std::size_t pixels() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  // Offset of a pixel center from `center`, meters.
  Vec2 pixel_offset(int row, int col) const {
    return {(col + 0.5 - 0.5 * width) * resolution,
            (0.5 * height - row - 0.5) * resolution};
  }
  Vec2 pixel_center(int row, int col) const {
    return center + pixel_offset(row, col);
  }
  // Throws ConfigError unless height, width and resolution are positive.
  void check() const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

// Channel indices shared by tiles and observations.
enum Channel : int { kRoads = 0, kBuildings = 1 };
inline constexpr int kNumChannels = 2;

// Channel-major, row-major float stack.
class Grid {
 public:
  Grid() = default;
  Grid(GridSpec spec, int channels);
  Grid(GridSpec spec, int channels, std::vector<float> data);

  const GridSpec& spec() const { return spec_; }
  int channels() const { return channels_; }
  int height() const { return spec_.height; }
  int width() const { return spec_.width; }

  float& at(int c, int r, int col) { return data_[index(c, r, col)]; }
  float at(int c, int r, int col) const { return data_[index(c, r, col)]; }

  std::span<float> channel(int c) {
    return {data_.data() + c * spec_.pixels(), spec_.pixels()};
  }
  std::span<const float> channel(int c) const {
    return {data_.data() + c * spec_.pixels(), spec_.pixels()};
  }
  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int c, int r, int col) const {
    return (static_cast<std::size_t>(c) * spec_.height + r) * spec_.width + col;
  }

  GridSpec spec_;
  int channels_ = 0;
  std::vector<float> data_;
};

// Binary 2-channel prior map tile (roads, buildings), values in {0, 1}.
class MapTile {
 public:
  MapTile() = default;
  // Throws InvalidInputError on non-binary values or a channel count != 2.
  explicit MapTile(Grid grid);
  const Grid& grid() const { return grid_; }
  const GridSpec& spec() const { return grid_.spec(); }

 private:
  Grid grid_;
};

// Ego-frame 2-channel observation: segmentation logits or an encoded ground
// truth. The ego sits at the grid center; the grid's column axis is the
// vehicle heading and the row-up axis points to the vehicle's left.
class BevObservation {
 public:
  BevObservation() = default;
  // Throws InvalidInputError on non-finite values or a channel count != 2.
  explicit BevObservation(Grid grid);
  const Grid& grid() const { return grid_; }
  const GridSpec& spec() const { return grid_.spec(); }

 private:
  Grid grid_;
};

struct InitPrior {
  Vec2 position;
};

// Dimensions and resolution of a grid whose center is supplied later.
struct GridShape {
  int height = 256;
  int width = 256;
  double resolution = 0.5;

  GridSpec at(Vec2 center) const { return {height, width, resolution, center}; }
};

inline constexpr double kDefaultRoadWidth = 10.0;
inline constexpr GridShape kDefaultTileShape{256, 256, 0.5};
inline constexpr GridShape kDefaultBevShape{128, 128, 0.5};

using BinaryChannel = std::vector<std::uint8_t>;

// Where the pixels of a raster land in the world: the grid may be rotated
// by `theta` (counterclockwise) about its center. theta = 0 is north-up.
struct GridPlacement {
  GridSpec spec;
  double theta = 0.0;
};

// Pixel-center sampling: a pixel is set iff its center is within w/2 of a
// road segment, w = road.width or `sd_width`. Throws ConfigError when a road
// has no width and no sd_width is given.
BinaryChannel rasterize_roads(const VectorMap& map, const GridSpec& spec,
                              std::optional<double> sd_width);
BinaryChannel rasterize_roads(const VectorMap& map,
                              const GridPlacement& placement,
                              std::optional<double> sd_width);

// Even-odd fill per polygon, union over buildings; pixel centers on a
// boundary count as inside.
BinaryChannel rasterize_buildings(const VectorMap& map, const GridSpec& spec);
BinaryChannel rasterize_buildings(const VectorMap& map,
                                  const GridPlacement& placement);

// North-up tile of `shape` centered on the prior position.
MapTile query_tile(const VectorMap& map, const InitPrior& prior,
                   const GridShape& shape, std::optional<double> sd_width);

enum class ChannelMask { kBoth, kRoads, kBuildings };

ChannelMask parse_channel_mask(const std::string& s);
std::string to_string(ChannelMask mask);
// Zeroes the channel excluded by `mask` in a 2-channel grid.
void apply_channel_mask(Grid& grid, ChannelMask mask);

// BSG1 binary format, little-endian:
//   "BSG1" | u32 channels | u32 height | u32 width | f32 resolution |
//   f64 center_x | f64 center_y | f32 values[channels][height][width]
std::vector<std::uint8_t> encode_grid(const Grid& grid);
Grid decode_grid(std::span<const std::uint8_t> bytes);
void write_grid(const Grid& grid, const std::string& path);
Grid read_grid(const std::string& path);

// 8-bit binary PGM (P5) of one channel. Grids whose values are all 0/1 map
// to 0/255; anything else is min-max scaled.
void write_pgm(std::span<const float> values, int height, int width,
               const std::string& path);
void write_pgm(const Grid& grid, int channel, const std::string& path);

}  // namespace bevmatch

#endif  // BEVMATCH_RASTER_HPP_
