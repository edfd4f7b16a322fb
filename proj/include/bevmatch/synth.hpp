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

#ifndef BEVMATCH_SYNTH_HPP_
#define BEVMATCH_SYNTH_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bevmatch/pose.hpp"
#include "bevmatch/raster.hpp"
#include "bevmatch/vecmap.hpp"

namespace bevmatch::synth {

// Jittered-grid city. Roads run along grid lines between jittered
// intersections, each edge bent at its midpoint. Each block is split into
// lots_per_side^2 lots that hold a rectangular building with probability
// building_density.
struct MapGenParams {
  double extent = 480.0;  // side of the square area, meters
  double spacing = 64.0;  // nominal intersection spacing
  double jitter = 14.0;   // max intersection displacement per axis
  double bend = 5.0;     // max lateral offset of each edge's midpoint
  double edge_drop_prob = 0.15;
  double building_density = 0.6;
  int lots_per_side = 2;
  double road_clearance = 7.5;  // kept free on each side of a centerline
  double max_setback = 5.0;
  double min_building_size = 4.0;
  MapMode mode = MapMode::kSd;
  double hd_min_width = 6.0;
  double hd_max_width = 14.0;
  double tile_extent = 128.0;  // the map must exceed twice this
};

// Deterministic in (seed, params). Throws GenerationError for parameters
// that cannot produce a valid map with at least one road.
VectorMap generate_map(std::uint64_t seed, const MapGenParams& params = {});

enum class Encoding {
  kBipolar,  // occupied +1, free -1 (0 reserved for unobserved)
  kBinary,   // occupied 1, free 0
};

// Ground-truth BEV observation of `map` seen from `pose`. Pixel centers are
// placed in the world through the pose and tested with the same geometry
// rules as the north-up rasterizer.
BevObservation render_observation(const VectorMap& map, const Pose& pose,
                                  const GridShape& shape = kDefaultBevShape,
                                  std::optional<double> sd_width =
                                      kDefaultRoadWidth,
                                  Encoding encoding = Encoding::kBipolar);

struct NoiseParams {
  double dropout_prob = 0.0;  // occupied -> free flips
  double logit_noise_sigma = 0.0;
  int occlusion_blocks = 0;
  int block_size = 16;  // pixels

  // Throws ConfigError on out-of-range values.
  void check() const;
};

// Dropout, additive Gaussian noise, then occlusion rectangles written as 0.
// Pure in (obs, noise, seed, encoding).
BevObservation corrupt(const BevObservation& obs, const NoiseParams& noise,
                       std::uint64_t seed,
                       Encoding encoding = Encoding::kBipolar);

struct Scenario {
  Pose gt;
  InitPrior prior;
  std::uint64_t seed = 0;
};

inline constexpr double kDefaultMaxOffset = 32.0;

// Ground truth uniform over the map bounds inset by `margin` (default:
// max_offset plus half the BEV extent), heading uniform in (-pi, pi], prior
// offset uniform in [-max_offset, max_offset]^2. Throws SamplingError when
// the inset region is empty.
Scenario sample_scenario(const VectorMap& map, std::uint64_t seed,
                         double max_offset = kDefaultMaxOffset,
                         std::optional<double> margin = {});

// JSON-lines: {"seed", "gt": {"x", "y", "theta"}, "prior": {"x", "y"}}.
std::string scenario_to_json_line(const Scenario& s);
Scenario scenario_from_json_line(const std::string& line);
void write_scenarios(const std::vector<Scenario>& scenarios,
                     const std::string& path);
std::vector<Scenario> read_scenarios(const std::string& path);

// Stateless 64-bit mixer for deriving per-item seeds from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                          std::uint64_t stream = 0);

}  // namespace bevmatch::synth

#endif  // BEVMATCH_SYNTH_HPP_
