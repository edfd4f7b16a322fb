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

#ifndef BEVMATCH_SOLVER_HPP_
#define BEVMATCH_SOLVER_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bevmatch/pose.hpp"
#include "bevmatch/raster.hpp"
#include "bevmatch/vecmap.hpp"

namespace bevmatch {

enum class Backend { kDirect, kFft };

Backend parse_backend(const std::string& s);
std::string to_string(Backend backend);

// Covers the corners of a +/-32 m square prior at 0.5 m/px: ceil(64 * sqrt 2).
inline constexpr double kDefaultSearchRadius = 91.0;

struct SolverConfig {
  int k_rotations = 256;
  Backend backend = Backend::kFft;
  // Argmax is restricted to hypotheses within this many tile pixels of the
  // tile center; unset searches the whole tile.
  std::optional<double> search_radius = kDefaultSearchRadius;
  // Worker threads for correlation; 0 uses the hardware concurrency.
  int threads = 0;

  void check() const;
};

// Heading hypotheses 2*pi*k/K wrapped into (-pi, pi]; angles[0] == 0.
std::vector<double> rotation_angles(int k_rotations);

// Observation resampled north-up for each heading hypothesis.
// Layout [channel][k][row][col].
struct RotationStack {
  GridSpec spec;
  std::vector<double> angles;
  std::vector<float> data;

  int k() const { return static_cast<int>(angles.size()); }
  std::span<const float> slice(int channel, int k) const {
    const std::size_t n = spec.pixels();
    return {data.data() + (static_cast<std::size_t>(channel) * angles.size() +
                           static_cast<std::size_t>(k)) * n,
            n};
  }
};

// Correlation scores indexed [k][row][col] over the matched tile. Entry
// (k, row, col) scores the ego sitting at the grid node that the kernel
// center lands on, with heading angles[k].
struct ScoreVolume {
  GridSpec tile_spec;
  int bev_height = 0;
  int bev_width = 0;
  std::vector<double> angles;
  std::vector<float> data;

  int k() const { return static_cast<int>(angles.size()); }
  std::size_t slice_size() const { return tile_spec.pixels(); }
  float at(int k, int row, int col) const {
    return data[(static_cast<std::size_t>(k) * tile_spec.height + row) *
                    tile_spec.width + col];
  }
  // World pose of hypothesis (k, row, col).
  Pose pose_at(int k, int row, int col) const;
};

struct PoseEstimate {
  Pose pose;
  double peak_score = 0.0;
  int k = 0;
  int row = 0;
  int col = 0;
  double max_likelihood = 0.0;
};

// North-up resampling of a square ego-frame observation under heading
// hypothesis theta. Bilinear; samples falling outside the observation read
// as 0. Throws ConfigError for non-square observations.
Grid rotate_observation(const BevObservation& obs, double theta);

RotationStack build_rotation_stack(const BevObservation& obs,
                                   const SolverConfig& config);

// M[k,h,w] = sum_{c,i,j} stack[c,k,i,j] * tile[c, h+i-H/2, w+j-W/2], with
// tile reads outside the tile taken as 0. Throws ShapeError when the tile is
// smaller than the observation or the resolutions differ.
ScoreVolume correlate_direct(const RotationStack& stack, const MapTile& tile,
                             int threads = 0);
// Same volume through zero-padded frequency-domain correlation.
ScoreVolume correlate_fft(const RotationStack& stack, const MapTile& tile,
                          int threads = 0);
ScoreVolume correlate(const RotationStack& stack, const MapTile& tile,
                      const SolverConfig& config);

// Argmax over (k, row, col) inside the search disc. Ties go to the smallest
// k, then row, then col. max_likelihood is left at 0.
PoseEstimate extract_pose(const ScoreVolume& volume,
                          const SolverConfig& config);

struct Likelihood {
  std::vector<double> prob;     // softmax over the whole volume, [k][h][w]
  std::vector<double> heatmap;  // prob summed over k, [h][w]
  double max_prob = 0.0;
};

Likelihood likelihood(const ScoreVolume& volume);
// Heatmap and peak probability without materializing the full volume.
Likelihood likelihood_summary(const ScoreVolume& volume);

struct Localization {
  PoseEstimate estimate;
  GridSpec tile_spec;
  std::vector<double> heatmap;
};

// Queries the tile around the prior, matches the observation against it and
// returns the best pose with its likelihood summary. The channel mask is
// applied to both tile and observation.
Localization localize_frame(const BevObservation& obs, const VectorMap& map,
                            const InitPrior& prior, const SolverConfig& config,
                            std::optional<double> sd_width = kDefaultRoadWidth,
                            const GridShape& tile_shape = kDefaultTileShape,
                            ChannelMask mask = ChannelMask::kBoth);
Localization localize_in_tile(const BevObservation& obs, const MapTile& tile,
                              const SolverConfig& config);

// {"x","y","theta_rad","peak_score","max_likelihood","k","row","col"}
std::string pose_estimate_to_json(const PoseEstimate& estimate);

}  // namespace bevmatch

#endif  // BEVMATCH_SOLVER_HPP_
