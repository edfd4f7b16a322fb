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

#include "bevmatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "bevmatch/error.hpp"
#include "json.hpp"

namespace bevmatch::synth {
namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  if (!(hi > lo)) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Building rectangle(double x0, double y0, double x1, double y1) {
  return {{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}};
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                          std::uint64_t stream) {
  // splitmix64 finalizer over a combined state.
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1) +
                    0xbf58476d1ce4e5b9ULL * stream;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

VectorMap generate_map(std::uint64_t seed, const MapGenParams& p) {
  if (!(p.extent > 2.0 * p.tile_extent)) {
    throw GenerationError("map extent must exceed twice the tile extent");
  }
  if (!(p.spacing > 0.0) || !(p.jitter >= 0.0) ||
      !(p.jitter < 0.5 * p.spacing)) {
    throw GenerationError("need spacing > 0 and 0 <= jitter < spacing/2");
  }
  if (!(p.bend >= 0.0)) throw GenerationError("bend must be >= 0");
  if (p.lots_per_side < 1 || p.building_density < 0.0 ||
      p.building_density > 1.0 || p.edge_drop_prob < 0.0 ||
      p.edge_drop_prob >= 1.0) {
    throw GenerationError("invalid lot or probability parameters");
  }
  if (p.mode == MapMode::kHd &&
      !(p.hd_min_width > 0.0 && p.hd_max_width >= p.hd_min_width)) {
    throw GenerationError("invalid HD road width range");
  }
  const int cells = static_cast<int>(std::floor(p.extent / p.spacing));
  if (cells < 1) throw GenerationError("spacing larger than extent: no roads");

  Rng rng(seed);
  const int n = cells + 1;  // intersections per axis
  const double origin = -0.5 * cells * p.spacing;
  std::vector<Vec2> nodes(static_cast<std::size_t>(n) * n);
  auto node = [&nodes, n](int i, int j) -> Vec2& {
    return nodes[static_cast<std::size_t>(j) * n + i];
  };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      node(i, j) = {origin + i * p.spacing + uniform(rng, -p.jitter, p.jitter),
                    origin + j * p.spacing + uniform(rng, -p.jitter, p.jitter)};
    }
  }

  VectorMap map;
  map.mode = p.mode;
  std::bernoulli_distribution drop(p.edge_drop_prob);
  // Vertical roads (i fixed) then horizontal roads (j fixed); dropped edges
  // split a grid line into separate polylines.
  for (int axis = 0; axis < 2; ++axis) {
    for (int line = 0; line < n; ++line) {
      std::vector<Vec2> current;
      auto flush = [&]() {
        if (current.size() >= 2) {
          Road road{std::move(current), std::nullopt};
          if (p.mode == MapMode::kHd) {
            road.width = uniform(rng, p.hd_min_width, p.hd_max_width);
          }
          map.roads.push_back(std::move(road));
        }
        current.clear();
      };
      for (int t = 0; t < n; ++t) {
        const Vec2 v = axis == 0 ? node(line, t) : node(t, line);
        if (t > 0) {
          if (p.edge_drop_prob > 0.0 && drop(rng)) {
            flush();
          } else if (p.bend > 0.0) {
            // Perpendicular midpoint offset; the edge runs mostly along the
            // line direction, so the offset is along the other axis.
            const Vec2 prev = current.back();
            Vec2 mid = 0.5 * (prev + v);
            const double off = uniform(rng, -p.bend, p.bend);
            (axis == 0 ? mid.x : mid.y) += off;
            current.push_back(mid);
          }
        }
        current.push_back(v);
      }
      flush();
    }
  }
  if (map.roads.empty()) throw GenerationError("generated map has no roads");

  // Bent edges stray up to `bend` from the straight node-to-node line.
  const double clearance = p.road_clearance + p.bend;
  std::bernoulli_distribution occupied(p.building_density);
  for (int j = 0; j < cells; ++j) {
    for (int i = 0; i < cells; ++i) {
      const double x0 = std::max(node(i, j).x, node(i, j + 1).x) +
                        clearance;
      const double x1 = std::min(node(i + 1, j).x, node(i + 1, j + 1).x) -
                        clearance;
      const double y0 = std::max(node(i, j).y, node(i + 1, j).y) +
                        clearance;
      const double y1 = std::min(node(i, j + 1).y, node(i + 1, j + 1).y) -
                        clearance;
      if (!(x1 > x0 && y1 > y0)) continue;
      const double lot_w = (x1 - x0) / p.lots_per_side;
      const double lot_h = (y1 - y0) / p.lots_per_side;
      for (int ly = 0; ly < p.lots_per_side; ++ly) {
        for (int lx = 0; lx < p.lots_per_side; ++lx) {
          if (!occupied(rng)) continue;
          const double left = uniform(rng, 0.0, p.max_setback);
          const double right = uniform(rng, 0.0, p.max_setback);
          const double bottom = uniform(rng, 0.0, p.max_setback);
          const double top = uniform(rng, 0.0, p.max_setback);
          const double bx0 = x0 + lx * lot_w + left;
          const double bx1 = x0 + (lx + 1) * lot_w - right;
          const double by0 = y0 + ly * lot_h + bottom;
          const double by1 = y0 + (ly + 1) * lot_h - top;
          if (bx1 - bx0 < p.min_building_size ||
              by1 - by0 < p.min_building_size) {
            continue;
          }
          map.buildings.push_back(rectangle(bx0, by0, bx1, by1));
        }
      }
    }
  }
  validate(map);
  return map;
}

BevObservation render_observation(const VectorMap& map, const Pose& pose,
                                  const GridShape& shape,
                                  std::optional<double> sd_width,
                                  Encoding encoding) {
  const GridPlacement placement{shape.at({pose.x, pose.y}), pose.theta};
  const BinaryChannel roads = rasterize_roads(map, placement, sd_width);
  const BinaryChannel buildings = rasterize_buildings(map, placement);
  const float on = 1.0f;
  const float off = encoding == Encoding::kBipolar ? -1.0f : 0.0f;
  // The observation is ego-centered.
  Grid grid(shape.at({0.0, 0.0}), kNumChannels);
  auto fill = [&](const BinaryChannel& src, int c) {
    auto dst = grid.channel(c);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? on : off;
  };
  fill(roads, kRoads);
  fill(buildings, kBuildings);
  return BevObservation(std::move(grid));
}

void NoiseParams::check() const {
  if (!(dropout_prob >= 0.0 && dropout_prob <= 1.0)) {
    throw ConfigError("dropout probability must be in [0, 1]");
  }
  if (!(logit_noise_sigma >= 0.0) || !std::isfinite(logit_noise_sigma)) {
    throw ConfigError("noise sigma must be finite and >= 0");
  }
  if (occlusion_blocks < 0 || block_size < 0) {
    throw ConfigError("occlusion block count and size must be >= 0");
  }
}

BevObservation corrupt(const BevObservation& obs, const NoiseParams& noise,
                       std::uint64_t seed, Encoding encoding) {
  noise.check();
  Grid grid = obs.grid();
  Rng rng(seed);
  const float free_value = encoding == Encoding::kBipolar ? -1.0f : 0.0f;
  auto& data = grid.data();
  if (noise.dropout_prob > 0.0) {
    std::bernoulli_distribution flip(noise.dropout_prob);
    for (float& v : data) {
      // One draw per pixel keeps the stream independent of content.
      const bool f = flip(rng);
      if (v > 0.0f && f) v = free_value;
    }
  }
  if (noise.logit_noise_sigma > 0.0) {
    std::normal_distribution<double> gauss(0.0, noise.logit_noise_sigma);
    for (float& v : data) v = static_cast<float>(v + gauss(rng));
  }
  if (noise.occlusion_blocks > 0 && noise.block_size > 0) {
    const int h = grid.height();
    const int w = grid.width();
    const int bh = std::min(noise.block_size, h);
    const int bw = std::min(noise.block_size, w);
    std::uniform_int_distribution<int> row(0, h - bh);
    std::uniform_int_distribution<int> col(0, w - bw);
    for (int b = 0; b < noise.occlusion_blocks; ++b) {
      const int r0 = row(rng);
      const int c0 = col(rng);
      for (int c = 0; c < grid.channels(); ++c) {
        for (int r = r0; r < r0 + bh; ++r) {
          for (int k = c0; k < c0 + bw; ++k) grid.at(c, r, k) = 0.0f;
        }
      }
    }
  }
  return BevObservation(std::move(grid));
}

Scenario sample_scenario(const VectorMap& map, std::uint64_t seed,
                         double max_offset, std::optional<double> margin) {
  if (!(max_offset >= 0.0) || !std::isfinite(max_offset)) {
    throw ConfigError("max_offset must be finite and >= 0");
  }
  const double inset =
      margin.value_or(max_offset + 0.5 * kDefaultBevShape.height *
                                       kDefaultBevShape.resolution);
  const Box bounds = map_bounds(map);
  const double x0 = bounds.min.x + inset, x1 = bounds.max.x - inset;
  const double y0 = bounds.min.y + inset, y1 = bounds.max.y - inset;
  if (!(x1 > x0 && y1 > y0)) {
    throw SamplingError("map is too small for a sampling margin of " +
                        std::to_string(inset) + " m");
  }
  Rng rng(seed);
  Scenario s;
  s.seed = seed;
  s.gt.x = uniform(rng, x0, x1);
  s.gt.y = uniform(rng, y0, y1);
  // 1 - u lies in (0, 1], so theta lies in (-pi, pi].
  const double u = uniform(rng, 0.0, 1.0);
  s.gt.theta = -std::numbers::pi + 2.0 * std::numbers::pi * (1.0 - u);
  s.prior.position = {s.gt.x + uniform(rng, -max_offset, max_offset),
                      s.gt.y + uniform(rng, -max_offset, max_offset)};
  return s;
}

std::string scenario_to_json_line(const Scenario& s) {
  nlohmann::json j;
  j["seed"] = s.seed;
  j["gt"] = {{"x", s.gt.x}, {"y", s.gt.y}, {"theta", s.gt.theta}};
  j["prior"] = {{"x", s.prior.position.x}, {"y", s.prior.position.y}};
  return j.dump();
}

Scenario scenario_from_json_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    Scenario s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.gt = {j.at("gt").at("x").get<double>(), j.at("gt").at("y").get<double>(),
            j.at("gt").at("theta").get<double>()};
    s.prior.position = {j.at("prior").at("x").get<double>(),
                        j.at("prior").at("y").get<double>()};
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("scenario line: ") + e.what());
  }
}

void write_scenarios(const std::vector<Scenario>& scenarios,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (const Scenario& s : scenarios) out << scenario_to_json_line(s) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<Scenario> read_scenarios(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<Scenario> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(scenario_from_json_line(line));
  }
  return out;
}

}  // namespace bevmatch::synth
