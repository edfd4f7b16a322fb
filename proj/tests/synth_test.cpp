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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "bevmatch/error.hpp"

namespace bevmatch::synth {
namespace {

constexpr double kPi = std::numbers::pi;

TEST(GenerateMapTest, SameSeedSameMap) {
  EXPECT_EQ(generate_map(42), generate_map(42));
  EXPECT_NE(generate_map(42), generate_map(43));
}

TEST(GenerateMapTest, RegularGridCounts) {
  MapGenParams p;
  p.jitter = 0.0;
  p.bend = 0.0;
  p.edge_drop_prob = 0.0;
  p.building_density = 1.0;
  const VectorMap map = generate_map(1, p);
  // floor(480 / 64) = 7 cells: 8 lines per axis, 7 x 7 blocks of 2 x 2 lots.
  EXPECT_EQ(map.roads.size(), 16u);
  EXPECT_EQ(map.buildings.size(), 196u);
  for (const Road& r : map.roads) EXPECT_EQ(r.centerline.size(), 8u);
}

TEST(GenerateMapTest, BuildingsStayClearOfRoads) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    MapGenParams p;
    p.mode = MapMode::kHd;
    const VectorMap map = generate_map(seed, p);
    const GridSpec spec = GridShape{960, 960, 0.5}.at({0, 0});
    const BinaryChannel roads = rasterize_roads(map, spec, std::nullopt);
    const BinaryChannel buildings = rasterize_buildings(map, spec);
    std::size_t overlap = 0, built = 0;
    for (std::size_t i = 0; i < roads.size(); ++i) {
      overlap += roads[i] & buildings[i];
      built += buildings[i];
    }
    EXPECT_EQ(overlap, 0u) << seed;
    EXPECT_GT(built, 0u);
  }
}

TEST(GenerateMapTest, RejectsImpossibleParams) {
  MapGenParams p;
  p.extent = 200.0;
  EXPECT_THROW(generate_map(0, p), GenerationError);
  p = {};
  p.jitter = 40.0;
  EXPECT_THROW(generate_map(0, p), GenerationError);
  p = {};
  p.building_density = 1.5;
  EXPECT_THROW(generate_map(0, p), GenerationError);
}

TEST(RenderTest, NorthUpMatchesTileCrop) {
  const VectorMap map = generate_map(7);
  const Pose pose{12.25, -30.5, 0.0};
  const BevObservation obs =
      render_observation(map, pose, kDefaultBevShape, 10.0, Encoding::kBinary);
  const MapTile tile =
      query_tile(map, {{pose.x, pose.y}}, kDefaultBevShape, 10.0);
  EXPECT_EQ(obs.grid().data(), tile.grid().data());
  EXPECT_EQ(obs.spec().center, (Vec2{0, 0}));
}

TEST(RenderTest, HeadingNorthPutsEastOnTheRight) {
  VectorMap vertical;
  vertical.roads.push_back({{{0, -100}, {0, 100}}, std::nullopt});
  // A building east of the origin.
  vertical.buildings.push_back({{{10, -2}, {14, -2}, {14, 2}, {10, 2}}});
  VectorMap horizontal;
  horizontal.roads.push_back({{{-100, 0}, {100, 0}}, std::nullopt});
  horizontal.buildings.push_back({{{-2, -14}, {2, -14}, {2, -10}, {-2, -10}}});
  const GridShape shape{64, 64, 0.5};
  const BevObservation a =
      render_observation(vertical, {0, 0, kPi / 2}, shape, 10.0);
  const BevObservation b = render_observation(horizontal, {0, 0, 0}, shape, 10.0);
  EXPECT_EQ(a.grid().data(), b.grid().data());
  // Right of the vehicle is below the grid center.
  EXPECT_EQ(a.grid().at(kBuildings, 32 + 24, 32), 1.0f);
  EXPECT_EQ(a.grid().at(kBuildings, 32 - 24, 32), -1.0f);
}

TEST(RenderTest, EmptyMapRendersAllFree) {
  const BevObservation obs = render_observation(VectorMap{}, {0, 0, 1.0});
  EXPECT_TRUE(std::ranges::all_of(obs.grid().data(),
                                  [](float v) { return v == -1.0f; }));
}

TEST(RenderTest, PoseEquivariance) {
  const VectorMap map = generate_map(3);
  VectorMap moved = map;
  // Quarter turn plus a dyadic translation.
  auto move = [](Vec2 p) { return Vec2{-p.y + 16.5, p.x - 8.25}; };
  for (Road& r : moved.roads) {
    for (Vec2& p : r.centerline) p = move(p);
  }
  for (Building& b : moved.buildings) {
    for (Vec2& p : b.boundary) p = move(p);
  }
  const GridShape shape{96, 96, 0.5};
  for (double theta : {0.0, 0.3, -2.0, 3.0}) {
    const Pose pose{20.0, -15.0, theta};
    const Vec2 q = move({pose.x, pose.y});
    const BevObservation a = render_observation(map, pose, shape);
    const BevObservation b = render_observation(
        moved, {q.x, q.y, wrap_angle(theta + kPi / 2)}, shape);
    std::size_t diff = 0;
    for (std::size_t i = 0; i < a.grid().data().size(); ++i) {
      diff += a.grid().data()[i] != b.grid().data()[i];
    }
    // Generic angles may flip pixel centers lying on an edge.
    EXPECT_LE(diff, a.grid().data().size() / 1000) << theta;
  }
}

BevObservation all_occupied(int n) {
  Grid g({n, n, 0.5, {}}, kNumChannels);
  std::ranges::fill(g.data(), 1.0f);
  return BevObservation(g);
}

TEST(CorruptTest, ZeroNoiseIsIdentity) {
  const BevObservation obs = render_observation(generate_map(1), {0, 0, 0.4});
  EXPECT_EQ(corrupt(obs, {}, 9).grid(), obs.grid());
}

TEST(CorruptTest, FullDropoutFreesEverything) {
  const BevObservation out = corrupt(all_occupied(32), {1.0, 0, 0, 16}, 1);
  EXPECT_TRUE(std::ranges::all_of(out.grid().data(),
                                  [](float v) { return v == -1.0f; }));
  const BevObservation bin =
      corrupt(all_occupied(32), {1.0, 0, 0, 16}, 1, Encoding::kBinary);
  EXPECT_TRUE(std::ranges::all_of(bin.grid().data(),
                                  [](float v) { return v == 0.0f; }));
}

TEST(CorruptTest, DropoutRateWithinThreeSigma) {
  const int n = 128;
  const double p = 0.3;
  const BevObservation out = corrupt(all_occupied(n), {p, 0, 0, 16}, 77);
  double flipped = 0;
  for (float v : out.grid().data()) flipped += v < 0.0f;
  const double total = 2.0 * n * n;
  EXPECT_NEAR(flipped, p * total, 3.0 * std::sqrt(total * p * (1 - p)));
}

TEST(CorruptTest, FreePixelsNeverFlip) {
  Grid g({16, 16, 0.5, {}}, kNumChannels);
  std::ranges::fill(g.data(), -1.0f);
  EXPECT_EQ(corrupt(BevObservation(g), {0.9, 0, 0, 16}, 4).grid(), g);
}

TEST(CorruptTest, OcclusionBlocksAreZero) {
  const BevObservation out = corrupt(all_occupied(64), {0, 0, 1, 16}, 5);
  std::size_t zeros = 0;
  for (float v : out.grid().data()) zeros += v == 0.0f;
  EXPECT_EQ(zeros, 2u * 16 * 16);
}

TEST(CorruptTest, DeterministicInSeed) {
  const NoiseParams noise{0.2, 0.5, 3, 8};
  const BevObservation obs = all_occupied(32);
  EXPECT_EQ(corrupt(obs, noise, 3).grid(), corrupt(obs, noise, 3).grid());
  EXPECT_NE(corrupt(obs, noise, 3).grid(), corrupt(obs, noise, 4).grid());
  EXPECT_THROW(corrupt(obs, {1.5, 0, 0, 16}, 1), ConfigError);
  EXPECT_THROW(corrupt(obs, {0, -1, 0, 16}, 1), ConfigError);
}

TEST(ScenarioTest, ZeroOffsetPriorIsGroundTruth) {
  const VectorMap map = generate_map(2);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Scenario sc = sample_scenario(map, s, 0.0);
    EXPECT_EQ(sc.prior.position, (Vec2{sc.gt.x, sc.gt.y}));
  }
}

TEST(ScenarioTest, SampleRanges) {
  const VectorMap map = generate_map(2);
  const Box box = map_bounds(map);
  const double margin = 32.0 + 32.0;
  int quadrant[4] = {};
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const Scenario sc = sample_scenario(map, derive_seed(5, s));
    ASSERT_GT(sc.gt.theta, -kPi);
    ASSERT_LE(sc.gt.theta, kPi);
    ASSERT_GE(sc.gt.x, box.min.x + margin);
    ASSERT_LE(sc.gt.x, box.max.x - margin);
    ASSERT_GE(sc.gt.y, box.min.y + margin);
    ASSERT_LE(sc.gt.y, box.max.y - margin);
    ASSERT_LE(std::abs(sc.prior.position.x - sc.gt.x), 32.0);
    ASSERT_LE(std::abs(sc.prior.position.y - sc.gt.y), 32.0);
    ++quadrant[(sc.gt.theta > 0) * 2 + (std::abs(sc.gt.theta) > kPi / 2)];
  }
  for (int q : quadrant) EXPECT_GT(q, 2200);
}

TEST(ScenarioTest, DeterministicAndRoundTrips) {
  const VectorMap map = generate_map(2);
  std::vector<Scenario> all;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Scenario a = sample_scenario(map, s);
    const Scenario b = sample_scenario(map, s);
    EXPECT_EQ(a.gt, b.gt);
    EXPECT_EQ(a.prior.position, b.prior.position);
    all.push_back(a);
  }
  const auto path =
      (std::filesystem::temp_directory_path() / "bevmatch_sc.jsonl").string();
  write_scenarios(all, path);
  const auto back = read_scenarios(path);
  ASSERT_EQ(back.size(), all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    EXPECT_EQ(back[i].gt, all[i].gt);
    EXPECT_EQ(back[i].prior.position, all[i].prior.position);
    EXPECT_EQ(back[i].seed, all[i].seed);
  }
  EXPECT_THROW(scenario_from_json_line("{\"seed\": 1}"), FormatError);
}

TEST(ScenarioTest, TinyMapCannotBeSampled) {
  VectorMap map;
  map.roads.push_back({{{0, 0}, {50, 50}}, std::nullopt});
  EXPECT_THROW(sample_scenario(map, 1), SamplingError);
  EXPECT_THROW(sample_scenario(VectorMap{}, 1), EmptyMapError);
}

TEST(DeriveSeedTest, StreamsAndIndicesDiffer) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 0), derive_seed(1, 2, 1));
  EXPECT_NE(derive_seed(1, 2, 0), derive_seed(1, 3, 0));
  EXPECT_NE(derive_seed(1, 2, 0), derive_seed(2, 2, 0));
}

}  // namespace
}  // namespace bevmatch::synth
