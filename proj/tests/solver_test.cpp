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

#include "bevmatch/solver.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "bevmatch/error.hpp"
#include "bevmatch/synth.hpp"
#include "json.hpp"

namespace bevmatch {
namespace {

constexpr double kPi = std::numbers::pi;

BevObservation random_obs(int n, std::mt19937& rng, bool integers = false) {
  Grid g({n, n, 0.5, {}}, kNumChannels);
  std::uniform_int_distribution<int> small(-3, 3);
  std::uniform_real_distribution<float> real(-1.0f, 1.0f);
  for (float& v : g.data()) {
    v = integers ? static_cast<float>(small(rng)) : real(rng);
  }
  return BevObservation(g);
}

MapTile random_tile(int h, int w, std::mt19937& rng, Vec2 center = {}) {
  Grid g({h, w, 0.5, center}, kNumChannels);
  std::bernoulli_distribution bit(0.4);
  for (float& v : g.data()) v = bit(rng) ? 1.0f : 0.0f;
  return MapTile(g);
}

// Five nested loops straight from the definition, in double precision.
std::vector<double> naive_scores(const RotationStack& stack,
                                 const MapTile& tile) {
  const int hb = stack.spec.height, wb = stack.spec.width;
  const int hm = tile.spec().height, wm = tile.spec().width;
  std::vector<double> out(static_cast<std::size_t>(stack.k()) * hm * wm, 0.0);
  for (int k = 0; k < stack.k(); ++k) {
    for (int h = 0; h < hm; ++h) {
      for (int w = 0; w < wm; ++w) {
        double sum = 0.0;
        for (int c = 0; c < kNumChannels; ++c) {
          const auto kernel = stack.slice(c, k);
          for (int i = 0; i < hb; ++i) {
            for (int j = 0; j < wb; ++j) {
              const int tr = h + i - hb / 2, tc = w + j - wb / 2;
              if (tr < 0 || tr >= hm || tc < 0 || tc >= wm) continue;
              sum += kernel[i * wb + j] * tile.grid().at(c, tr, tc);
            }
          }
        }
        out[(static_cast<std::size_t>(k) * hm + h) * wm + w] = sum;
      }
    }
  }
  return out;
}

double max_abs(const std::vector<float>& v) {
  double m = 0;
  for (float x : v) m = std::max(m, std::abs(static_cast<double>(x)));
  return m;
}

SolverConfig config_k(int k) {
  SolverConfig c;
  c.k_rotations = k;
  c.threads = 1;
  return c;
}

TEST(RotationTest, AngleGrid) {
  const auto a = rotation_angles(256);
  ASSERT_EQ(a.size(), 256u);
  EXPECT_EQ(a[0], 0.0);
  EXPECT_NEAR(a[1], 1.40625 * kPi / 180.0, 1e-15);
  EXPECT_DOUBLE_EQ(a[128], kPi);
  for (double t : a) {
    EXPECT_GT(t, -kPi);
    EXPECT_LE(t, kPi);
  }
  EXPECT_THROW(rotation_angles(0), ConfigError);
}

TEST(RotationTest, ZeroIsIdentity) {
  std::mt19937 rng(1);
  const BevObservation obs = random_obs(10, rng);
  EXPECT_EQ(rotate_observation(obs, 0.0).data(), obs.grid().data());
}

TEST(RotationTest, QuarterTurnsArePermutations) {
  std::mt19937 rng(2);
  for (int n : {6, 7, 16}) {
    const BevObservation obs = random_obs(n, rng);
    const Grid q1 = rotate_observation(obs, kPi / 2);
    const Grid q2 = rotate_observation(obs, kPi);
    const Grid q3 = rotate_observation(obs, -kPi / 2);
    for (int c = 0; c < kNumChannels; ++c) {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const auto& in = obs.grid();
          ASSERT_EQ(q1.at(c, i, j), in.at(c, j, n - 1 - i));
          ASSERT_EQ(q2.at(c, i, j), in.at(c, n - 1 - i, n - 1 - j));
          ASSERT_EQ(q3.at(c, i, j), in.at(c, n - 1 - j, i));
        }
      }
    }
  }
}

TEST(RotationTest, AheadPointsNorthAtQuarterTurn) {
  Grid g({8, 8, 0.5, {}}, kNumChannels);
  g.at(kRoads, 3, 7) = 1.0f;  // ahead of the ego
  const Grid out = rotate_observation(BevObservation(g), kPi / 2);
  EXPECT_EQ(out.at(kRoads, 0, 3), 1.0f);
}

TEST(RotationTest, ConstantInteriorSurvivesAnyAngle) {
  Grid g({32, 32, 0.5, {}}, kNumChannels);
  std::ranges::fill(g.data(), 1.0f);
  const BevObservation obs(g);
  for (double t : {0.3, 1.0, -2.5, 3.1}) {
    const Grid out = rotate_observation(obs, t);
    for (int r = 0; r < 32; ++r) {
      for (int c = 0; c < 32; ++c) {
        const double d = std::hypot(r + 0.5 - 16, c + 0.5 - 16);
        if (d < 16 - 1.5) EXPECT_NEAR(out.at(0, r, c), 1.0f, 1e-6);
        if (d > 16 * std::sqrt(2.0) + 1) EXPECT_EQ(out.at(0, r, c), 0.0f);
      }
    }
  }
}

TEST(RotationTest, RejectsNonSquare) {
  const BevObservation obs(Grid({4, 6, 0.5, {}}, kNumChannels));
  EXPECT_THROW(rotate_observation(obs, 0.1), ConfigError);
}

TEST(RotationTest, StackLayout) {
  std::mt19937 rng(3);
  const BevObservation obs = random_obs(8, rng);
  const RotationStack stack = build_rotation_stack(obs, config_k(4));
  ASSERT_EQ(stack.k(), 4);
  for (int c = 0; c < kNumChannels; ++c) {
    for (int k = 0; k < 4; ++k) {
      const Grid rot = rotate_observation(obs, stack.angles[k]);
      EXPECT_TRUE(std::ranges::equal(stack.slice(c, k), rot.channel(c)));
    }
  }
}

TEST(CorrelateTest, BothBackendsMatchNaiveOracle) {
  std::mt19937 rng(4);
  std::uniform_int_distribution<int> dim(6, 19), bev(2, 7);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = bev(rng);
    const int hm = std::max(n, dim(rng)), wm = std::max(n, dim(rng));
    // Integer observation with quarter-turn K: every product is exact.
    const BevObservation obs = random_obs(n, rng, true);
    const MapTile tile = random_tile(hm, wm, rng);
    const RotationStack stack = build_rotation_stack(obs, config_k(4));
    const auto oracle = naive_scores(stack, tile);
    const ScoreVolume direct = correlate_direct(stack, tile, 1);
    const ScoreVolume fft = correlate_fft(stack, tile, 1);
    ASSERT_EQ(direct.data.size(), oracle.size());
    ASSERT_EQ(fft.data.size(), oracle.size());
    double scale = 1.0;
    for (double v : oracle) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      ASSERT_EQ(direct.data[i], oracle[i]) << trial << " " << i;
      ASSERT_NEAR(fft.data[i], oracle[i], 1e-5 * scale) << trial << " " << i;
    }
  }
}

TEST(CorrelateTest, DeltaKernelReproducesTile) {
  std::mt19937 rng(5);
  for (int n : {4, 5}) {
    Grid g({n, n, 0.5, {}}, kNumChannels);
    g.at(kRoads, n / 2, n / 2) = 1.0f;
    const MapTile tile = random_tile(12, 9, rng);
    const RotationStack stack =
        build_rotation_stack(BevObservation(g), config_k(1));
    for (const ScoreVolume& v :
         {correlate_direct(stack, tile, 1), correlate_fft(stack, tile, 1)}) {
      for (int r = 0; r < 12; ++r) {
        for (int c = 0; c < 9; ++c) {
          EXPECT_NEAR(v.at(0, r, c), tile.grid().at(kRoads, r, c), 1e-6);
        }
      }
    }
  }
}

TEST(CorrelateTest, FftMatchesDirectOnRealValues) {
  std::mt19937 rng(6);
  const BevObservation obs = random_obs(32, rng);
  const MapTile tile = random_tile(64, 64, rng);
  const RotationStack stack = build_rotation_stack(obs, config_k(8));
  const ScoreVolume a = correlate_direct(stack, tile, 0);
  const ScoreVolume b = correlate_fft(stack, tile, 0);
  const double tol = 1e-5 * std::max(1.0, max_abs(a.data));
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    ASSERT_NEAR(a.data[i], b.data[i], tol);
  }
}

TEST(CorrelateTest, ShapeErrors) {
  std::mt19937 rng(7);
  const RotationStack stack =
      build_rotation_stack(random_obs(16, rng), config_k(2));
  EXPECT_THROW(correlate_direct(stack, random_tile(8, 32, rng)), ShapeError);
  EXPECT_THROW(correlate_fft(stack, random_tile(32, 8, rng)), ShapeError);
  Grid g({32, 32, 1.0, {}}, kNumChannels);
  EXPECT_THROW(correlate_fft(stack, MapTile(g)), ShapeError);
}

TEST(CorrelateTest, TranslationEquivariance) {
  std::mt19937 rng(8);
  const BevObservation obs = random_obs(8, rng, true);
  const MapTile tile = random_tile(40, 40, rng);
  Grid shifted({40, 40, 0.5, {}}, kNumChannels);
  const int dy = 3, dx = -5;
  for (int c = 0; c < kNumChannels; ++c) {
    for (int r = 0; r < 40; ++r) {
      for (int col = 0; col < 40; ++col) {
        const int sr = r - dy, sc = col - dx;
        if (sr >= 0 && sr < 40 && sc >= 0 && sc < 40) {
          shifted.at(c, r, col) = tile.grid().at(c, sr, sc);
        }
      }
    }
  }
  const RotationStack stack = build_rotation_stack(obs, config_k(4));
  for (Backend backend : {Backend::kDirect, Backend::kFft}) {
    SolverConfig cfg = config_k(4);
    cfg.backend = backend;
    const ScoreVolume a = correlate(stack, tile, cfg);
    const ScoreVolume b = correlate(stack, MapTile(shifted), cfg);
    // Hypotheses whose window stays inside both tiles.
    for (int k = 0; k < 4; ++k) {
      for (int r = 4 + 8; r < 40 - 12; ++r) {
        for (int col = 4 + 8; col < 40 - 12; ++col) {
          ASSERT_NEAR(b.at(k, r + dy, col + dx), a.at(k, r, col), 1e-4);
        }
      }
    }
  }
}

TEST(CorrelateTest, QuarterTurnOfObservationShiftsHeadingIndex) {
  std::mt19937 rng(9);
  const BevObservation obs = random_obs(16, rng);
  const BevObservation turned(rotate_observation(obs, kPi / 2));
  const MapTile tile = random_tile(32, 32, rng);
  const int kk = 16;
  const ScoreVolume a =
      correlate_fft(build_rotation_stack(obs, config_k(kk)), tile, 1);
  const ScoreVolume b =
      correlate_fft(build_rotation_stack(turned, config_k(kk)), tile, 1);
  const double tol = 1e-4 * std::max(1.0, max_abs(a.data));
  for (int k = 0; k < kk; ++k) {
    for (std::size_t i = 0; i < a.slice_size(); ++i) {
      ASSERT_NEAR(b.data[k * a.slice_size() + i],
                  a.data[((k + kk / 4) % kk) * a.slice_size() + i], tol);
    }
  }
}

TEST(CorrelateTest, LinearInObservation) {
  std::mt19937 rng(10);
  const BevObservation obs = random_obs(12, rng, true);
  const MapTile tile = random_tile(24, 24, rng);
  Grid doubled = obs.grid(), roads = obs.grid(), buildings = obs.grid();
  for (float& v : doubled.data()) v *= 2.0f;
  apply_channel_mask(roads, ChannelMask::kRoads);
  apply_channel_mask(buildings, ChannelMask::kBuildings);
  auto scores = [&](const Grid& g) {
    return correlate_direct(
               build_rotation_stack(BevObservation(g), config_k(4)), tile, 1)
        .data;
  };
  const auto base = scores(obs.grid());
  const auto twice = scores(doubled);
  const auto r = scores(roads);
  const auto b = scores(buildings);
  for (std::size_t i = 0; i < base.size(); ++i) {
    ASSERT_EQ(twice[i], 2.0f * base[i]);
    ASSERT_EQ(r[i] + b[i], base[i]);
  }
}

ScoreVolume manual_volume(int k, int h, int w) {
  ScoreVolume v;
  v.tile_spec = {h, w, 0.5, {10.0, 20.0}};
  v.bev_height = 4;
  v.bev_width = 4;
  v.angles = rotation_angles(k);
  v.data.assign(static_cast<std::size_t>(k) * h * w, 0.0f);
  return v;
}

TEST(ExtractPoseTest, GridNodeConventions) {
  ScoreVolume v = manual_volume(4, 8, 8);
  v.data[(2 * 8 + 3) * 8 + 6] = 5.0f;
  SolverConfig cfg = config_k(4);
  cfg.search_radius.reset();
  const PoseEstimate e = extract_pose(v, cfg);
  EXPECT_EQ(e.k, 2);
  EXPECT_EQ(e.row, 3);
  EXPECT_EQ(e.col, 6);
  EXPECT_EQ(e.peak_score, 5.0);
  EXPECT_EQ(e.pose, (Pose{10.0 + 2 * 0.5, 20.0 + 1 * 0.5, kPi}));
  // Odd kernels sit half a pixel further along each axis.
  v.bev_height = v.bev_width = 5;
  EXPECT_EQ(v.pose_at(0, 4, 4), (Pose{10.25, 19.75, 0.0}));
}

TEST(ExtractPoseTest, TiesPickSmallestIndex) {
  ScoreVolume v = manual_volume(3, 6, 6);
  for (int k : {1, 2}) {
    v.data[(k * 6 + 4) * 6 + 1] = 1.0f;
    v.data[(k * 6 + 2) * 6 + 5] = 1.0f;
  }
  SolverConfig cfg = config_k(3);
  cfg.search_radius.reset();
  const PoseEstimate e = extract_pose(v, cfg);
  EXPECT_EQ(e.k, 1);
  EXPECT_EQ(e.row, 2);
  EXPECT_EQ(e.col, 5);
}

TEST(ExtractPoseTest, SearchRadiusMasksFarPeaks) {
  ScoreVolume v = manual_volume(1, 16, 16);
  v.data[0] = 10.0f;  // corner, far from the center
  v.data[9 * 16 + 8] = 1.0f;
  SolverConfig cfg = config_k(1);
  cfg.search_radius = 3.0;
  PoseEstimate e = extract_pose(v, cfg);
  EXPECT_EQ(e.row, 9);
  EXPECT_EQ(e.col, 8);
  cfg.search_radius.reset();
  e = extract_pose(v, cfg);
  EXPECT_EQ(e.row, 0);
  EXPECT_EQ(e.col, 0);
  cfg.search_radius = -1.0;
  EXPECT_THROW(extract_pose(v, cfg), ConfigError);
}

TEST(LikelihoodTest, NormalizedAndShiftInvariant) {
  std::mt19937 rng(11);
  std::normal_distribution<float> g(0.0f, 20.0f);
  ScoreVolume v = manual_volume(4, 10, 10);
  for (float& x : v.data) x = g(rng);
  const Likelihood a = likelihood(v);
  double sum = 0;
  for (double p : a.prob) sum += p;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  double hsum = 0;
  for (double p : a.heatmap) hsum += p;
  EXPECT_NEAR(hsum, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(a.max_prob, *std::ranges::max_element(a.prob));
  ScoreVolume shifted = v;
  for (float& x : shifted.data) x += 64.0f;
  const Likelihood b = likelihood(shifted);
  for (std::size_t i = 0; i < a.prob.size(); ++i) {
    ASSERT_NEAR(a.prob[i], b.prob[i], 1e-5 * a.max_prob);
  }
  const Likelihood s = likelihood_summary(v);
  EXPECT_DOUBLE_EQ(s.max_prob, a.max_prob);
  for (std::size_t i = 0; i < s.heatmap.size(); ++i) {
    EXPECT_NEAR(s.heatmap[i], a.heatmap[i], 1e-15);
  }
}

TEST(LikelihoodTest, LargeScoresDoNotOverflow) {
  ScoreVolume v = manual_volume(2, 4, 4);
  v.data[3] = 1e6f;
  const Likelihood l = likelihood(v);
  EXPECT_DOUBLE_EQ(l.max_prob, 1.0);
}

TEST(LocalizeTest, ZeroObservationIsUniform) {
  const VectorMap map = synth::generate_map(1);
  const BevObservation zero(Grid({32, 32, 0.5, {}}, kNumChannels));
  SolverConfig cfg = config_k(8);
  const Localization loc =
      localize_frame(zero, map, {{0, 0}}, cfg, 10.0, {64, 64, 0.5});
  EXPECT_EQ(loc.estimate.peak_score, 0.0);
  EXPECT_EQ(loc.estimate.k, 0);
  EXPECT_NEAR(loc.estimate.max_likelihood, 1.0 / (8 * 64 * 64), 1e-12);
}

TEST(LocalizeTest, RecoversRenderedPoseOnGridNode) {
  const VectorMap map = synth::generate_map(11);
  std::mt19937 rng(12);
  std::uniform_int_distribution<int> off(-40, 40), k(0, 63);
  for (int trial = 0; trial < 4; ++trial) {
    const synth::Scenario sc = synth::sample_scenario(map, trial);
    // Snap onto the hypothesis lattice of a tile centered on the prior.
    const Vec2 prior{std::round(sc.prior.position.x * 2) / 2,
                     std::round(sc.prior.position.y * 2) / 2};
    const Pose gt{prior.x + off(rng) * 0.5, prior.y + off(rng) * 0.5,
                  rotation_angles(64)[k(rng)]};
    const BevObservation obs = synth::render_observation(map, gt);
    SolverConfig cfg = config_k(64);
    cfg.threads = 0;
    const Localization loc = localize_frame(obs, map, {prior}, cfg);
    EXPECT_EQ(loc.estimate.pose, gt) << trial;
    EXPECT_GT(loc.estimate.max_likelihood, 0.0);
    EXPECT_EQ(loc.heatmap.size(), kDefaultTileShape.at({}).pixels());
  }
}

TEST(LocalizeTest, MaskedChannelsStillLocalize) {
  const VectorMap map = synth::generate_map(11);
  const Pose gt{20.0, -10.0, rotation_angles(32)[5]};
  const BevObservation obs = synth::render_observation(map, gt);
  const Localization loc = localize_frame(obs, map, {{12.0, -4.5}},
                                          config_k(32), 10.0, kDefaultTileShape,
                                          ChannelMask::kRoads);
  EXPECT_LT(std::hypot(loc.estimate.pose.x - gt.x,
                       loc.estimate.pose.y - gt.y), 1.0);
}

TEST(LocalizeTest, PoseJsonKeys) {
  PoseEstimate e{{1.5, -2.0, 0.25}, 3.0, 4, 5, 6, 0.125};
  const auto j = nlohmann::ordered_json::parse(pose_estimate_to_json(e));
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"x", "y", "theta_rad",
                                            "peak_score", "max_likelihood",
                                            "k", "row", "col"}));
  EXPECT_EQ(j["theta_rad"], 0.25);
  EXPECT_EQ(j["col"], 6);
}

TEST(BackendTest, ParseRoundTrip) {
  EXPECT_EQ(parse_backend("fft"), Backend::kFft);
  EXPECT_EQ(parse_backend(to_string(Backend::kDirect)), Backend::kDirect);
  EXPECT_THROW(parse_backend("gpu"), ConfigError);
}

}  // namespace
}  // namespace bevmatch
