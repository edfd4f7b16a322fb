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

#ifndef BEVMATCH_EVALUATE_HPP_
#define BEVMATCH_EVALUATE_HPP_

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "bevmatch/metrics.hpp"
#include "bevmatch/raster.hpp"
#include "bevmatch/solver.hpp"
#include "bevmatch/synth.hpp"

namespace bevmatch {

// One synthetic evaluation run: sample scenarios on a map, render and
// corrupt ground-truth observations, localize each against the prior tile.
struct EvalConfig {
  GridShape tile_shape = kDefaultTileShape;
  GridShape bev_shape = kDefaultBevShape;
  SolverConfig solver;
  synth::NoiseParams noise;
  synth::Encoding encoding = synth::Encoding::kBipolar;
  int scenarios = 200;
  std::uint64_t seed = 0;
  ChannelMask channels = ChannelMask::kBoth;
  double sd_width = kDefaultRoadWidth;
  double max_offset = synth::kDefaultMaxOffset;
  // Scenarios solved concurrently. Each solve then runs single-threaded.
  int scenario_threads = 1;
};

struct EvalRun {
  std::vector<synth::Scenario> scenarios;
  std::vector<metrics::FrameResult> frames;  // ordered by scenario index
  metrics::MetricsReport report;
};

using ProgressFn = std::function<void(int done, int total)>;

EvalRun evaluate(const VectorMap& map, const EvalConfig& config,
                 const ProgressFn& progress = {});

// Scenario i of a run; exposed so tools can reproduce single frames.
synth::Scenario scenario_for(const VectorMap& map, const EvalConfig& config,
                             int index);

std::map<std::string, std::string> config_echo(const EvalConfig& config);

struct SweepRow {
  std::string label;
  metrics::MetricsReport report;
};

// Fixed-width table with one row per sweep value, recall columns for each
// threshold plus APE and AOE.
void write_sweep_table(std::ostream& out, const std::string& header,
                       const std::vector<SweepRow>& rows);
void write_sweep_csv(std::ostream& out, const std::string& header,
                     const std::vector<SweepRow>& rows);

}  // namespace bevmatch

#endif  // BEVMATCH_EVALUATE_HPP_
