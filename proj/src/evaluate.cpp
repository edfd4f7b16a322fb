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

#include "bevmatch/evaluate.hpp"

#include <chrono>
#include <cstdio>
#include <mutex>

#include "bevmatch/error.hpp"
#include "bevmatch/parallel.hpp"

namespace bevmatch {
namespace {

constexpr std::uint64_t kScenarioStream = 0;
constexpr std::uint64_t kNoiseStream = 1;

std::string num(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

std::string label(double t, const char* unit) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "R@%g%s", t, unit);
  return buf;
}

}  // namespace

synth::Scenario scenario_for(const VectorMap& map, const EvalConfig& config,
                             int index) {
  return synth::sample_scenario(
      map, synth::derive_seed(config.seed, index, kScenarioStream),
      config.max_offset);
}

EvalRun evaluate(const VectorMap& map, const EvalConfig& config,
                 const ProgressFn& progress) {
  if (config.scenarios < 1) throw ConfigError("need at least one scenario");
  config.solver.check();
  config.noise.check();
  EvalRun run;
  run.scenarios.resize(config.scenarios);
  run.frames.resize(config.scenarios);
  SolverConfig solver = config.solver;
  if (config.scenario_threads > 1) solver.threads = 1;
  std::mutex progress_mutex;
  int done = 0;

  parallel_for(config.scenarios, config.scenario_threads, [&](int, int i) {
    try {
      const synth::Scenario s = scenario_for(map, config, i);
      BevObservation obs = synth::render_observation(
          map, s.gt, config.bev_shape, config.sd_width, config.encoding);
      obs = synth::corrupt(obs, config.noise,
                           synth::derive_seed(config.seed, i, kNoiseStream),
                           config.encoding);
      const auto t0 = std::chrono::steady_clock::now();
      const Localization loc =
          localize_frame(obs, map, s.prior, solver, config.sd_width,
                         config.tile_shape, config.channels);
      const double secs = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
      run.scenarios[i] = s;
      run.frames[i] =
          metrics::make_frame_result(s.seed, s.gt, loc.estimate.pose, secs);
    } catch (const Error& e) {
      throw Error("scenario " + std::to_string(i) + ": " + e.what());
    }
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(++done, config.scenarios);
    }
  });
  run.report = metrics::aggregate(run.frames);
  return run;
}

std::map<std::string, std::string> config_echo(const EvalConfig& c) {
  return {
      {"tile_size", std::to_string(c.tile_shape.height)},
      {"bev_size", std::to_string(c.bev_shape.height)},
      {"resolution", num(c.tile_shape.resolution, 3)},
      {"k", std::to_string(c.solver.k_rotations)},
      {"backend", to_string(c.solver.backend)},
      {"search_radius",
       c.solver.search_radius ? num(*c.solver.search_radius, 2) : "none"},
      {"road_width", num(c.sd_width, 3)},
      {"max_offset", num(c.max_offset, 3)},
      {"channels", to_string(c.channels)},
      {"scenarios", std::to_string(c.scenarios)},
      {"seed", std::to_string(c.seed)},
      {"dropout", num(c.noise.dropout_prob, 3)},
      {"noise_sigma", num(c.noise.logit_noise_sigma, 3)},
      {"occlusion_blocks", std::to_string(c.noise.occlusion_blocks)},
      {"block_size", std::to_string(c.noise.block_size)},
      {"encoding",
       c.encoding == synth::Encoding::kBipolar ? "bipolar" : "binary"},
  };
}

void write_sweep_table(std::ostream& out, const std::string& header,
                       const std::vector<SweepRow>& rows) {
  if (rows.empty()) return;
  const auto& first = rows.front().report;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-10s", header.c_str());
  out << buf;
  for (const auto& [t, v] : first.recall_at_m) {
    std::snprintf(buf, sizeof(buf), "%9s", label(t, "m").c_str());
    out << buf;
  }
  for (const auto& [t, v] : first.recall_at_deg) {
    std::snprintf(buf, sizeof(buf), "%9s", label(t, "deg").c_str());
    out << buf;
  }
  out << "   APE(m) AOE(deg)\n";
  for (const SweepRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-10s", row.label.c_str());
    out << buf;
    for (const auto& [t, v] : row.report.recall_at_m) {
      std::snprintf(buf, sizeof(buf), "%9.2f", 100.0 * v);
      out << buf;
    }
    for (const auto& [t, v] : row.report.recall_at_deg) {
      std::snprintf(buf, sizeof(buf), "%9.2f", 100.0 * v);
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), "%9.2f%9.2f\n", row.report.ape_mean,
                  row.report.aoe_mean);
    out << buf;
  }
}

void write_sweep_csv(std::ostream& out, const std::string& header,
                     const std::vector<SweepRow>& rows) {
  if (rows.empty()) return;
  out << header;
  for (const auto& [t, v] : rows.front().report.recall_at_m) {
    out << ',' << label(t, "m");
  }
  for (const auto& [t, v] : rows.front().report.recall_at_deg) {
    out << ',' << label(t, "deg");
  }
  out << ",ape_m,aoe_deg,frames\n";
  for (const SweepRow& row : rows) {
    out << row.label;
    for (const auto& [t, v] : row.report.recall_at_m) out << ',' << num(v);
    for (const auto& [t, v] : row.report.recall_at_deg) out << ',' << num(v);
    out << ',' << num(row.report.ape_mean) << ',' << num(row.report.aoe_mean)
        << ',' << row.report.frame_count << '\n';
  }
}

}  // namespace bevmatch
