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

#ifndef BEVMATCH_METRICS_HPP_
#define BEVMATCH_METRICS_HPP_

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "bevmatch/pose.hpp"

namespace bevmatch::metrics {

// Euclidean planar distance, meters.
double position_error(const Pose& est, const Pose& gt);
// Wrapped heading difference in degrees, in [0, 180].
double orientation_error(const Pose& est, const Pose& gt);

struct FrameResult {
  std::uint64_t seed = 0;
  Pose gt;
  Pose est;
  double position_error = 0.0;
  double orientation_error = 0.0;
  double solve_time = 0.0;  // seconds
};

FrameResult make_frame_result(std::uint64_t seed, const Pose& gt,
                              const Pose& est, double solve_time);

struct Thresholds {
  std::vector<double> meters{1.0, 2.0, 5.0, 10.0};
  std::vector<double> degrees{1.0, 2.0, 5.0, 10.0};
};

struct MetricsReport {
  // Fraction of frames with error strictly below each threshold.
  std::map<double, double> recall_at_m;
  std::map<double, double> recall_at_deg;
  double ape_mean = 0.0;
  double aoe_mean = 0.0;
  double ape_median = 0.0;
  double aoe_median = 0.0;
  double mean_solve_time = 0.0;
  std::size_t frame_count = 0;
};

// Throws InvalidInputError for an empty result list.
MetricsReport aggregate(const std::vector<FrameResult>& results,
                        const Thresholds& thresholds = {});

// Per-frame CSV followed by a "# summary" block of key,value rows. Numbers
// use fixed precision so repeated runs are byte-identical.
void write_csv(std::ostream& out, const std::vector<FrameResult>& results,
               const MetricsReport& report,
               const std::map<std::string, std::string>& config_echo = {});

}  // namespace bevmatch::metrics

#endif  // BEVMATCH_METRICS_HPP_
