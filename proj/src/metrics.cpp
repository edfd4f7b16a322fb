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

#include "bevmatch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "bevmatch/error.hpp"

namespace bevmatch::metrics {
namespace {

double median(std::vector<double> v) {
  std::ranges::sort(v);
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fixed(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

std::string threshold_name(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", t);
  return buf;
}

}  // namespace

double position_error(const Pose& est, const Pose& gt) {
  return std::hypot(est.x - gt.x, est.y - gt.y);
}

double orientation_error(const Pose& est, const Pose& gt) {
  const double d = std::abs(wrap_angle(est.theta - gt.theta));
  const double rad = std::min(d, 2.0 * std::numbers::pi - d);
  return std::clamp(rad * 180.0 / std::numbers::pi, 0.0, 180.0);
}

FrameResult make_frame_result(std::uint64_t seed, const Pose& gt,
                              const Pose& est, double solve_time) {
  return {seed, gt, est, position_error(est, gt), orientation_error(est, gt),
          solve_time};
}

MetricsReport aggregate(const std::vector<FrameResult>& results,
                        const Thresholds& thresholds) {
  if (results.empty()) throw InvalidInputError("no frames to aggregate");
  MetricsReport report;
  report.frame_count = results.size();
  const double n = static_cast<double>(results.size());
  std::vector<double> pos, ori;
  double time = 0.0;
  for (const FrameResult& r : results) {
    pos.push_back(r.position_error);
    ori.push_back(r.orientation_error);
    time += r.solve_time;
  }
  auto recall = [n](const std::vector<double>& errors, double t) {
    return static_cast<double>(std::ranges::count_if(
               errors, [t](double e) { return e < t; })) /
           n;
  };
  for (double t : thresholds.meters) report.recall_at_m[t] = recall(pos, t);
  for (double t : thresholds.degrees) report.recall_at_deg[t] = recall(ori, t);
  double ps = 0.0, os = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    ps += pos[i];
    os += ori[i];
  }
  report.ape_mean = ps / n;
  report.aoe_mean = os / n;
  report.ape_median = median(pos);
  report.aoe_median = median(ori);
  report.mean_solve_time = time / n;
  return report;
}

void write_csv(std::ostream& out, const std::vector<FrameResult>& results,
               const MetricsReport& report,
               const std::map<std::string, std::string>& config_echo) {
  out << "index,seed,gt_x,gt_y,gt_theta,est_x,est_y,est_theta,"
         "position_error_m,orientation_error_deg,solve_time_s\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const FrameResult& r = results[i];
    out << i << ',' << r.seed << ',' << fixed(r.gt.x) << ',' << fixed(r.gt.y)
        << ',' << fixed(r.gt.theta) << ',' << fixed(r.est.x) << ','
        << fixed(r.est.y) << ',' << fixed(r.est.theta) << ','
        << fixed(r.position_error) << ',' << fixed(r.orientation_error) << ','
        << fixed(r.solve_time, 4) << '\n';
  }
  out << "# summary\n";
  out << "frame_count," << report.frame_count << '\n';
  for (const auto& [t, v] : report.recall_at_m) {
    out << "recall_at_" << threshold_name(t) << "m," << fixed(v, 4) << '\n';
  }
  for (const auto& [t, v] : report.recall_at_deg) {
    out << "recall_at_" << threshold_name(t) << "deg," << fixed(v, 4) << '\n';
  }
  out << "ape_mean_m," << fixed(report.ape_mean, 4) << '\n';
  out << "aoe_mean_deg," << fixed(report.aoe_mean, 4) << '\n';
  out << "ape_median_m," << fixed(report.ape_median, 4) << '\n';
  out << "aoe_median_deg," << fixed(report.aoe_median, 4) << '\n';
  for (const auto& [k, v] : config_echo) out << "config." << k << ',' << v << '\n';
}

}  // namespace bevmatch::metrics
