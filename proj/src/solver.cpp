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

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

#include "bevmatch/error.hpp"
#include "bevmatch/parallel.hpp"
#include "json.hpp"

namespace bevmatch {
namespace {

double snap_unit(double v) { return std::abs(v) < 1e-15 ? 0.0 : v; }

// Sample coordinates this close to a pixel center are treated as exact so
// quarter-turn rotations reduce to index permutations.
double snap_coord(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

void check_square(const GridSpec& spec) {
  if (spec.height != spec.width) {
    throw ConfigError("observation must be square, got " +
                      std::to_string(spec.height) + "x" +
                      std::to_string(spec.width));
  }
}

void check_match(const RotationStack& stack, const MapTile& tile) {
  const GridSpec& ts = tile.spec();
  if (stack.angles.empty()) throw ShapeError("rotation stack is empty");
  if (stack.data.size() !=
      static_cast<std::size_t>(kNumChannels) * stack.angles.size() *
          stack.spec.pixels()) {
    throw ShapeError("rotation stack data does not match its dimensions");
  }
  if (ts.height < stack.spec.height || ts.width < stack.spec.width) {
    throw ShapeError("tile " + std::to_string(ts.height) + "x" +
                     std::to_string(ts.width) +
                     " is smaller than observation " +
                     std::to_string(stack.spec.height) + "x" +
                     std::to_string(stack.spec.width));
  }
  const double rel = std::abs(ts.resolution - stack.spec.resolution) /
                     std::max(ts.resolution, stack.spec.resolution);
  if (rel > 1e-6) {
    std::ostringstream os;
    os << "tile resolution " << ts.resolution
       << " differs from observation resolution " << stack.spec.resolution;
    throw ShapeError(os.str());
  }
}

ScoreVolume empty_volume(const RotationStack& stack, const MapTile& tile) {
  ScoreVolume v;
  v.tile_spec = tile.spec();
  v.bev_height = stack.spec.height;
  v.bev_width = stack.spec.width;
  v.angles = stack.angles;
  v.data.assign(stack.angles.size() * tile.spec().pixels(), 0.0f);
  return v;
}

bool all_zero(std::span<const float> values) {
  return std::ranges::all_of(values, [](float v) { return v == 0.0f; });
}

// 16-lane float vector; lowered to whatever SIMD width the target has.
typedef float Lanes __attribute__((vector_size(64)));
constexpr int kLanes = 16;
constexpr int kBlock = 4 * kLanes;
constexpr int kRows = 4;

inline Lanes load_lanes(const float* p) {
  Lanes v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

// ---- FFT plumbing ---------------------------------------------------------

int good_fft_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int f : {2, 3, 5, 7}) {
      while (r % f == 0) r /= f;
    }
    if (r == 1) return m;
  }
}

struct FloatBuffer {
  explicit FloatBuffer(std::size_t n)
      : ptr(static_cast<float*>(fftwf_malloc(sizeof(float) * n))), size(n) {
    if (ptr == nullptr) throw std::bad_alloc();
    std::fill(ptr, ptr + n, 0.0f);
  }
  ~FloatBuffer() { fftwf_free(ptr); }
  FloatBuffer(const FloatBuffer&) = delete;
  FloatBuffer& operator=(const FloatBuffer&) = delete;

  float* ptr;
  std::size_t size;
};

struct ComplexBuffer {
  explicit ComplexBuffer(std::size_t n)
      : ptr(static_cast<fftwf_complex*>(
            fftwf_malloc(sizeof(fftwf_complex) * n))),
        size(n) {
    if (ptr == nullptr) throw std::bad_alloc();
    std::fill(reinterpret_cast<float*>(ptr),
              reinterpret_cast<float*>(ptr) + 2 * n, 0.0f);
  }
  ~ComplexBuffer() { fftwf_free(ptr); }
  ComplexBuffer(const ComplexBuffer&) = delete;
  ComplexBuffer& operator=(const ComplexBuffer&) = delete;

  fftwf_complex* ptr;
  std::size_t size;
};

// Forward and inverse 2-D real plans for one padded size. Executed through
// the new-array interface on fftwf_malloc'd buffers, which is thread-safe.
struct FftPlans {
  fftwf_plan forward = nullptr;
  fftwf_plan inverse = nullptr;
};

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

const FftPlans& plans_for(int rows, int cols) {
  static std::map<std::pair<int, int>, FftPlans> cache;
  std::lock_guard lock(planner_mutex());
  auto it = cache.find({rows, cols});
  if (it != cache.end()) return it->second;
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  const std::size_t nc = static_cast<std::size_t>(rows) * (cols / 2 + 1);
  FloatBuffer real(n);
  ComplexBuffer spec(nc);
  // Large sizes amortize measurement across many frames.
  const unsigned flags = n >= 128 * 128 ? FFTW_MEASURE : FFTW_ESTIMATE;
  FftPlans plans;
  plans.forward =
      fftwf_plan_dft_r2c_2d(rows, cols, real.ptr, spec.ptr, flags);
  plans.inverse =
      fftwf_plan_dft_c2r_2d(rows, cols, spec.ptr, real.ptr, flags);
  if (plans.forward == nullptr || plans.inverse == nullptr) {
    throw Error("FFTW planning failed");
  }
  return cache.emplace(std::pair{rows, cols}, plans).first->second;
}

}  // namespace

Backend parse_backend(const std::string& s) {
  if (s == "fft") return Backend::kFft;
  if (s == "direct") return Backend::kDirect;
  throw ConfigError("unknown backend '" + s + "' (expected fft or direct)");
}

std::string to_string(Backend backend) {
  return backend == Backend::kFft ? "fft" : "direct";
}

void SolverConfig::check() const {
  if (k_rotations < 1) throw ConfigError("k_rotations must be >= 1");
  if (search_radius && !(*search_radius >= 0.0)) {
    throw ConfigError("search radius must be >= 0");
  }
  if (threads < 0) throw ConfigError("threads must be >= 0");
}

std::vector<double> rotation_angles(int k_rotations) {
  if (k_rotations < 1) throw ConfigError("k_rotations must be >= 1");
  std::vector<double> angles(k_rotations);
  for (int k = 0; k < k_rotations; ++k) {
    angles[k] = wrap_angle(2.0 * std::numbers::pi * k / k_rotations);
  }
  return angles;
}

Pose ScoreVolume::pose_at(int k, int row, int col) const {
  // The kernel center (bev/2 in corner coordinates) lands on tile corner
  // coordinate index - floor(bev/2) + bev/2.
  const double dc = 0.5 * bev_width - bev_width / 2;
  const double dr = 0.5 * bev_height - bev_height / 2;
  const double res = tile_spec.resolution;
  return {tile_spec.center.x + (col + dc - 0.5 * tile_spec.width) * res,
          tile_spec.center.y + (0.5 * tile_spec.height - row - dr) * res,
          angles[k]};
}

Grid rotate_observation(const BevObservation& obs, double theta) {
  const GridSpec& spec = obs.spec();
  check_square(spec);
  const int h = spec.height;
  const int w = spec.width;
  const double c = snap_unit(std::cos(theta));
  const double s = snap_unit(std::sin(theta));
  Grid out(spec, kNumChannels);
  if (theta == 0.0) {
    out.data() = obs.grid().data();
    return out;
  }
  for (int r = 0; r < h; ++r) {
    for (int col = 0; col < w; ++col) {
      // North-up offset in pixel units, rotated by -theta into the ego grid.
      const double ox = col + 0.5 - 0.5 * w;
      const double oy = 0.5 * h - r - 0.5;
      const double ex = c * ox + s * oy;
      const double ey = -s * ox + c * oy;
      const double fc = snap_coord(ex + 0.5 * w - 0.5);
      const double fr = snap_coord(0.5 * h - 0.5 - ey);
      const double c0f = std::floor(fc);
      const double r0f = std::floor(fr);
      if (c0f < -1.0 || c0f > w - 1 || r0f < -1.0 || r0f > h - 1) continue;
      const int c0 = static_cast<int>(c0f);
      const int r0 = static_cast<int>(r0f);
      const double tc = fc - c0f;
      const double tr = fr - r0f;
      for (int ch = 0; ch < kNumChannels; ++ch) {
        auto sample = [&](int rr, int cc) -> double {
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) return 0.0;
          return obs.grid().at(ch, rr, cc);
        };
        double v = 0.0;
        if (tc == 0.0 && tr == 0.0) {
          v = sample(r0, c0);
        } else {
          v = (1 - tr) * ((1 - tc) * sample(r0, c0) + tc * sample(r0, c0 + 1)) +
              tr * ((1 - tc) * sample(r0 + 1, c0) +
                    tc * sample(r0 + 1, c0 + 1));
        }
        out.at(ch, r, col) = static_cast<float>(v);
      }
    }
  }
  return out;
}

RotationStack build_rotation_stack(const BevObservation& obs,
                                   const SolverConfig& config) {
  config.check();
  check_square(obs.spec());
  RotationStack stack;
  stack.spec = obs.spec();
  stack.angles = rotation_angles(config.k_rotations);
  const std::size_t n = stack.spec.pixels();
  const std::size_t kk = stack.angles.size();
  stack.data.assign(kNumChannels * kk * n, 0.0f);
  parallel_for(static_cast<int>(kk), config.threads, [&](int, int k) {
    const Grid rotated = rotate_observation(obs, stack.angles[k]);
    for (int c = 0; c < kNumChannels; ++c) {
      auto src = rotated.channel(c);
      std::ranges::copy(src, stack.data.begin() + (c * kk + k) * n);
    }
  });
  return stack;
}

ScoreVolume correlate_direct(const RotationStack& stack, const MapTile& tile,
                             int threads) {
  check_match(stack, tile);
  ScoreVolume volume = empty_volume(stack, tile);
  const int hm = tile.spec().height, wm = tile.spec().width;
  const int hb = stack.spec.height, wb = stack.spec.width;
  const int ar = hb / 2, ac = wb / 2;
  // Zero border of the kernel size on every side removes bounds checks; the
  // output is produced in blocks of kBlock columns held in registers.
  const int wblocks = (wm + kBlock - 1) / kBlock;
  const int pw = wblocks * kBlock + wb;
  const int ph = hm + hb;
  std::vector<std::vector<float>> padded(kNumChannels);
  for (int c = 0; c < kNumChannels; ++c) {
    auto ch = tile.grid().channel(c);
    if (all_zero(ch)) continue;
    padded[c].assign(static_cast<std::size_t>(ph) * pw, 0.0f);
    for (int r = 0; r < hm; ++r) {
      std::copy_n(ch.data() + static_cast<std::size_t>(r) * wm, wm,
                  padded[c].data() + static_cast<std::size_t>(r + ar) * pw + ac);
    }
  }
  parallel_for(stack.k(), threads, [&](int, int k) {
    float* slice = volume.data.data() + static_cast<std::size_t>(k) * hm * wm;
    for (int h0 = 0; h0 < hm; h0 += kRows) {
      const int rows = std::min(kRows, hm - h0);
      for (int b = 0; b < wblocks; ++b) {
        Lanes acc[kRows][4] = {};
        for (int c = 0; c < kNumChannels; ++c) {
          if (padded[c].empty()) continue;
          const float* kernel = stack.slice(c, k).data();
          // Each loaded tile row feeds kernel row t - r of output row h0 + r,
          // so every output still sums over (c, i, j) in ascending order.
          for (int t = 0; t < hb + rows - 1; ++t) {
            const float* trow = padded[c].data() +
                                static_cast<std::size_t>(h0 + t) * pw +
                                b * kBlock;
            for (int j = 0; j < wb; ++j) {
              const float* p = trow + j;
              const Lanes v0 = load_lanes(p);
              const Lanes v1 = load_lanes(p + kLanes);
              const Lanes v2 = load_lanes(p + 2 * kLanes);
              const Lanes v3 = load_lanes(p + 3 * kLanes);
#pragma GCC unroll 4
              for (int r = 0; r < kRows; ++r) {
                const int i = t - r;
                if (r >= rows || i < 0 || i >= hb) continue;
                const float s = kernel[static_cast<std::size_t>(i) * wb + j];
                acc[r][0] += s * v0;
                acc[r][1] += s * v1;
                acc[r][2] += s * v2;
                acc[r][3] += s * v3;
              }
            }
          }
        }
        const int w0 = b * kBlock;
        const int n = std::min(kBlock, wm - w0);
        for (int r = 0; r < rows; ++r) {
          float out[kBlock];
          std::memcpy(out, acc[r], sizeof(out));
          std::copy_n(out, n, slice + static_cast<std::size_t>(h0 + r) * wm + w0);
        }
      }
    }
  });
  return volume;
}

ScoreVolume correlate_fft(const RotationStack& stack, const MapTile& tile,
                          int threads) {
  check_match(stack, tile);
  ScoreVolume volume = empty_volume(stack, tile);
  const int hm = tile.spec().height, wm = tile.spec().width;
  const int hb = stack.spec.height, wb = stack.spec.width;
  const int ar = hb / 2, ac = wb / 2;
  // Padding keeps circular wrap-around out of the [0, hm) x [0, wm) window.
  const int ph = good_fft_size(hm + std::max(ar, hb - 1 - ar));
  const int pw = good_fft_size(wm + std::max(ac, wb - 1 - ac));
  const int cw = pw / 2 + 1;
  const std::size_t nreal = static_cast<std::size_t>(ph) * pw;
  const std::size_t ncplx = static_cast<std::size_t>(ph) * cw;
  const FftPlans& plans = plans_for(ph, pw);

  std::vector<std::unique_ptr<ComplexBuffer>> tile_spectra(kNumChannels);
  for (int c = 0; c < kNumChannels; ++c) {
    auto ch = tile.grid().channel(c);
    if (all_zero(ch)) continue;
    FloatBuffer real(nreal);
    for (int r = 0; r < hm; ++r) {
      std::copy_n(ch.data() + static_cast<std::size_t>(r) * wm, wm,
                  real.ptr + static_cast<std::size_t>(r) * pw);
    }
    tile_spectra[c] = std::make_unique<ComplexBuffer>(ncplx);
    fftwf_execute_dft_r2c(plans.forward, real.ptr, tile_spectra[c]->ptr);
  }

  struct Workspace {
    Workspace(std::size_t nr, std::size_t nc)
        : real(nr), out(nr), spec(nc), acc(nc) {}
    FloatBuffer real;
    FloatBuffer out;
    ComplexBuffer spec;
    ComplexBuffer acc;
  };
  const int workers = std::min(resolve_threads(threads), stack.k());
  std::vector<std::unique_ptr<Workspace>> spaces;
  for (int i = 0; i < workers; ++i) {
    spaces.push_back(std::make_unique<Workspace>(nreal, ncplx));
  }
  const float scale = 1.0f / static_cast<float>(nreal);

  parallel_for(stack.k(), workers, [&](int worker, int k) {
    Workspace& ws = *spaces[worker];
    bool any = false;
    for (int c = 0; c < kNumChannels; ++c) {
      if (!tile_spectra[c]) continue;
      auto kernel = stack.slice(c, k);
      if (all_zero(kernel)) continue;
      // Only the top-left hb x wb block is ever written, so the zero
      // padding survives across iterations.
      for (int r = 0; r < hb; ++r) {
        std::copy_n(kernel.data() + static_cast<std::size_t>(r) * wb, wb,
                    ws.real.ptr + static_cast<std::size_t>(r) * pw);
      }
      fftwf_execute_dft_r2c(plans.forward, ws.real.ptr, ws.spec.ptr);
      const fftwf_complex* t = tile_spectra[c]->ptr;
      fftwf_complex* a = ws.acc.ptr;
      const fftwf_complex* s = ws.spec.ptr;
      if (!any) {
        for (std::size_t i = 0; i < ncplx; ++i) {
          // conj(s) * t
          a[i][0] = s[i][0] * t[i][0] + s[i][1] * t[i][1];
          a[i][1] = s[i][0] * t[i][1] - s[i][1] * t[i][0];
        }
      } else {
        for (std::size_t i = 0; i < ncplx; ++i) {
          a[i][0] += s[i][0] * t[i][0] + s[i][1] * t[i][1];
          a[i][1] += s[i][0] * t[i][1] - s[i][1] * t[i][0];
        }
      }
      any = true;
    }
    if (!any) return;
    // c2r overwrites acc, which is reinitialized by the next rotation.
    fftwf_execute_dft_c2r(plans.inverse, ws.acc.ptr, ws.out.ptr);
    float* slice = volume.data.data() + static_cast<std::size_t>(k) * hm * wm;
    // circular[d] = sum_n kernel[n] * tile[n + d], and
    // M[h] = circular[h - ar] with wrap-around.
    for (int h = 0; h < hm; ++h) {
      const int sr = (h - ar + ph) % ph;
      const float* src = ws.out.ptr + static_cast<std::size_t>(sr) * pw;
      float* dst = slice + static_cast<std::size_t>(h) * wm;
      for (int w = 0; w < wm; ++w) {
        dst[w] = src[(w - ac + pw) % pw] * scale;
      }
    }
  });
  return volume;
}

ScoreVolume correlate(const RotationStack& stack, const MapTile& tile,
                      const SolverConfig& config) {
  config.check();
  return config.backend == Backend::kFft
             ? correlate_fft(stack, tile, config.threads)
             : correlate_direct(stack, tile, config.threads);
}

PoseEstimate extract_pose(const ScoreVolume& volume,
                          const SolverConfig& config) {
  config.check();
  if (volume.data.empty() || volume.angles.empty()) {
    throw ShapeError("score volume is empty");
  }
  const int hm = volume.tile_spec.height, wm = volume.tile_spec.width;
  // Pixel distance is measured from the hypothesis that sits on the tile
  // center.
  const double cr = hm / 2, cc = wm / 2;
  const double r2 = config.search_radius
                        ? *config.search_radius * *config.search_radius
                        : std::numeric_limits<double>::infinity();
  std::vector<std::uint8_t> allowed(static_cast<std::size_t>(hm) * wm);
  for (int r = 0; r < hm; ++r) {
    for (int c = 0; c < wm; ++c) {
      const double dr = r - cr, dc = c - cc;
      allowed[static_cast<std::size_t>(r) * wm + c] = dr * dr + dc * dc <= r2;
    }
  }
  float best = -std::numeric_limits<float>::infinity();
  int bk = -1, br = 0, bc = 0;
  const std::size_t plane = volume.slice_size();
  for (int k = 0; k < volume.k(); ++k) {
    const float* slice = volume.data.data() + k * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      if (!allowed[i]) continue;
      if (slice[i] > best || bk < 0) {
        best = slice[i];
        bk = k;
        br = static_cast<int>(i / wm);
        bc = static_cast<int>(i % wm);
      }
    }
  }
  if (bk < 0) throw ConfigError("search radius excludes every hypothesis");
  PoseEstimate est;
  est.pose = volume.pose_at(bk, br, bc);
  est.peak_score = best;
  est.k = bk;
  est.row = br;
  est.col = bc;
  return est;
}

Likelihood likelihood_summary(const ScoreVolume& volume) {
  if (volume.data.empty()) throw ShapeError("score volume is empty");
  const float peak = *std::ranges::max_element(volume.data);
  const std::size_t plane = volume.slice_size();
  Likelihood out;
  out.heatmap.assign(plane, 0.0);
  double z = 0.0;
  for (int k = 0; k < volume.k(); ++k) {
    const float* slice = volume.data.data() + k * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      const double e = std::exp(static_cast<double>(slice[i]) - peak);
      out.heatmap[i] += e;
      z += e;
    }
  }
  for (double& v : out.heatmap) v /= z;
  out.max_prob = 1.0 / z;
  return out;
}

Likelihood likelihood(const ScoreVolume& volume) {
  Likelihood out = likelihood_summary(volume);
  const float peak = *std::ranges::max_element(volume.data);
  const double z = 1.0 / out.max_prob;
  out.prob.resize(volume.data.size());
  for (std::size_t i = 0; i < volume.data.size(); ++i) {
    out.prob[i] = std::exp(static_cast<double>(volume.data[i]) - peak) / z;
  }
  return out;
}

Localization localize_in_tile(const BevObservation& obs, const MapTile& tile,
                              const SolverConfig& config) {
  const RotationStack stack = build_rotation_stack(obs, config);
  const ScoreVolume volume = correlate(stack, tile, config);
  Localization out;
  out.estimate = extract_pose(volume, config);
  Likelihood lk = likelihood_summary(volume);
  out.estimate.max_likelihood = lk.max_prob;
  out.heatmap = std::move(lk.heatmap);
  out.tile_spec = tile.spec();
  return out;
}

Localization localize_frame(const BevObservation& obs, const VectorMap& map,
                            const InitPrior& prior, const SolverConfig& config,
                            std::optional<double> sd_width,
                            const GridShape& tile_shape, ChannelMask mask) {
  config.check();
  MapTile tile = query_tile(map, prior, tile_shape, sd_width);
  if (mask == ChannelMask::kBoth) return localize_in_tile(obs, tile, config);
  Grid tile_grid = tile.grid();
  Grid obs_grid = obs.grid();
  apply_channel_mask(tile_grid, mask);
  apply_channel_mask(obs_grid, mask);
  return localize_in_tile(BevObservation(std::move(obs_grid)),
                          MapTile(std::move(tile_grid)), config);
}

std::string pose_estimate_to_json(const PoseEstimate& e) {
  nlohmann::ordered_json j;
  j["x"] = e.pose.x;
  j["y"] = e.pose.y;
  j["theta_rad"] = e.pose.theta;
  j["peak_score"] = e.peak_score;
  j["max_likelihood"] = e.max_likelihood;
  j["k"] = e.k;
  j["row"] = e.row;
  j["col"] = e.col;
  return j.dump();
}

}  // namespace bevmatch
