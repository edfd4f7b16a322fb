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

// bevmatch command-line tool.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bevmatch/error.hpp"
#include "bevmatch/evaluate.hpp"
#include "bevmatch/metrics.hpp"
#include "bevmatch/osm.hpp"
#include "bevmatch/raster.hpp"
#include "bevmatch/solver.hpp"
#include "bevmatch/synth.hpp"
#include "bevmatch/vecmap.hpp"

namespace fs = std::filesystem;
using namespace bevmatch;

namespace {

constexpr const char* kPrefix = "bevmatch: ";

void warn(const std::string& msg) {
  std::cerr << kPrefix << "warning: " << msg << '\n';
}

struct Shared {
  int tile_size = kDefaultTileShape.height;
  int bev_size = kDefaultBevShape.height;
  double res = 0.5;
  int k = 256;
  double road_width = kDefaultRoadWidth;
  double max_offset = synth::kDefaultMaxOffset;
  std::string backend = "fft";
  std::string channels = "both";
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  int threads = 0;
  double search_radius = kDefaultSearchRadius;
  bool full_search = false;

  GridShape tile_shape() const { return {tile_size, tile_size, res}; }
  GridShape bev_shape() const { return {bev_size, bev_size, res}; }
  SolverConfig solver() const {
    SolverConfig c;
    c.k_rotations = k;
    c.backend = parse_backend(backend);
    c.threads = threads;
    if (full_search) {
      c.search_radius.reset();
    } else {
      c.search_radius = search_radius;
    }
    c.check();
    return c;
  }
  std::string out(const std::string& name) const {
    fs::create_directories(out_dir);
    return (fs::path(out_dir) / name).string();
  }
};

void add_shared(CLI::App& app, Shared& s) {
  app.add_option("--tile-size", s.tile_size, "Map tile side, pixels")
      ->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--bev-size", s.bev_size, "Observation side, pixels")
      ->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--res", s.res, "Meters per pixel")
      ->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--k", s.k, "Heading hypotheses")
      ->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--road-width", s.road_width, "SD road width, meters")
      ->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--max-offset", s.max_offset, "Prior offset bound, meters")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  app.add_option("--backend", s.backend, "Correlation backend")
      ->capture_default_str()->check(CLI::IsMember({"fft", "direct"}));
  app.add_option("--channels", s.channels, "Map channels used for matching")
      ->capture_default_str()
      ->check(CLI::IsMember({"both", "roads", "buildings"}));
  app.add_option("--seed", s.seed, "Random seed")->capture_default_str();
  app.add_option("--out-dir", s.out_dir, "Output directory")
      ->capture_default_str();
  app.add_option("--threads", s.threads, "Worker threads, 0 = all cores")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  app.add_option("--search-radius", s.search_radius,
                 "Argmax disc radius around the prior, tile pixels")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  app.add_flag("--full-search", s.full_search,
               "Search the whole tile instead of the disc");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::string fixed(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

void write_grid_pgms(const Grid& g, const std::string& stem) {
  write_pgm(g, kRoads, stem + "_roads.pgm");
  write_pgm(g, kBuildings, stem + "_buildings.pgm");
}

// ---- ingest ---------------------------------------------------------------

struct IngestArgs {
  std::string osm;
  double lat0 = 0, lon0 = 0;
  std::string out;
};

void run_ingest(const Shared& s, const IngestArgs& a) {
  const osm::Document doc = osm::read_osm_file(a.osm);
  osm::ExtractStats stats;
  const VectorMap map = osm::extract_vector_map(doc, LocalFrame(a.lat0, a.lon0),
                                                MapMode::kSd, &stats);
  for (const auto& w : stats.warnings) warn(w);
  if (map.empty()) warn("map is empty: no roads or buildings in " + a.osm);
  const std::string out = a.out.empty() ? s.out("map.json") : a.out;
  write_vector_map(map, out);
  std::cout << "ways " << stats.ways_in << " roads " << stats.roads
            << " buildings " << stats.buildings << " dropped "
            << stats.dropped << '\n'
            << "wrote " << out << '\n';
}

// ---- genmap ---------------------------------------------------------------

struct GenArgs {
  synth::MapGenParams params;
  std::string mode = "sd";
  std::string out;
};

void add_gen_options(CLI::App& app, GenArgs& g) {
  app.add_option("--extent", g.params.extent, "Map side, meters")
      ->capture_default_str();
  app.add_option("--spacing", g.params.spacing, "Intersection spacing")
      ->capture_default_str();
  app.add_option("--jitter", g.params.jitter, "Intersection jitter")
      ->capture_default_str();
  app.add_option("--bend", g.params.bend, "Road midpoint bend")
      ->capture_default_str();
  app.add_option("--edge-drop", g.params.edge_drop_prob,
                 "Probability of removing a road edge")
      ->capture_default_str();
  app.add_option("--density", g.params.building_density,
                 "Probability that a lot holds a building")
      ->capture_default_str();
  app.add_option("--map-mode", g.mode, "sd or hd")
      ->capture_default_str()->check(CLI::IsMember({"sd", "hd"}));
}

VectorMap generate(std::uint64_t seed, GenArgs g) {
  g.params.mode = g.mode == "hd" ? MapMode::kHd : MapMode::kSd;
  return synth::generate_map(seed, g.params);
}

void run_genmap(const Shared& s, const GenArgs& g) {
  const VectorMap map = generate(s.seed, g);
  const std::string out = g.out.empty() ? s.out("map.json") : g.out;
  write_vector_map(map, out);
  std::cout << "roads " << map.roads.size() << " buildings "
            << map.buildings.size() << '\n'
            << "wrote " << out << '\n';
}

// ---- rasterize ------------------------------------------------------------

struct RasterArgs {
  std::string map;
  double x = 0, y = 0;
  std::string out;
};

std::optional<double> sd_width_for(const VectorMap& map, double width) {
  if (map.mode == MapMode::kHd) return std::nullopt;
  return width;
}

void run_rasterize(const Shared& s, const RasterArgs& a) {
  const VectorMap map = read_vector_map(a.map);
  const MapTile tile = query_tile(map, {{a.x, a.y}}, s.tile_shape(),
                                  sd_width_for(map, s.road_width));
  const std::string out = a.out.empty() ? s.out("tile.bsg") : a.out;
  write_grid(tile.grid(), out);
  const std::string stem = (fs::path(out).parent_path() /
                            fs::path(out).stem()).string();
  write_grid_pgms(tile.grid(), stem);
  std::cout << "wrote " << out << '\n';
}

// ---- render-obs -----------------------------------------------------------

struct RenderArgs {
  std::string map;
  double x = 0, y = 0, theta = 0;
  synth::NoiseParams noise;
  std::string encoding = "bipolar";
  std::string out;
};

void add_noise_options(CLI::App& app, synth::NoiseParams& n) {
  app.add_option("--dropout", n.dropout_prob,
                 "Probability that an occupied pixel reads free")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  app.add_option("--noise-sigma", n.logit_noise_sigma,
                 "Additive Gaussian noise sigma")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  app.add_option("--occlusions", n.occlusion_blocks,
                 "Number of zeroed square blocks")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  app.add_option("--block-size", n.block_size, "Occlusion block side, pixels")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
}

synth::Encoding parse_encoding(const std::string& s) {
  return s == "binary" ? synth::Encoding::kBinary : synth::Encoding::kBipolar;
}

void run_render(const Shared& s, const RenderArgs& a) {
  const VectorMap map = read_vector_map(a.map);
  const synth::Encoding enc = parse_encoding(a.encoding);
  BevObservation obs =
      synth::render_observation(map, {a.x, a.y, wrap_angle(a.theta)},
                                s.bev_shape(), sd_width_for(map, s.road_width),
                                enc);
  obs = synth::corrupt(obs, a.noise, s.seed, enc);
  const std::string out = a.out.empty() ? s.out("obs.bsg") : a.out;
  write_grid(obs.grid(), out);
  write_grid_pgms(obs.grid(), (fs::path(out).parent_path() /
                               fs::path(out).stem()).string());
  std::cout << "wrote " << out << '\n';
}

// ---- localize -------------------------------------------------------------

struct LocalizeArgs {
  std::string map;
  std::string obs;
  double prior_x = 0, prior_y = 0;
};

void run_localize(const Shared& s, const LocalizeArgs& a) {
  const VectorMap map = read_vector_map(a.map);
  const Grid grid = read_grid(a.obs);
  if (grid.channels() != kNumChannels) {
    throw ShapeError("observation has " + std::to_string(grid.channels()) +
                     " channels, expected 2");
  }
  if (grid.spec().resolution != s.res) {
    throw ShapeError("observation resolution " + fixed(grid.spec().resolution, 4) +
                     " does not match --res " + fixed(s.res, 4));
  }
  const BevObservation obs(grid);
  if (std::ranges::all_of(grid.data(), [](float v) { return v == 0.0f; })) {
    warn("observation is all zero; every hypothesis scores the same");
  }
  const Localization loc = localize_frame(
      obs, map, {{a.prior_x, a.prior_y}}, s.solver(),
      sd_width_for(map, s.road_width), s.tile_shape(),
      parse_channel_mask(s.channels));
  const std::string json = pose_estimate_to_json(loc.estimate);
  write_text(s.out("pose.json"), json + "\n");
  std::vector<float> heat(loc.heatmap.begin(), loc.heatmap.end());
  write_pgm(heat, loc.tile_spec.height, loc.tile_spec.width,
            s.out("heatmap.pgm"));
  std::cout << json << '\n';
}

// ---- evaluate -------------------------------------------------------------

struct EvalArgs {
  std::string map;
  std::string osm;
  double lat0 = 0, lon0 = 0;
  std::optional<std::uint64_t> map_seed;
  GenArgs gen;
  int scenarios = 200;
  int scenario_threads = 1;
  synth::NoiseParams noise;
  std::string encoding = "bipolar";
  bool sweep_channels = false;
  std::vector<double> sweep_widths;
};

VectorMap eval_map(const EvalArgs& a) {
  const int sources = !a.map.empty() + !a.osm.empty() + a.map_seed.has_value();
  if (sources != 1) {
    throw ConfigError("give exactly one map source: --map, --osm or --map-seed");
  }
  if (!a.map.empty()) return read_vector_map(a.map);
  if (a.map_seed) return generate(*a.map_seed, a.gen);
  osm::ExtractStats stats;
  const VectorMap map = osm::extract_vector_map(
      osm::read_osm_file(a.osm), LocalFrame(a.lat0, a.lon0), MapMode::kSd,
      &stats);
  for (const auto& w : stats.warnings) warn(w);
  return map;
}

std::string label_for_width(double w) {
  std::ostringstream os;
  os << w;
  return os.str();
}

void run_evaluate(const Shared& s, const EvalArgs& a) {
  const VectorMap map = eval_map(a);
  EvalConfig base;
  base.tile_shape = s.tile_shape();
  base.bev_shape = s.bev_shape();
  base.solver = s.solver();
  base.noise = a.noise;
  base.noise.check();
  base.encoding = parse_encoding(a.encoding);
  base.scenarios = a.scenarios;
  base.seed = s.seed;
  base.channels = parse_channel_mask(s.channels);
  base.sd_width = s.road_width;
  base.max_offset = s.max_offset;
  base.scenario_threads = a.scenario_threads;

  struct Variant {
    std::string label;
    EvalConfig config;
  };
  std::vector<Variant> variants;
  std::string header;
  if (a.sweep_channels) {
    header = "channels";
    for (ChannelMask m :
         {ChannelMask::kBoth, ChannelMask::kRoads, ChannelMask::kBuildings}) {
      EvalConfig c = base;
      c.channels = m;
      variants.push_back({to_string(m), c});
    }
  } else if (!a.sweep_widths.empty()) {
    header = "road_width";
    for (double w : a.sweep_widths) {
      if (!(w > 0.0)) throw ConfigError("road widths must be positive");
      EvalConfig c = base;
      c.sd_width = w;
      variants.push_back({label_for_width(w), c});
    }
  } else {
    variants.push_back({"", base});
  }

  std::vector<SweepRow> rows;
  for (const Variant& v : variants) {
    const std::string tag = v.label.empty() ? "" : header + " " + v.label + ": ";
    const EvalRun run = evaluate(map, v.config, [&tag](int done, int total) {
      if (done == total || done % 20 == 0) {
        std::cerr << '\r' << tag << done << "/" << total << std::flush;
        if (done == total) std::cerr << '\n';
      }
    });
    const std::string name =
        v.label.empty() ? "metrics.csv"
                        : "metrics_" + header + "_" + v.label + ".csv";
    std::ofstream out(s.out(name));
    if (!out) throw IoError("cannot open '" + s.out(name) + "' for writing");
    metrics::write_csv(out, run.frames, run.report, config_echo(v.config));
    rows.push_back({v.label.empty() ? "run" : v.label, run.report});
    std::cout << "wrote " << s.out(name) << '\n';
  }
  write_sweep_table(std::cout, header.empty() ? "run" : header, rows);
  if (rows.size() > 1) {
    std::ofstream out(s.out("sweep_" + header + ".csv"));
    write_sweep_csv(out, header, rows);
  }
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
  std::vector<std::string> sizes{"16:8", "64:32", "256:128"};
  std::string backends = "both";
  int repeat = 3;
};

struct BenchRow {
  int tile, bev, k;
  std::string backend;
  double mean_ms, median_ms;
};

double median(std::vector<double> v) {
  std::ranges::sort(v);
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void run_bench(const Shared& s, const BenchArgs& a) {
  std::vector<Backend> backends;
  if (a.backends != "fft") backends.push_back(Backend::kDirect);
  if (a.backends != "direct") backends.push_back(Backend::kFft);
  std::vector<BenchRow> rows;
  synth::MapGenParams gp;
  const VectorMap map = synth::generate_map(s.seed, gp);
  for (const std::string& spec : a.sizes) {
    int tile = 0, bev = 0;
    char sep = 0;
    std::istringstream is(spec);
    if (!(is >> tile >> sep >> bev) || sep != ':' || tile < 1 || bev < 1 ||
        bev > tile) {
      throw ConfigError("bad size '" + spec + "', expected TILE:BEV");
    }
    const GridShape tile_shape{tile, tile, s.res}, bev_shape{bev, bev, s.res};
    const Pose gt{3.0, -5.0, 0.7};
    const BevObservation obs = synth::render_observation(
        map, gt, bev_shape, s.road_width);
    const MapTile mt = query_tile(map, {{0.0, 0.0}}, tile_shape, s.road_width);
    for (Backend b : backends) {
      SolverConfig cfg = s.solver();
      cfg.backend = b;
      std::vector<double> ms;
      // One untimed pass warms caches and FFT plans.
      localize_in_tile(obs, mt, cfg);
      for (int r = 0; r < a.repeat; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        localize_in_tile(obs, mt, cfg);
        ms.push_back(std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count());
      }
      rows.push_back({tile, bev, s.k, to_string(b),
                      std::accumulate(ms.begin(), ms.end(), 0.0) / ms.size(),
                      median(ms)});
    }
  }
  std::printf("%6s %6s %6s %8s %12s %12s\n", "k", "tile", "bev", "backend",
              "mean_ms", "median_ms");
  for (const BenchRow& r : rows) {
    std::printf("%6d %6d %6d %8s %12.3f %12.3f\n", r.k, r.tile, r.bev,
                r.backend.c_str(), r.mean_ms, r.median_ms);
  }
  // At the reference configuration the frequency-domain path must win.
  const BenchRow* fft = nullptr;
  const BenchRow* direct = nullptr;
  for (const BenchRow& r : rows) {
    if (r.tile == 256 && r.bev == 128 && r.k == 256) {
      (r.backend == "fft" ? fft : direct) = &r;
    }
  }
  if (fft && direct) {
    if (!(fft->mean_ms <= direct->mean_ms)) {
      throw Error("fft backend slower than direct at 256/128/K=256");
    }
    std::printf("fft speedup at 256/128/K=256: %.1fx\n",
                direct->mean_ms / fft->mean_ms);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metric localization by matching BEV semantics against map "
               "tiles"};
  app.set_config("--config", "", "TOML/INI file with option values");
  app.require_subcommand(1);
  app.fallthrough();
  Shared shared;
  add_shared(app, shared);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "OSM XML to vector-map JSON");
  c_ingest->add_option("--osm", ingest.osm, "OSM XML file")->required();
  c_ingest->add_option("--lat0", ingest.lat0, "Frame origin latitude")
      ->required();
  c_ingest->add_option("--lon0", ingest.lon0, "Frame origin longitude")
      ->required();
  c_ingest->add_option("--out", ingest.out, "Output path");

  GenArgs gen;
  auto* c_gen = app.add_subcommand("genmap", "Generate a synthetic city map");
  add_gen_options(*c_gen, gen);
  c_gen->add_option("--out", gen.out, "Output path");

  RasterArgs raster;
  auto* c_raster =
      app.add_subcommand("rasterize", "Rasterize a north-up map tile");
  c_raster->add_option("--map", raster.map, "Vector-map JSON")->required();
  c_raster->add_option("--x", raster.x, "Tile center east, meters")
      ->required();
  c_raster->add_option("--y", raster.y, "Tile center north, meters")
      ->required();
  c_raster->add_option("--out", raster.out, "Output BSG1 path");

  RenderArgs render;
  auto* c_render = app.add_subcommand(
      "render-obs", "Render a (noisy) ego-frame observation from a map");
  c_render->add_option("--map", render.map, "Vector-map JSON")->required();
  c_render->add_option("--x", render.x, "Ego east, meters")->required();
  c_render->add_option("--y", render.y, "Ego north, meters")->required();
  c_render->add_option("--theta", render.theta,
                       "Heading, radians counterclockwise from east")
      ->required();
  add_noise_options(*c_render, render.noise);
  c_render->add_option("--encoding", render.encoding)
      ->capture_default_str()->check(CLI::IsMember({"bipolar", "binary"}));
  c_render->add_option("--out", render.out, "Output BSG1 path");

  LocalizeArgs loc;
  auto* c_loc = app.add_subcommand("localize", "Localize one observation");
  c_loc->add_option("--map", loc.map, "Vector-map JSON")->required();
  c_loc->add_option("--obs", loc.obs, "Observation BSG1 file")->required();
  c_loc->add_option("--prior-x", loc.prior_x, "Prior east, meters")
      ->required();
  c_loc->add_option("--prior-y", loc.prior_y, "Prior north, meters")
      ->required();

  EvalArgs ev;
  auto* c_eval =
      app.add_subcommand("evaluate", "Batch evaluation on sampled scenarios");
  c_eval->add_option("--map", ev.map, "Vector-map JSON");
  c_eval->add_option("--osm", ev.osm, "OSM XML file");
  c_eval->add_option("--lat0", ev.lat0, "Frame origin latitude for --osm");
  c_eval->add_option("--lon0", ev.lon0, "Frame origin longitude for --osm");
  c_eval->add_option("--map-seed", ev.map_seed, "Generate the map from a seed");
  add_gen_options(*c_eval, ev.gen);
  c_eval->add_option("--scenarios", ev.scenarios)
      ->capture_default_str()->check(CLI::PositiveNumber);
  c_eval->add_option("--scenario-threads", ev.scenario_threads,
                     "Scenarios solved concurrently")
      ->capture_default_str()->check(CLI::PositiveNumber);
  add_noise_options(*c_eval, ev.noise);
  c_eval->add_option("--encoding", ev.encoding)
      ->capture_default_str()->check(CLI::IsMember({"bipolar", "binary"}));
  auto* sweep_c = c_eval->add_flag("--sweep-channels", ev.sweep_channels,
                                   "Run both, roads and buildings");
  c_eval->add_option("--sweep-widths", ev.sweep_widths,
                     "Comma-separated SD road widths")
      ->delimiter(',')->excludes(sweep_c);

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Time both backends");
  c_bench->add_option("--sizes", bench.sizes, "TILE:BEV pairs")
      ->delimiter(',')->capture_default_str();
  c_bench->add_option("--backends", bench.backends)
      ->capture_default_str()->check(CLI::IsMember({"both", "fft", "direct"}));
  c_bench->add_option("--repeat", bench.repeat)
      ->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << kPrefix << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*c_ingest) run_ingest(shared, ingest);
    if (*c_gen) run_genmap(shared, gen);
    if (*c_raster) run_rasterize(shared, raster);
    if (*c_render) run_render(shared, render);
    if (*c_loc) run_localize(shared, loc);
    if (*c_eval) run_evaluate(shared, ev);
    if (*c_bench) run_bench(shared, bench);
  } catch (const std::exception& e) {
    std::cerr << kPrefix << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
