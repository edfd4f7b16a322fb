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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <optional>
#include <string>

#include "bevmatch/error.hpp"
#include "bevmatch/evaluate.hpp"
#include "bevmatch/osm.hpp"
#include "bevmatch/raster.hpp"
#include "bevmatch/solver.hpp"
#include "bevmatch/synth.hpp"
#include "bevmatch/vecmap.hpp"

namespace py = pybind11;
using namespace bevmatch;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

// (C, H, W) float32 copy of a grid.
FloatArray to_array(const Grid& g) {
  FloatArray a({g.channels(), g.height(), g.width()});
  std::copy(g.data().begin(), g.data().end(), a.mutable_data());
  return a;
}

Grid from_array(const FloatArray& a, double res, Vec2 center = {}) {
  if (a.ndim() != 3) throw ShapeError("expected a (C, H, W) array");
  const auto c = static_cast<int>(a.shape(0));
  const auto h = static_cast<int>(a.shape(1));
  const auto w = static_cast<int>(a.shape(2));
  return Grid({h, w, res, center}, c,
              std::vector<float>(a.data(), a.data() + a.size()));
}

std::optional<double> width_for(const VectorMap& map, double w) {
  if (map.mode == MapMode::kHd) return std::nullopt;
  return w;
}

SolverConfig solver_config(int k, const std::string& backend,
                           std::optional<double> search_radius, int threads) {
  SolverConfig c;
  c.k_rotations = k;
  c.backend = parse_backend(backend);
  c.search_radius = search_radius;
  c.threads = threads;
  c.check();
  return c;
}

py::dict report_dict(const metrics::MetricsReport& r) {
  py::dict d;
  d["recall_at_m"] = r.recall_at_m;
  d["recall_at_deg"] = r.recall_at_deg;
  d["ape_mean"] = r.ape_mean;
  d["aoe_mean"] = r.aoe_mean;
  d["ape_median"] = r.ape_median;
  d["aoe_median"] = r.aoe_median;
  d["mean_solve_time"] = r.mean_solve_time;
  d["frame_count"] = r.frame_count;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "BEV semantic map matching";

  static py::exception<Error> error(m, "BevmatchError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), e.what());
    }
  });

  py::class_<VectorMap>(m, "VectorMap")
      .def_static("from_json",
                  [](const std::string& s) { return vector_map_from_json(s); })
      .def_static("read", &read_vector_map)
      .def("to_json",
           [](const VectorMap& map) { return vector_map_to_json(map); })
      .def("write", [](const VectorMap& map, const std::string& path) {
        write_vector_map(map, path);
      })
      .def_property_readonly("num_roads",
                             [](const VectorMap& map) { return map.roads.size(); })
      .def_property_readonly(
          "num_buildings",
          [](const VectorMap& map) { return map.buildings.size(); })
      .def_property_readonly("is_hd", [](const VectorMap& map) {
        return map.mode == MapMode::kHd;
      })
      .def("bounds", [](const VectorMap& map) {
        const Box b = map_bounds(map, kDefaultRoadWidth);
        return py::make_tuple(b.min.x, b.min.y, b.max.x, b.max.y);
      });

  m.def(
      "generate_map",
      [](std::uint64_t seed, bool hd, double extent, double spacing,
         double density) {
        synth::MapGenParams p;
        p.mode = hd ? MapMode::kHd : MapMode::kSd;
        p.extent = extent;
        p.spacing = spacing;
        p.building_density = density;
        return synth::generate_map(seed, p);
      },
      py::arg("seed"), py::arg("hd") = false, py::arg("extent") = 480.0,
      py::arg("spacing") = 64.0, py::arg("density") = 0.6);

  m.def(
      "ingest_osm",
      [](const std::string& path, double lat0, double lon0) {
        return osm::extract_vector_map(osm::read_osm_file(path),
                                       LocalFrame(lat0, lon0), MapMode::kSd);
      },
      py::arg("path"), py::arg("lat0"), py::arg("lon0"));

  m.def(
      "query_tile",
      [](const VectorMap& map, double x, double y, int size, double res,
         double road_width) {
        return to_array(query_tile(map, {{x, y}}, {size, size, res},
                                   width_for(map, road_width))
                            .grid());
      },
      py::arg("map"), py::arg("x"), py::arg("y"), py::arg("size") = 256,
      py::arg("res") = 0.5, py::arg("road_width") = kDefaultRoadWidth);

  m.def(
      "render_observation",
      [](const VectorMap& map, double x, double y, double theta, int size,
         double res, double road_width, const std::string& encoding) {
        const auto enc = encoding == "binary" ? synth::Encoding::kBinary
                                              : synth::Encoding::kBipolar;
        return to_array(synth::render_observation(map, {x, y, theta},
                                                  {size, size, res},
                                                  width_for(map, road_width),
                                                  enc)
                            .grid());
      },
      py::arg("map"), py::arg("x"), py::arg("y"), py::arg("theta"),
      py::arg("size") = 128, py::arg("res") = 0.5,
      py::arg("road_width") = kDefaultRoadWidth,
      py::arg("encoding") = "bipolar");

  m.def(
      "corrupt",
      [](const FloatArray& obs, double dropout, double sigma, int occlusions,
         int block_size, std::uint64_t seed, const std::string& encoding) {
        const auto enc = encoding == "binary" ? synth::Encoding::kBinary
                                              : synth::Encoding::kBipolar;
        return to_array(
            synth::corrupt(BevObservation(from_array(obs, 0.5)),
                           {dropout, sigma, occlusions, block_size}, seed, enc)
                .grid());
      },
      py::arg("obs"), py::arg("dropout") = 0.0, py::arg("sigma") = 0.0,
      py::arg("occlusions") = 0, py::arg("block_size") = 16,
      py::arg("seed") = 0, py::arg("encoding") = "bipolar");

  m.def(
      "score_volume",
      [](const FloatArray& obs, const FloatArray& tile, int k,
         const std::string& backend, double res) {
        const SolverConfig cfg = solver_config(k, backend, std::nullopt, 0);
        const RotationStack stack =
            build_rotation_stack(BevObservation(from_array(obs, res)), cfg);
        const ScoreVolume v =
            correlate(stack, MapTile(from_array(tile, res)), cfg);
        FloatArray out({v.k(), v.tile_spec.height, v.tile_spec.width});
        std::copy(v.data.begin(), v.data.end(), out.mutable_data());
        return out;
      },
      py::arg("obs"), py::arg("tile"), py::arg("k") = 256,
      py::arg("backend") = "fft", py::arg("res") = 0.5);

  m.def(
      "localize",
      [](const FloatArray& obs, const VectorMap& map, double prior_x,
         double prior_y, int k, const std::string& backend,
         const std::string& channels, int tile_size, double res,
         double road_width, std::optional<double> search_radius,
         int threads) {
        const Localization loc = localize_frame(
            BevObservation(from_array(obs, res)), map, {{prior_x, prior_y}},
            solver_config(k, backend, search_radius, threads),
            width_for(map, road_width), {tile_size, tile_size, res},
            parse_channel_mask(channels));
        py::array_t<double> heat({loc.tile_spec.height, loc.tile_spec.width});
        std::copy(loc.heatmap.begin(), loc.heatmap.end(), heat.mutable_data());
        const PoseEstimate& e = loc.estimate;
        py::dict d;
        d["x"] = e.pose.x;
        d["y"] = e.pose.y;
        d["theta"] = e.pose.theta;
        d["peak_score"] = e.peak_score;
        d["max_likelihood"] = e.max_likelihood;
        d["k"] = e.k;
        d["row"] = e.row;
        d["col"] = e.col;
        d["heatmap"] = heat;
        return d;
      },
      py::arg("obs"), py::arg("map"), py::arg("prior_x"), py::arg("prior_y"),
      py::arg("k") = 256, py::arg("backend") = "fft",
      py::arg("channels") = "both", py::arg("tile_size") = 256,
      py::arg("res") = 0.5, py::arg("road_width") = kDefaultRoadWidth,
      py::arg("search_radius") = kDefaultSearchRadius, py::arg("threads") = 0);

  m.def(
      "evaluate",
      [](const VectorMap& map, int scenarios, std::uint64_t seed, int k,
         int tile_size, int bev_size, double res, double road_width,
         double max_offset, const std::string& channels, double dropout,
         double sigma, int occlusions) {
        EvalConfig c;
        c.tile_shape = {tile_size, tile_size, res};
        c.bev_shape = {bev_size, bev_size, res};
        c.solver.k_rotations = k;
        c.scenarios = scenarios;
        c.seed = seed;
        c.sd_width = road_width;
        c.max_offset = max_offset;
        c.channels = parse_channel_mask(channels);
        c.noise = {dropout, sigma, occlusions, 16};
        EvalRun run;
        {
          py::gil_scoped_release release;
          run = evaluate(map, c);
        }
        return report_dict(run.report);
      },
      py::arg("map"), py::arg("scenarios") = 200, py::arg("seed") = 0,
      py::arg("k") = 256, py::arg("tile_size") = 256, py::arg("bev_size") = 128,
      py::arg("res") = 0.5, py::arg("road_width") = kDefaultRoadWidth,
      py::arg("max_offset") = synth::kDefaultMaxOffset,
      py::arg("channels") = "both", py::arg("dropout") = 0.0,
      py::arg("sigma") = 0.0, py::arg("occlusions") = 0);
}
