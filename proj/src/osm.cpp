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

#include "bevmatch/osm.hpp"

#include <expat.h>

#include <charconv>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "bevmatch/error.hpp"

namespace bevmatch::osm {
namespace {

struct ParserDeleter {
  void operator()(XML_Parser p) const { XML_ParserFree(p); }
};

const char* find_attr(const XML_Char** attrs, const char* name) {
  for (int i = 0; attrs[i] != nullptr; i += 2) {
    if (std::strcmp(attrs[i], name) == 0) return attrs[i + 1];
  }
  return nullptr;
}

std::optional<std::int64_t> to_int(const char* s) {
  if (s == nullptr) return std::nullopt;
  std::int64_t v = 0;
  const char* end = s + std::strlen(s);
  auto [ptr, ec] = std::from_chars(s, end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::optional<double> to_double(const char* s) {
  if (s == nullptr) return std::nullopt;
  double v = 0.0;
  const char* end = s + std::strlen(s);
  auto [ptr, ec] = std::from_chars(s, end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

struct Handler {
  XML_Parser parser = nullptr;
  Document doc;
  std::unordered_set<std::int64_t> node_ids;
  int depth = 0;
  bool in_way = false;
  bool saw_root = false;
  // First semantic error; expat is stopped and the error rethrown outside
  // the C callback.
  std::string element_error;
  std::string parse_error;

  long line() const {
    return static_cast<long>(XML_GetCurrentLineNumber(parser));
  }

  void fail_element(std::string msg) {
    element_error = std::move(msg) + " (line " + std::to_string(line()) + ")";
    XML_StopParser(parser, XML_FALSE);
  }

  void start(const char* name, const XML_Char** attrs) {
    ++depth;
    if (depth == 1) {
      saw_root = true;
      if (std::strcmp(name, "osm") != 0) {
        parse_error = std::string("root element is <") + name + ">, not <osm>";
        XML_StopParser(parser, XML_FALSE);
      }
      return;
    }
    if (depth == 2 && std::strcmp(name, "node") == 0) {
      const char* id_attr = find_attr(attrs, "id");
      auto id = to_int(id_attr);
      if (!id) {
        fail_element("node without a valid id");
        return;
      }
      auto lat = to_double(find_attr(attrs, "lat"));
      auto lon = to_double(find_attr(attrs, "lon"));
      if (!lat || !lon) {
        fail_element("node " + std::to_string(*id) + " is missing lat/lon");
        return;
      }
      if (!node_ids.insert(*id).second) {
        fail_element("duplicate node id " + std::to_string(*id));
        return;
      }
      doc.nodes.push_back({*id, *lat, *lon});
    } else if (depth == 2 && std::strcmp(name, "way") == 0) {
      auto id = to_int(find_attr(attrs, "id"));
      if (!id) {
        fail_element("way without a valid id");
        return;
      }
      doc.ways.push_back({*id, {}, {}});
      in_way = true;
    } else if (depth == 3 && in_way && std::strcmp(name, "nd") == 0) {
      auto ref = to_int(find_attr(attrs, "ref"));
      if (!ref) {
        fail_element("way " + std::to_string(doc.ways.back().id) +
                     " has an nd without a valid ref");
        return;
      }
      doc.ways.back().node_refs.push_back(*ref);
    } else if (depth == 3 && in_way && std::strcmp(name, "tag") == 0) {
      const char* k = find_attr(attrs, "k");
      const char* v = find_attr(attrs, "v");
      if (k != nullptr && v != nullptr) doc.ways.back().tags[k] = v;
    }
  }

  void end(const char* name) {
    if (depth == 2 && std::strcmp(name, "way") == 0) in_way = false;
    --depth;
  }
};

void XMLCALL on_start(void* data, const XML_Char* name,
                      const XML_Char** attrs) {
  static_cast<Handler*>(data)->start(name, attrs);
}

void XMLCALL on_end(void* data, const XML_Char* name) {
  static_cast<Handler*>(data)->end(name);
}

}  // namespace

Document parse_osm_xml(std::string_view text) {
  std::unique_ptr<XML_ParserStruct, ParserDeleter> parser(
      XML_ParserCreate("UTF-8"));
  if (!parser) throw Error("cannot allocate XML parser");
  Handler handler;
  handler.parser = parser.get();
  XML_SetUserData(parser.get(), &handler);
  XML_SetElementHandler(parser.get(), on_start, on_end);

  const auto status = XML_Parse(parser.get(), text.data(),
                                static_cast<int>(text.size()), XML_TRUE);
  if (!handler.element_error.empty()) throw ElementError(handler.element_error);
  if (!handler.parse_error.empty()) {
    throw ParseError(handler.parse_error, handler.line());
  }
  if (status != XML_STATUS_OK) {
    throw ParseError(XML_ErrorString(XML_GetErrorCode(parser.get())),
                     handler.line());
  }
  if (!handler.saw_root) throw ParseError("document has no root element", 1);
  return std::move(handler.doc);
}

Document read_osm_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_osm_xml(ss.str());
}

VectorMap extract_vector_map(const Document& doc, const LocalFrame& frame,
                             MapMode mode, ExtractStats* stats) {
  std::unordered_map<std::int64_t, Vec2> projected;
  projected.reserve(doc.nodes.size());
  for (const Node& n : doc.nodes) {
    projected.emplace(n.id, project_wgs84_to_local(n.lat, n.lon, frame));
  }

  ExtractStats local;
  local.ways_in = doc.ways.size();
  VectorMap map;
  map.frame = frame;
  map.mode = mode;

  auto drop = [&local](const Way& way, const std::string& why) {
    ++local.dropped;
    if (!why.empty()) {
      local.warnings.push_back("way " + std::to_string(way.id) + ": " + why);
    }
  };

  for (const Way& way : doc.ways) {
    std::vector<Vec2> points;
    points.reserve(way.node_refs.size());
    for (std::int64_t ref : way.node_refs) {
      auto it = projected.find(ref);
      if (it == projected.end()) {
        throw IngestError("way " + std::to_string(way.id) +
                          " references unknown node " + std::to_string(ref));
      }
      points.push_back(it->second);
    }

    if (way.tags.contains("highway")) {
      std::vector<Vec2> line;
      for (const Vec2& p : points) {
        if (line.empty() || !(line.back() == p)) line.push_back(p);
      }
      if (line.size() < 2) {
        drop(way, "zero-length road");
        continue;
      }
      map.roads.push_back({std::move(line), std::nullopt});
      ++local.roads;
    } else if (way.tags.contains("building")) {
      if (way.node_refs.size() < 4 ||
          way.node_refs.front() != way.node_refs.back()) {
        drop(way, "building way is not closed");
        continue;
      }
      points.pop_back();
      std::vector<Vec2> ring;
      for (const Vec2& p : points) {
        if (ring.empty() || !(ring.back() == p)) ring.push_back(p);
      }
      while (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
      if (ring.size() < 3 || polygon_area(ring) == 0.0) {
        drop(way, "zero-area building");
        continue;
      }
      map.buildings.push_back({std::move(ring)});
      ++local.buildings;
    } else {
      drop(way, "");
    }
  }
  // HD maps take road widths from drivable-area geometry, which OSM lacks.
  if (mode == MapMode::kHd && !map.roads.empty()) {
    throw IngestError("OSM roads carry no widths; ingest as SD or widen first");
  }
  if (stats != nullptr) *stats = std::move(local);
  return map;
}

}  // namespace bevmatch::osm
