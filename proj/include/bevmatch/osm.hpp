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

#ifndef BEVMATCH_OSM_HPP_
#define BEVMATCH_OSM_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "bevmatch/vecmap.hpp"

namespace bevmatch::osm {

struct Node {
  std::int64_t id = 0;
  double lat = 0.0;
  double lon = 0.0;
};

struct Way {
  std::int64_t id = 0;
  std::vector<std::int64_t> node_refs;
  std::map<std::string, std::string> tags;
};

struct Document {
  std::vector<Node> nodes;
  std::vector<Way> ways;
};

// Parses the node/way/nd/tag subset of OSM XML. Relations, bounds and other
// elements are skipped. Throws ParseError for malformed XML or a non-<osm>
// root and ElementError for a node without lat/lon or a duplicate node id.
Document parse_osm_xml(std::string_view text);
Document read_osm_file(const std::string& path);

struct ExtractStats {
  std::size_t ways_in = 0;
  std::size_t roads = 0;
  std::size_t buildings = 0;
  // Ways without a usable tag, unclosed buildings, degenerate geometry.
  std::size_t dropped = 0;
  std::vector<std::string> warnings;
};

// highway=* ways become roads (width unset), closed building=* ways become
// buildings with the closing vertex removed. Everything else is dropped.
// Throws IngestError naming the way when a node ref cannot be resolved.
VectorMap extract_vector_map(const Document& doc, const LocalFrame& frame,
                             MapMode mode, ExtractStats* stats = nullptr);

}  // namespace bevmatch::osm

#endif  // BEVMATCH_OSM_HPP_
