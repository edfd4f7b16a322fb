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

#include <gtest/gtest.h>

#include "bevmatch/error.hpp"

namespace bevmatch::osm {
namespace {

const std::string kData = BEVMATCH_TEST_DATA;

TEST(ParseTest, TwoNodesOneWay) {
  const Document doc = read_osm_file(kData + "/two_nodes.osm");
  ASSERT_EQ(doc.nodes.size(), 2u);
  ASSERT_EQ(doc.ways.size(), 1u);
  EXPECT_EQ(doc.ways[0].id, 10);
  EXPECT_EQ(doc.ways[0].node_refs, (std::vector<std::int64_t>{1, 2}));
  EXPECT_EQ(doc.ways[0].tags.at("highway"), "residential");
  EXPECT_DOUBLE_EQ(doc.nodes[1].lat, 48.0005);
}

TEST(ParseTest, RelationsOnlyIsEmpty) {
  const Document doc = read_osm_file(kData + "/relations_only.osm");
  EXPECT_TRUE(doc.nodes.empty());
  EXPECT_TRUE(doc.ways.empty());
}

TEST(ParseTest, TruncatedDocumentReportsLine) {
  const std::string text =
      "<?xml version=\"1.0\"?>\n<osm>\n  <node id=\"1\" lat=\"1\" lon=\"2\"/>\n"
      "  <way id=\"3\">\n    <nd ref=\"1\"";
  try {
    parse_osm_xml(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 5);
  }
}

TEST(ParseTest, WrongRootIsParseError) {
  EXPECT_THROW(parse_osm_xml("<gpx></gpx>"), ParseError);
  EXPECT_THROW(parse_osm_xml(""), ParseError);
}

TEST(ParseTest, NodeWithoutLatNamesId) {
  try {
    parse_osm_xml("<osm><node id=\"77\" lon=\"3\"/></osm>");
    FAIL() << "expected ElementError";
  } catch (const ElementError& e) {
    EXPECT_NE(std::string(e.what()).find("77"), std::string::npos);
  }
}

TEST(ParseTest, DuplicateNodeIdRejected) {
  EXPECT_THROW(parse_osm_xml("<osm><node id=\"1\" lat=\"0\" lon=\"0\"/>"
                             "<node id=\"1\" lat=\"0\" lon=\"0\"/></osm>"),
               ElementError);
}

Document fixture(std::vector<std::int64_t> refs,
                 std::map<std::string, std::string> tags) {
  Document doc;
  doc.nodes = {{1, 0.0, 0.0}, {2, 0.0, 0.0001}, {3, 0.0001, 0.0001},
               {4, 0.0001, 0.0}};
  doc.ways.push_back({99, std::move(refs), std::move(tags)});
  return doc;
}

TEST(ExtractTest, HighwayBecomesRoad) {
  ExtractStats stats;
  const VectorMap map =
      extract_vector_map(fixture({1, 2, 3}, {{"highway", "residential"}}),
                         LocalFrame(0, 0), MapMode::kSd, &stats);
  ASSERT_EQ(map.roads.size(), 1u);
  EXPECT_EQ(map.buildings.size(), 0u);
  EXPECT_EQ(map.roads[0].centerline.size(), 3u);
  EXPECT_FALSE(map.roads[0].width.has_value());
  EXPECT_EQ(stats.roads + stats.buildings + stats.dropped, stats.ways_in);
}

TEST(ExtractTest, ClosedBuildingDropsClosingVertex) {
  const VectorMap map =
      extract_vector_map(fixture({1, 2, 3, 4, 1}, {{"building", "yes"}}),
                         LocalFrame(0, 0), MapMode::kSd);
  ASSERT_EQ(map.buildings.size(), 1u);
  EXPECT_EQ(map.buildings[0].boundary.size(), 4u);
  EXPECT_TRUE(map.roads.empty());
}

TEST(ExtractTest, UntaggedAndOpenBuildingsDropped) {
  ExtractStats stats;
  EXPECT_TRUE(extract_vector_map(fixture({1, 2}, {}), LocalFrame(0, 0),
                                 MapMode::kSd, &stats)
                  .empty());
  EXPECT_EQ(stats.dropped, 1u);
  EXPECT_TRUE(stats.warnings.empty());

  EXPECT_TRUE(extract_vector_map(fixture({1, 2, 3, 4}, {{"building", "yes"}}),
                                 LocalFrame(0, 0), MapMode::kSd, &stats)
                  .empty());
  EXPECT_EQ(stats.dropped, 1u);
  EXPECT_EQ(stats.warnings.size(), 1u);
}

TEST(ExtractTest, DegenerateGeometryCountedNotThrown) {
  Document doc = fixture({1, 1}, {{"highway", "service"}});
  doc.ways.push_back({100, {1, 2, 1, 2, 1}, {{"building", "yes"}}});
  ExtractStats stats;
  const VectorMap map =
      extract_vector_map(doc, LocalFrame(0, 0), MapMode::kSd, &stats);
  EXPECT_TRUE(map.empty());
  EXPECT_EQ(stats.dropped, 2u);
  EXPECT_EQ(stats.warnings.size(), 2u);
}

TEST(ExtractTest, UnknownRefNamesWay) {
  try {
    extract_vector_map(fixture({1, 42}, {{"highway", "primary"}}),
                       LocalFrame(0, 0), MapMode::kSd);
    FAIL() << "expected IngestError";
  } catch (const IngestError& e) {
    EXPECT_NE(std::string(e.what()).find("way 99"), std::string::npos);
  }
}

TEST(ExtractTest, DeterministicAndConserving) {
  const Document doc = read_osm_file(kData + "/small_town.osm");
  ExtractStats a, b;
  const LocalFrame frame(48.0, 11.0);
  const VectorMap m1 = extract_vector_map(doc, frame, MapMode::kSd, &a);
  const VectorMap m2 = extract_vector_map(doc, frame, MapMode::kSd, &b);
  EXPECT_EQ(m1, m2);
  EXPECT_EQ(m1.roads.size(), 1u);
  EXPECT_EQ(m1.buildings.size(), 1u);
  EXPECT_EQ(a.ways_in, 3u);
  EXPECT_EQ(a.roads + a.buildings + a.dropped, a.ways_in);
  EXPECT_NO_THROW(validate(m1));
}

}  // namespace
}  // namespace bevmatch::osm
