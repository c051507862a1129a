#include <doctest.h>

#include <string>
#include <vector>

#include "esgkg/errors.hpp"
#include "esgkg/graph.hpp"

namespace {

std::vector<esgkg::EsgTriple> fixture_triples() {
  return {
      {"Waste", "Reduction of", "Scrap", "A", 0},
      {"Waste", "Reduction of", "Scrap", "A", 1},  // same pair, second sentence
      {"Water", "Saving of", "Bottling water", "A", 2},
      {"Waste", "Recycling of", "Scrap", "B", 0},
      {"Energy", "Audit of", "Sites", "B", 4},
  };
}

}  // namespace

TEST_CASE("graph assembly sorts nodes and keeps per-triple edges") {
  auto kg = esgkg::build_kg(fixture_triples());

  CHECK(kg.company_nodes == std::vector<std::string>{"A", "B"});
  CHECK(kg.category_nodes == std::vector<std::string>{"Energy", "Waste", "Water"});
  CHECK(kg.object_nodes == std::vector<std::string>{"Bottling water", "Scrap", "Sites"});

  // Company-category incidence is a set, so the repeated A-Waste pair
  // collapses, while category-object edges keep every extracted triple.
  CHECK(kg.co_cat_edges.size() == 4);
  CHECK(kg.co_cat_edges.count({"A", "Waste"}) == 1);
  REQUIRE(kg.cat_obj_edges.size() == 5);
  CHECK(kg.cat_obj_edges[0].company_id == "A");
  CHECK(kg.cat_obj_edges[0].doc_index == 0);
  CHECK(kg.cat_obj_edges[1].doc_index == 1);
  CHECK(kg.cat_obj_edges[4].company_id == "B");
  CHECK(kg.cat_obj_edges[4].cat == "Energy");

  auto empty = esgkg::build_kg({});
  CHECK(empty.company_nodes.empty());
  CHECK(empty.cat_obj_edges.empty());
}

TEST_CASE("projections are binary incidence over sorted node lists") {
  auto kg = esgkg::build_kg(fixture_triples());

  auto cocat = esgkg::project(kg, esgkg::Projection::cocat);
  CHECK(cocat.left == std::vector<std::string>{"A", "B"});
  CHECK(cocat.right == std::vector<std::string>{"Energy", "Waste", "Water"});
  CHECK(cocat.edge_count() == 4);  // duplicate A-Waste counted once
  CHECK(cocat.at(0, 1));
  CHECK(cocat.at(0, 2));
  CHECK_FALSE(cocat.at(0, 0));
  CHECK(cocat.at(1, 0));
  CHECK(cocat.at(1, 1));
  CHECK_FALSE(cocat.at(1, 2));
  CHECK(esgkg::density(cocat) == doctest::Approx(4.0 / 6.0));

  auto catpred = esgkg::project(kg, esgkg::Projection::catpred);
  CHECK(catpred.left == std::vector<std::string>{"Energy", "Waste", "Water"});
  CHECK(catpred.right == std::vector<std::string>{"Audit of", "Recycling of",
                                                  "Reduction of", "Saving of"});
  CHECK(catpred.edge_count() == 4);
  CHECK(catpred.at(1, 1));
  CHECK(catpred.at(1, 2));

  auto coact = esgkg::project(kg, esgkg::Projection::coact);
  CHECK(coact.right == std::vector<std::string>{"ENERGY:Audit of", "WASTE:Recycling of",
                                                "WASTE:Reduction of", "WATER:Saving of"});
  CHECK(coact.edge_count() == 4);
  CHECK(coact.at(0, 2));
  CHECK(coact.at(0, 3));
  CHECK(coact.at(1, 0));
  CHECK(coact.at(1, 1));

  CHECK(esgkg::projection_name(esgkg::Projection::cocat) == "cocat");
  CHECK(esgkg::projection_name(esgkg::Projection::catpred) == "catpred");
  CHECK(esgkg::projection_name(esgkg::Projection::coact) == "coact");

  auto none = esgkg::project(esgkg::build_kg({}), esgkg::Projection::cocat);
  CHECK(none.edge_count() == 0);
  CHECK(esgkg::density(none) == 0.0);
}

TEST_CASE("knowledge graphs round-trip through json") {
  auto kg = esgkg::build_kg(fixture_triples());
  const std::string text = esgkg::kg_to_json(kg);
  auto back = esgkg::kg_from_json(text);

  CHECK(back.company_nodes == kg.company_nodes);
  CHECK(back.category_nodes == kg.category_nodes);
  CHECK(back.object_nodes == kg.object_nodes);
  CHECK(back.co_cat_edges == kg.co_cat_edges);
  CHECK(esgkg::kg_to_json(back) == text);

  CHECK_THROWS_AS(esgkg::kg_from_json("[]"), esgkg::ConfigInvalid);
  CHECK_THROWS_AS(esgkg::kg_from_json("{oops"), esgkg::ConfigInvalid);
}

TEST_CASE("bipartite edge lists serialize as csv with quoting") {
  auto kg = esgkg::build_kg(fixture_triples());
  auto cocat = esgkg::project(kg, esgkg::Projection::cocat);
  CHECK(esgkg::bipartite_to_csv(cocat) ==
        "left,right\nA,Waste\nA,Water\nB,Energy\nB,Waste\n");

  auto quoted = esgkg::build_kg({{"Waste, general", "Reduction of", "Scrap", "A", 0}});
  auto g = esgkg::project(quoted, esgkg::Projection::cocat);
  CHECK(esgkg::bipartite_to_csv(g) == "left,right\nA,\"Waste, general\"\n");
}
