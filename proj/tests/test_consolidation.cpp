#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "esgkg/clients.hpp"
#include "esgkg/consolidation.hpp"
#include "esgkg/errors.hpp"

namespace {

class MapEmbedBackend final : public esgkg::EmbeddingBackend {
 public:
  std::unordered_map<std::string, std::vector<double>> table;
  std::vector<std::vector<double>> embed_batch(
      const std::string&, const std::vector<std::string>& texts) override {
    std::vector<std::vector<double>> out;
    for (const auto& t : texts) out.push_back(table.at(t));
    return out;
  }
};

std::vector<esgkg::LabelCluster> cluster_fixture() {
  auto backend = std::make_shared<MapEmbedBackend>();
  // A chain: Expansion~Extension and Extension~Enlargement clear the 0.8
  // threshold while Expansion~Enlargement (cos 0.447) does not, so all three
  // belong to one component only through transitivity.
  backend->table["Expansion of"] = {1.0, 0.0, 0.0, 0.0};
  backend->table["Extension of"] = {0.85, std::sqrt(1.0 - 0.85 * 0.85), 0.0, 0.0};
  backend->table["Enlargement of"] = {0.45, 0.9, 0.0, 0.0};
  backend->table["Investment in"] = {0.0, 0.0, 1.0, 0.0};
  backend->table["Investment into"] = {0.0, 0.0, 1.0, 0.0};
  backend->table["Introduction of"] = {0.0, 0.0, 0.0, 1.0};
  esgkg::EmbeddingClient client(backend);

  // Scrambled order plus a duplicate: neither may affect the result.
  return esgkg::cluster_labels({"Investment into", "Enlargement of", "Introduction of",
                                "Expansion of", "Investment into", "Extension of",
                                "Investment in"},
                               client);
}

}  // namespace

TEST_CASE("labels merge across a similarity chain with medoid representatives") {
  auto clusters = cluster_fixture();
  REQUIRE(clusters.size() == 3);

  // Sorted by representative label. The chain's medoid is its middle member,
  // the one most similar to everything else.
  CHECK(clusters[0].label == "Extension of");
  CHECK(clusters[0].members == std::vector<std::string>{"Enlargement of", "Expansion of",
                                                        "Extension of"});
  CHECK(clusters[1].label == "Introduction of");
  CHECK(clusters[1].members == std::vector<std::string>{"Introduction of"});

  // Identical embeddings tie on summed similarity; the smaller label wins.
  CHECK(clusters[2].label == "Investment in");
  CHECK(clusters[2].members ==
        std::vector<std::string>{"Investment in", "Investment into"});

  esgkg::EmbeddingClient unused(std::make_shared<MapEmbedBackend>());
  CHECK(esgkg::cluster_labels({}, unused).empty());
}

TEST_CASE("a pair exactly at the threshold still merges") {
  auto backend = std::make_shared<MapEmbedBackend>();
  backend->table["half"] = {1.0, 1.0, 1.0, 1.0};  // cos 0.5 against the axis, exactly
  backend->table["axis"] = {1.0, 0.0, 0.0, 0.0};
  esgkg::EmbeddingClient client(backend);

  esgkg::ConsolidationConfig config;
  config.threshold = 0.5;
  auto clusters = esgkg::cluster_labels({"axis", "half"}, client, config);
  REQUIRE(clusters.size() == 1);
  CHECK(clusters[0].members == std::vector<std::string>{"axis", "half"});
}

TEST_CASE("centroid map relabels triples idempotently") {
  auto clusters = cluster_fixture();
  auto pred_map = esgkg::centroid_map(clusters);
  CHECK(pred_map.at("Investment into") == "Investment in");
  CHECK(pred_map.at("Investment in") == "Investment in");
  CHECK(pred_map.at("Expansion of") == "Extension of");

  std::map<std::string, std::string> cat_map{{"Waste", "Waste"}, {"Garbage", "Waste"}};
  std::vector<esgkg::EsgTriple> triples{
      {"Garbage", "Investment into", "Recycling plant", "A", 0},
      {"Waste", "Introduction of", "Sorting lines", "B", 3},
  };

  auto relabelled = esgkg::relabel_triples(triples, cat_map, pred_map);
  REQUIRE(relabelled.size() == 2);
  CHECK(relabelled[0].cat == "Waste");
  CHECK(relabelled[0].pred == "Investment in");
  CHECK(relabelled[0].obj == "Recycling plant");
  CHECK(relabelled[0].company_id == "A");
  CHECK(esgkg::relabel_triples(relabelled, cat_map, pred_map) == relabelled);

  std::vector<esgkg::EsgTriple> stray{{"Unknown", "Investment in", "X", "A", 0}};
  CHECK_THROWS_AS(esgkg::relabel_triples(stray, cat_map, pred_map),
                  esgkg::UnmappedLabel);
  std::vector<esgkg::EsgTriple> stray_pred{{"Waste", "Mystery of", "X", "A", 0}};
  CHECK_THROWS_AS(esgkg::relabel_triples(stray_pred, cat_map, pred_map),
                  esgkg::UnmappedLabel);
}

TEST_CASE("cluster maps round-trip through json and verify their kind") {
  auto clusters = cluster_fixture();
  const std::string text = esgkg::cluster_map_to_json(esgkg::LabelKind::predicate, clusters);
  CHECK(text.find("\"kind\": \"predicate\"") != std::string::npos);

  auto back = esgkg::cluster_map_from_json(text, esgkg::LabelKind::predicate);
  REQUIRE(back.size() == clusters.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].label == clusters[i].label);
    CHECK(back[i].members == clusters[i].members);
  }

  CHECK_THROWS_AS(esgkg::cluster_map_from_json(text, esgkg::LabelKind::category),
                  esgkg::ConfigInvalid);
  CHECK_THROWS_AS(esgkg::cluster_map_from_json("{\"broken\"", esgkg::LabelKind::category),
                  esgkg::ConfigInvalid);
}
