#include "esgkg/consolidation.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "esgkg/errors.hpp"
#include "esgkg/search.hpp"

namespace esgkg {

using json = nlohmann::json;

std::string label_kind_name(LabelKind kind) {
  return kind == LabelKind::category ? "category" : "predicate";
}

std::vector<LabelCluster> cluster_labels(const std::vector<std::string>& labels,
                                         EmbeddingClient& client,
                                         const ConsolidationConfig& config) {
  // Distinct labels in a fixed order so results never depend on input order.
  std::vector<std::string> distinct(labels.begin(), labels.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.empty()) return {};

  const auto vectors = client.embed(config.embed_instruction, distinct);
  const std::size_t n = distinct.size();

  // Union-find over the threshold graph.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };

  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      sim[i][j] = sim[j][i] = cosine_similarity(vectors[i], vectors[j]);
      if (sim[i][j] >= config.threshold) {
        const std::size_t ri = find(i);
        const std::size_t rj = find(j);
        if (ri != rj) parent[ri] = rj;
      }
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> components;
  for (std::size_t i = 0; i < n; ++i) components[find(i)].push_back(i);

  std::vector<LabelCluster> clusters;
  clusters.reserve(components.size());
  for (auto& [root, members] : components) {
    LabelCluster cluster;
    // Medoid: the member closest to all others in summed cosine. Ties go
    // to the lexicographically smaller label. Members arrive index-sorted,
    // which is also lexicographic because `distinct` is sorted.
    double best_sum = -1.0;
    std::size_t best = members.front();
    for (std::size_t i : members) {
      double total = 0.0;
      for (std::size_t j : members)
        if (j != i) total += sim[i][j];
      if (total > best_sum) {
        best_sum = total;
        best = i;
      }
    }
    cluster.label = distinct[best];
    for (std::size_t i : members) cluster.members.push_back(distinct[i]);
    clusters.push_back(std::move(cluster));
  }
  std::sort(clusters.begin(), clusters.end(),
            [](const LabelCluster& a, const LabelCluster& b) { return a.label < b.label; });
  return clusters;
}

std::map<std::string, std::string> centroid_map(const std::vector<LabelCluster>& clusters) {
  std::map<std::string, std::string> out;
  for (const auto& cluster : clusters)
    for (const auto& member : cluster.members) out[member] = cluster.label;
  return out;
}

std::vector<EsgTriple> relabel_triples(std::vector<EsgTriple> triples,
                                       const std::map<std::string, std::string>& cat_map,
                                       const std::map<std::string, std::string>& pred_map) {
  for (auto& triple : triples) {
    auto cat = cat_map.find(triple.cat);
    if (cat == cat_map.end()) throw UnmappedLabel("category \"" + triple.cat + "\"");
    auto pred = pred_map.find(triple.pred);
    if (pred == pred_map.end()) throw UnmappedLabel("predicate \"" + triple.pred + "\"");
    triple.cat = cat->second;
    triple.pred = pred->second;
  }
  return triples;
}

std::string cluster_map_to_json(LabelKind kind, const std::vector<LabelCluster>& clusters) {
  json out;
  out["kind"] = label_kind_name(kind);
  out["clusters"] = json::array();
  for (const auto& cluster : clusters) {
    json entry;
    entry["label"] = cluster.label;
    entry["members"] = cluster.members;
    out["clusters"].push_back(entry);
  }
  return out.dump(2) + "\n";
}

std::vector<LabelCluster> cluster_map_from_json(const std::string& content,
                                                LabelKind expected_kind) {
  json parsed = json::parse(content, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("clusters"))
    throw ConfigInvalid("cluster map JSON is malformed");
  if (parsed.value("kind", "") != label_kind_name(expected_kind))
    throw ConfigInvalid("cluster map kind mismatch: expected " +
                        label_kind_name(expected_kind));
  std::vector<LabelCluster> out;
  for (const auto& entry : parsed["clusters"]) {
    LabelCluster cluster;
    cluster.label = entry.at("label").get<std::string>();
    cluster.members = entry.at("members").get<std::vector<std::string>>();
    out.push_back(std::move(cluster));
  }
  return out;
}

}  // namespace esgkg
