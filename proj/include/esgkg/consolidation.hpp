#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "esgkg/clients.hpp"
#include "esgkg/extraction.hpp"

namespace esgkg {

enum class LabelKind { category, predicate };

std::string label_kind_name(LabelKind kind);

struct LabelCluster {
  std::string label;                 // the member chosen to represent the cluster
  std::vector<std::string> members;  // sorted, unique
};

struct ConsolidationConfig {
  double threshold = 0.8;  // cosine at or above this links two labels
  std::string embed_instruction = "Represent the title";
};

// Groups near-duplicate surface forms: labels are embedded, pairs scoring
// at or above the threshold are connected, and each connected component
// becomes a cluster represented by its medoid, the member with the highest
// summed similarity to the rest (lexicographic on ties). Free-text
// generation spells one concept a dozen ways; this folds them together.
std::vector<LabelCluster> cluster_labels(const std::vector<std::string>& labels,
                                         EmbeddingClient& client,
                                         const ConsolidationConfig& config = {});

// label -> representative for every member of every cluster.
std::map<std::string, std::string> centroid_map(const std::vector<LabelCluster>& clusters);

// Rewrites cat and pred through their maps. Every label present in the
// triples must be mapped or UnmappedLabel is thrown. Applying the result
// through the same maps again changes nothing.
std::vector<EsgTriple> relabel_triples(std::vector<EsgTriple> triples,
                                       const std::map<std::string, std::string>& cat_map,
                                       const std::map<std::string, std::string>& pred_map);

// {"kind": ..., "clusters": [{"label": ..., "members": [...]}]}
std::string cluster_map_to_json(LabelKind kind, const std::vector<LabelCluster>& clusters);
std::vector<LabelCluster> cluster_map_from_json(const std::string& content,
                                                LabelKind expected_kind);

}  // namespace esgkg
