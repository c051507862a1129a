#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "esgkg/clients.hpp"
#include "esgkg/graph.hpp"

namespace esgkg {

// ---------------------------------------------------------------------------
// Bipartite centralities
//
// All three are normalized against partition-aware maxima so that scores
// are comparable across projections of very different shapes:
//  - degree: neighbor count over the size of the opposite partition
//  - closeness: ideal intra-component distance sum over the actual sum,
//    scaled by (component reach - 1) / (N - 1) so that nodes in small
//    fragments cannot outrank nodes that reach the whole graph
//  - betweenness: Brandes' accumulation over the bipartite maximum
//    attainable pair count for the node's side (Borgatti-Everett maxima)

struct NodeCentrality {
  std::string node;
  double degree = 0.0;
  double closeness = 0.0;
  double betweenness = 0.0;
};

struct CentralityReport {
  std::vector<NodeCentrality> left;
  std::vector<NodeCentrality> right;
};

CentralityReport centralities(const BipartiteGraph& g);

// ---------------------------------------------------------------------------
// Entropy

// Shannon entropy in nats over occurrence counts: H = -sum p ln p with the
// 0 ln 0 = 0 convention. Throws AllZero when nothing occurred at all.
double shannon_entropy(std::span<const std::int64_t> counts);

// Per category: entropy of the predicate distribution attached to it.
std::map<std::string, double> category_entropy(const KnowledgeGraph& kg);

enum class CompanyEntropyKind { category, action };

// Per company: entropy of its triples over categories or over actions.
std::map<std::string, double> company_entropy(const KnowledgeGraph& kg,
                                              CompanyEntropyKind kind);

// ---------------------------------------------------------------------------
// Disclosure similarity

// |A n B| / |A u B|, with two empty sets defined as 0.
double jaccard_similarity(const std::set<std::string>& a, const std::set<std::string>& b);

struct ActionSets {
  std::vector<std::string> company_ids;
  std::vector<std::set<std::string>> actions;  // aligned with company_ids
};

ActionSets action_sets(const KnowledgeGraph& kg);

struct SquareMatrix {
  std::vector<std::string> ids;
  std::vector<double> values;  // row-major ids.size()^2

  double at(std::size_t i, std::size_t j) const { return values[i * ids.size() + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * ids.size() + j]; }
};

struct SimilarityResult {
  SquareMatrix observed;
  SquareMatrix null_mean;
  SquareMatrix adjusted;  // observed - null_mean
};

// Raw Jaccard overstates similarity for prolific disclosers: two companies
// drawing many actions from a finite pool overlap by chance alone. The null
// model repeats the comparison `sims` times with each company replaced by a
// uniform random subset of the pool of the same cardinality and subtracts
// the mean chance overlap. Throws CardinalityExceedsPool when a set cannot
// have come from the pool.
SimilarityResult null_adjusted_similarity(const ActionSets& sets,
                                          const std::vector<std::string>& pool,
                                          int sims = 1000, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Rank correlation

struct KendallResult {
  double tau = 0.0;
  double p_value = 1.0;  // two-sided, normal approximation
  long long concordant = 0;
  long long discordant = 0;
};

// tau = (nc - nd) / (nc + nd) where pairs tied in either variable count as
// neither concordant nor discordant. Computed by merge-sort inversion
// counting in exact integer arithmetic. Throws DegenerateInput when every
// pair is tied.
KendallResult kendall_tau(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Company feature similarity

// Numeric: sim = 1 - (|xi - xj| - dmin) / (dmax - dmin) with dmin and dmax
// taken over observed pairwise distances. A constant column (dmax == dmin)
// defines every observed pair as 1. Pairs with a missing side are NaN.
SquareMatrix numeric_feature_similarity(const std::vector<std::string>& ids,
                                        const std::vector<std::optional<double>>& values);

// Textual: values are embedded, compared by cosine, then min-max scaled to
// [0, 1] over observed off-diagonal pairs.
SquareMatrix textual_feature_similarity(const std::vector<std::string>& ids,
                                        const std::vector<std::optional<std::string>>& values,
                                        EmbeddingClient& client);

// ---------------------------------------------------------------------------
// CSV exports

std::string centralities_to_csv(const CentralityReport& report);
std::string entropy_to_csv(const std::map<std::string, double>& entropy);
std::string matrix_to_csv(const SquareMatrix& m);
SquareMatrix matrix_from_csv(const std::string& content);

// Edge list of company pairs whose similarity clears the threshold.
std::string similarity_edges_to_csv(const SquareMatrix& m, double threshold = 0.06);

}  // namespace esgkg
