#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "esgkg/extraction.hpp"

namespace esgkg {

struct CatObjEdge {
  std::string cat;
  std::string obj;
  std::string pred;
  std::string company_id;  // provenance
  int doc_index = 0;
};

// The assembled graph. Company-category incidences form a set; the
// category-object edges keep one entry per extracted triple so that
// predicate multiplicities survive into the analytics.
struct KnowledgeGraph {
  std::vector<std::string> company_nodes;   // sorted, unique
  std::vector<std::string> category_nodes;  // sorted, unique
  std::vector<std::string> object_nodes;    // sorted, unique
  std::set<std::pair<std::string, std::string>> co_cat_edges;
  std::vector<CatObjEdge> cat_obj_edges;    // sorted for reproducibility
};

KnowledgeGraph build_kg(const std::vector<EsgTriple>& triples);

enum class Projection {
  cocat,    // companies x categories
  catpred,  // categories x predicates
  coact,    // companies x actions (CAT:Pred)
};

std::string projection_name(Projection p);

// Unweighted bipartite incidence. The incidence matrix is binary even when
// the underlying triples repeat a pair.
struct BipartiteGraph {
  std::vector<std::string> left;   // sorted
  std::vector<std::string> right;  // sorted
  std::vector<std::uint8_t> incidence;  // row-major, left.size() x right.size()

  bool at(std::size_t i, std::size_t j) const { return incidence[i * right.size() + j] != 0; }
  std::size_t edge_count() const;
};

BipartiteGraph project(const KnowledgeGraph& kg, Projection p);

// |edges| / (n * m); zero when either side is empty.
double density(const BipartiteGraph& g);

std::string kg_to_json(const KnowledgeGraph& kg);
KnowledgeGraph kg_from_json(const std::string& content);

// Edge list CSV with header left,right.
std::string bipartite_to_csv(const BipartiteGraph& g);

}  // namespace esgkg
