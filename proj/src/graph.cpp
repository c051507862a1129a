#include "esgkg/graph.hpp"

#include <algorithm>
#include <map>

#include <nlohmann/json.hpp>

#include "esgkg/errors.hpp"
#include "esgkg/io.hpp"

namespace esgkg {

using json = nlohmann::json;

std::string projection_name(Projection p) {
  switch (p) {
    case Projection::cocat: return "cocat";
    case Projection::catpred: return "catpred";
    case Projection::coact: return "coact";
  }
  return "unknown";
}

KnowledgeGraph build_kg(const std::vector<EsgTriple>& triples) {
  KnowledgeGraph kg;
  std::set<std::string> companies, categories, objects;
  for (const auto& t : triples) {
    companies.insert(t.company_id);
    categories.insert(t.cat);
    objects.insert(t.obj);
    kg.co_cat_edges.emplace(t.company_id, t.cat);
    kg.cat_obj_edges.push_back({t.cat, t.obj, t.pred, t.company_id, t.doc_index});
  }
  kg.company_nodes.assign(companies.begin(), companies.end());
  kg.category_nodes.assign(categories.begin(), categories.end());
  kg.object_nodes.assign(objects.begin(), objects.end());
  std::sort(kg.cat_obj_edges.begin(), kg.cat_obj_edges.end(),
            [](const CatObjEdge& a, const CatObjEdge& b) {
              return std::tie(a.company_id, a.doc_index, a.cat, a.pred, a.obj) <
                     std::tie(b.company_id, b.doc_index, b.cat, b.pred, b.obj);
            });
  return kg;
}

std::size_t BipartiteGraph::edge_count() const {
  std::size_t count = 0;
  for (std::uint8_t v : incidence) count += v;
  return count;
}

BipartiteGraph project(const KnowledgeGraph& kg, Projection p) {
  std::set<std::string> left_set, right_set;
  std::set<std::pair<std::string, std::string>> edges;

  switch (p) {
    case Projection::cocat:
      for (const auto& [company, cat] : kg.co_cat_edges) {
        left_set.insert(company);
        right_set.insert(cat);
        edges.emplace(company, cat);
      }
      break;
    case Projection::catpred:
      for (const auto& e : kg.cat_obj_edges) {
        left_set.insert(e.cat);
        right_set.insert(e.pred);
        edges.emplace(e.cat, e.pred);
      }
      break;
    case Projection::coact:
      for (const auto& e : kg.cat_obj_edges) {
        const std::string action = action_canonical(e.cat, e.pred);
        left_set.insert(e.company_id);
        right_set.insert(action);
        edges.emplace(e.company_id, action);
      }
      break;
  }

  BipartiteGraph g;
  g.left.assign(left_set.begin(), left_set.end());
  g.right.assign(right_set.begin(), right_set.end());
  g.incidence.assign(g.left.size() * g.right.size(), 0);

  std::map<std::string, std::size_t> left_index, right_index;
  for (std::size_t i = 0; i < g.left.size(); ++i) left_index[g.left[i]] = i;
  for (std::size_t j = 0; j < g.right.size(); ++j) right_index[g.right[j]] = j;
  for (const auto& [l, r] : edges)
    g.incidence[left_index[l] * g.right.size() + right_index[r]] = 1;
  return g;
}

double density(const BipartiteGraph& g) {
  const std::size_t n = g.left.size();
  const std::size_t m = g.right.size();
  if (n == 0 || m == 0) return 0.0;
  return static_cast<double>(g.edge_count()) / (static_cast<double>(n) * static_cast<double>(m));
}

std::string kg_to_json(const KnowledgeGraph& kg) {
  nlohmann::ordered_json out;
  out["company_nodes"] = kg.company_nodes;
  out["category_nodes"] = kg.category_nodes;
  out["object_nodes"] = kg.object_nodes;
  auto& co_cat = out["co_cat_edges"] = nlohmann::ordered_json::array();
  for (const auto& [company, cat] : kg.co_cat_edges) {
    co_cat.push_back({{"company_id", company}, {"cat", cat}});
  }
  auto& cat_obj = out["cat_obj_edges"] = nlohmann::ordered_json::array();
  for (const auto& e : kg.cat_obj_edges) {
    cat_obj.push_back({{"cat", e.cat},
                       {"obj", e.obj},
                       {"pred", e.pred},
                       {"company_id", e.company_id},
                       {"doc_index", e.doc_index}});
  }
  return out.dump(2) + "\n";
}

KnowledgeGraph kg_from_json(const std::string& content) {
  json parsed = json::parse(content, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object())
    throw ConfigInvalid("knowledge graph JSON is malformed");
  KnowledgeGraph kg;
  kg.company_nodes = parsed.at("company_nodes").get<std::vector<std::string>>();
  kg.category_nodes = parsed.at("category_nodes").get<std::vector<std::string>>();
  kg.object_nodes = parsed.at("object_nodes").get<std::vector<std::string>>();
  for (const auto& e : parsed.at("co_cat_edges"))
    kg.co_cat_edges.emplace(e.at("company_id").get<std::string>(),
                            e.at("cat").get<std::string>());
  for (const auto& e : parsed.at("cat_obj_edges"))
    kg.cat_obj_edges.push_back({e.at("cat").get<std::string>(),
                                e.at("obj").get<std::string>(),
                                e.at("pred").get<std::string>(),
                                e.at("company_id").get<std::string>(),
                                e.at("doc_index").get<int>()});
  return kg;
}

std::string bipartite_to_csv(const BipartiteGraph& g) {
  std::string out = "left,right\n";
  for (std::size_t i = 0; i < g.left.size(); ++i) {
    for (std::size_t j = 0; j < g.right.size(); ++j) {
      if (!g.at(i, j)) continue;
      out += csv_join({g.left[i], g.right[j]});
      out += '\n';
    }
  }
  return out;
}

}  // namespace esgkg
