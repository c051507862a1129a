#include "esgkg/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "esgkg/errors.hpp"
#include "esgkg/io.hpp"
#include "esgkg/rng.hpp"
#include "esgkg/search.hpp"

namespace esgkg {

namespace {

// Internal flat view: nodes 0..n-1 are the left partition, n..n+m-1 the
// right one, with plain adjacency lists for traversal.
struct FlatGraph {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<std::vector<std::size_t>> adj;

  std::size_t total() const { return n + m; }
  bool is_left(std::size_t v) const { return v < n; }
};

FlatGraph flatten(const BipartiteGraph& g) {
  FlatGraph f;
  f.n = g.left.size();
  f.m = g.right.size();
  f.adj.resize(f.total());
  for (std::size_t i = 0; i < f.n; ++i) {
    for (std::size_t j = 0; j < f.m; ++j) {
      if (!g.at(i, j)) continue;
      f.adj[i].push_back(f.n + j);
      f.adj[f.n + j].push_back(i);
    }
  }
  return f;
}

// Highest raw betweenness a node on a partition of size `same` can attain
// when the other partition has size `other` (Borgatti-Everett maxima for
// two-mode networks). Unordered pairs.
double betweenness_max(std::size_t same, std::size_t other) {
  if (same == 0 || other == 0) return 0.0;
  const long long n = static_cast<long long>(same);
  const long long m = static_cast<long long>(other);
  const long long s = (n - 1) / m;
  const long long t = (n - 1) % m;
  const long long twice =
      m * m * (s + 1) * (s + 1) + m * (s + 1) * (2 * t - s - 1) - t * (2 * s - t + 3);
  return static_cast<double>(twice) / 2.0;
}

std::vector<double> brandes_betweenness(const FlatGraph& g) {
  const std::size_t total = g.total();
  std::vector<double> centrality(total, 0.0);
  std::vector<long long> sigma(total);
  std::vector<int> dist(total);
  std::vector<double> delta(total);
  std::vector<std::vector<std::size_t>> preds(total);
  std::vector<std::size_t> order;
  order.reserve(total);

  for (std::size_t s = 0; s < total; ++s) {
    std::fill(sigma.begin(), sigma.end(), 0);
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(delta.begin(), delta.end(), 0.0);
    for (auto& p : preds) p.clear();
    order.clear();

    sigma[s] = 1;
    dist[s] = 0;
    std::deque<std::size_t> queue{s};
    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop_front();
      order.push_back(v);
      for (std::size_t w : g.adj[v]) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          queue.push_back(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          preds[w].push_back(v);
        }
      }
    }
    // Dependency accumulation in reverse BFS order.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const std::size_t w = *it;
      for (std::size_t v : preds[w])
        delta[v] += (static_cast<double>(sigma[v]) / sigma[w]) * (1.0 + delta[w]);
      if (w != s) centrality[w] += delta[w];
    }
  }
  // Each unordered pair was accumulated from both endpoints.
  for (double& c : centrality) c /= 2.0;
  return centrality;
}

}  // namespace

CentralityReport centralities(const BipartiteGraph& g) {
  const FlatGraph f = flatten(g);
  const std::size_t total = f.total();

  std::vector<double> degree(total, 0.0);
  for (std::size_t v = 0; v < total; ++v) {
    const std::size_t other = f.is_left(v) ? f.m : f.n;
    degree[v] = other == 0 ? 0.0 : static_cast<double>(f.adj[v].size()) / other;
  }

  // Closeness by BFS from every node.
  std::vector<double> closeness(total, 0.0);
  std::vector<int> dist(total);
  for (std::size_t s = 0; s < total; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[s] = 0;
    std::deque<std::size_t> queue{s};
    long long dist_sum = 0;
    std::size_t same_side = 0;
    std::size_t other_side = 0;
    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop_front();
      dist_sum += dist[v];
      if (f.is_left(v) == f.is_left(s)) ++same_side;
      else ++other_side;
      for (std::size_t w : f.adj[v]) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          queue.push_back(w);
        }
      }
    }
    if (dist_sum <= 0 || total <= 1) continue;  // isolated node stays 0
    // Best possible sum inside this component: 1 to every opposite-side
    // member, 2 to every same-side one.
    const double ideal = static_cast<double>(other_side) + 2.0 * (same_side - 1);
    const double reach = static_cast<double>(same_side + other_side);
    closeness[s] = (ideal / dist_sum) * ((reach - 1.0) / (total - 1.0));
  }

  std::vector<double> betweenness = brandes_betweenness(f);
  const double max_left = betweenness_max(f.n, f.m);
  const double max_right = betweenness_max(f.m, f.n);
  for (std::size_t v = 0; v < total; ++v) {
    const double norm = f.is_left(v) ? max_left : max_right;
    betweenness[v] = norm > 0.0 ? betweenness[v] / norm : 0.0;
  }

  CentralityReport report;
  for (std::size_t i = 0; i < f.n; ++i)
    report.left.push_back({g.left[i], degree[i], closeness[i], betweenness[i]});
  for (std::size_t j = 0; j < f.m; ++j)
    report.right.push_back(
        {g.right[j], degree[f.n + j], closeness[f.n + j], betweenness[f.n + j]});
  return report;
}

// ---------------------------------------------------------------------------
// Entropy

double shannon_entropy(std::span<const std::int64_t> counts) {
  long long total = 0;
  for (std::int64_t c : counts) {
    if (c < 0) throw AllZero("negative count");
    total += c;
  }
  if (total == 0) throw AllZero("all counts are zero");
  double h = 0.0;
  for (std::int64_t c : counts) {
    if (c == 0) continue;  // 0 ln 0 = 0
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

std::map<std::string, double> category_entropy(const KnowledgeGraph& kg) {
  std::map<std::string, std::map<std::string, std::int64_t>> counts;
  for (const auto& e : kg.cat_obj_edges) ++counts[e.cat][e.pred];
  std::map<std::string, double> out;
  for (const auto& [cat, preds] : counts) {
    std::vector<std::int64_t> values;
    values.reserve(preds.size());
    for (const auto& [pred, count] : preds) values.push_back(count);
    out[cat] = shannon_entropy(values);
  }
  return out;
}

std::map<std::string, double> company_entropy(const KnowledgeGraph& kg,
                                              CompanyEntropyKind kind) {
  std::map<std::string, std::map<std::string, std::int64_t>> counts;
  for (const auto& e : kg.cat_obj_edges) {
    const std::string key = kind == CompanyEntropyKind::category
                                ? e.cat
                                : action_canonical(e.cat, e.pred);
    ++counts[e.company_id][key];
  }
  std::map<std::string, double> out;
  for (const auto& [company, keys] : counts) {
    std::vector<std::int64_t> values;
    values.reserve(keys.size());
    for (const auto& [key, count] : keys) values.push_back(count);
    out[company] = shannon_entropy(values);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Similarity

double jaccard_similarity(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& item : a) inter += b.count(item);
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

ActionSets action_sets(const KnowledgeGraph& kg) {
  std::map<std::string, std::set<std::string>> by_company;
  for (const auto& e : kg.cat_obj_edges)
    by_company[e.company_id].insert(action_canonical(e.cat, e.pred));
  ActionSets out;
  for (auto& [company, actions] : by_company) {
    out.company_ids.push_back(company);
    out.actions.push_back(std::move(actions));
  }
  return out;
}

SimilarityResult null_adjusted_similarity(const ActionSets& sets,
                                          const std::vector<std::string>& pool,
                                          int sims, std::uint64_t seed) {
  const std::size_t c = sets.company_ids.size();
  const std::size_t pool_size = pool.size();

  std::map<std::string, std::size_t> pool_index;
  for (std::size_t i = 0; i < pool_size; ++i) pool_index[pool[i]] = i;

  std::vector<std::size_t> cardinality(c);
  std::vector<std::vector<std::uint8_t>> membership(c,
      std::vector<std::uint8_t>(pool_size, 0));
  for (std::size_t i = 0; i < c; ++i) {
    if (sets.actions[i].size() > pool_size)
      throw CardinalityExceedsPool(sets.company_ids[i] + " has " +
                                   std::to_string(sets.actions[i].size()) +
                                   " actions, pool has " + std::to_string(pool_size));
    cardinality[i] = sets.actions[i].size();
    for (const auto& action : sets.actions[i]) {
      auto it = pool_index.find(action);
      if (it == pool_index.end())
        throw CardinalityExceedsPool("action outside pool: " + action);
      membership[i][it->second] = 1;
    }
  }

  auto make_matrix = [&] {
    SquareMatrix m;
    m.ids = sets.company_ids;
    m.values.assign(c * c, 0.0);
    return m;
  };
  SimilarityResult result{make_matrix(), make_matrix(), make_matrix()};

  auto jaccard_masks = [&](const std::vector<std::uint8_t>& a,
                           const std::vector<std::uint8_t>& b) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t k = 0; k < pool_size; ++k) {
      inter += a[k] & b[k];
      uni += a[k] | b[k];
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
  };

  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j)
      result.observed.at(i, j) = jaccard_masks(membership[i], membership[j]);

  // Null model: every company redrawn as a uniform subset of the pool with
  // its own cardinality, independently in each simulation.
  SplitMix64 rng(seed);
  std::vector<std::size_t> scratch(pool_size);
  std::vector<std::vector<std::uint8_t>> sample(c, std::vector<std::uint8_t>(pool_size, 0));
  for (int s = 0; s < sims; ++s) {
    for (std::size_t i = 0; i < c; ++i) {
      std::fill(sample[i].begin(), sample[i].end(), 0);
      std::iota(scratch.begin(), scratch.end(), 0);
      // Partial Fisher-Yates: the first cardinality[i] slots become the draw.
      for (std::size_t k = 0; k < cardinality[i]; ++k) {
        const std::size_t pick = k + static_cast<std::size_t>(rng.next_below(pool_size - k));
        std::swap(scratch[k], scratch[pick]);
        sample[i][scratch[k]] = 1;
      }
    }
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t j = 0; j < c; ++j)
        result.null_mean.at(i, j) += jaccard_masks(sample[i], sample[j]);
  }
  if (sims > 0)
    for (double& v : result.null_mean.values) v /= sims;

  for (std::size_t i = 0; i < c * c; ++i)
    result.adjusted.values[i] = result.observed.values[i] - result.null_mean.values[i];
  return result;
}

// ---------------------------------------------------------------------------
// Kendall rank correlation

namespace {

// Counts strictly decreasing pairs (inversions) in `seq` by merge sort.
long long count_inversions(std::vector<double>& seq) {
  const std::size_t n = seq.size();
  if (n < 2) return 0;
  std::vector<double> buffer(n);
  long long inversions = 0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo + width < n; lo += 2 * width) {
      const std::size_t mid = lo + width;
      const std::size_t hi = std::min(lo + 2 * width, n);
      std::size_t a = lo, b = mid, k = lo;
      while (a < mid && b < hi) {
        if (seq[b] < seq[a]) {
          inversions += static_cast<long long>(mid - a);
          buffer[k++] = seq[b++];
        } else {
          buffer[k++] = seq[a++];
        }
      }
      while (a < mid) buffer[k++] = seq[a++];
      while (b < hi) buffer[k++] = seq[b++];
      std::copy(buffer.begin() + lo, buffer.begin() + hi, seq.begin() + lo);
    }
  }
  return inversions;
}

long long tied_pairs(std::vector<double> sorted_keys) {
  long long total = 0;
  std::size_t i = 0;
  while (i < sorted_keys.size()) {
    std::size_t j = i;
    while (j < sorted_keys.size() && sorted_keys[j] == sorted_keys[i]) ++j;
    const long long run = static_cast<long long>(j - i);
    total += run * (run - 1) / 2;
    i = j;
  }
  return total;
}

}  // namespace

KendallResult kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw DimensionMismatch("rank inputs of length " + std::to_string(x.size()) +
                            " vs " + std::to_string(y.size()));
  const std::size_t n = x.size();
  if (n < 2) throw DegenerateInput("need at least two observations");

  // Sort by (x, y); after that, discordant pairs are exactly the strict
  // y-inversions, because y is ascending inside every tied-x block.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return y[a] < y[b];
  });

  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[idx[i]];
    ys[i] = y[idx[i]];
  }

  const long long n0 = static_cast<long long>(n) * (n - 1) / 2;
  const long long ties_x = tied_pairs(xs);
  std::vector<double> ys_sorted = ys;
  std::sort(ys_sorted.begin(), ys_sorted.end());
  const long long ties_y = tied_pairs(ys_sorted);

  long long ties_xy = 0;
  {
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j < n && xs[j] == xs[i] && ys[j] == ys[i]) ++j;
      const long long run = static_cast<long long>(j - i);
      ties_xy += run * (run - 1) / 2;
      i = j;
    }
  }

  std::vector<double> ys_mut = ys;
  const long long discordant = count_inversions(ys_mut);
  const long long untied = n0 - ties_x - ties_y + ties_xy;
  const long long concordant = untied - discordant;
  if (untied == 0) throw DegenerateInput("every pair is tied");

  KendallResult result;
  result.concordant = concordant;
  result.discordant = discordant;
  result.tau = static_cast<double>(concordant - discordant) / static_cast<double>(untied);

  // Two-sided p-value from the normal approximation to S = nc - nd under
  // independence; variance n(n-1)(2n+5)/18 (ties make this conservative).
  const double var_s = static_cast<double>(n) * (n - 1.0) * (2.0 * n + 5.0) / 18.0;
  const double z = static_cast<double>(concordant - discordant) / std::sqrt(var_s);
  result.p_value = std::erfc(std::abs(z) / std::sqrt(2.0));
  return result;
}

// ---------------------------------------------------------------------------
// Feature similarity

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SquareMatrix scaled_similarity(const std::vector<std::string>& ids,
                               const std::vector<std::vector<double>>& distance,
                               bool already_similarity) {
  const std::size_t n = ids.size();
  SquareMatrix m;
  m.ids = ids;
  m.values.assign(n * n, kNaN);

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = distance[i][j];
      if (std::isnan(d)) continue;
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  const bool constant = !(hi > lo);  // also covers "no observed pairs"

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        if (!std::isnan(distance[i][j])) m.at(i, j) = 1.0;
        continue;
      }
      const double d = distance[i][j];
      if (std::isnan(d)) continue;
      if (constant) {
        m.at(i, j) = 1.0;
      } else if (already_similarity) {
        m.at(i, j) = (d - lo) / (hi - lo);
      } else {
        m.at(i, j) = 1.0 - (d - lo) / (hi - lo);
      }
    }
  }
  return m;
}

}  // namespace

SquareMatrix numeric_feature_similarity(const std::vector<std::string>& ids,
                                        const std::vector<std::optional<double>>& values) {
  const std::size_t n = ids.size();
  std::vector<std::vector<double>> distance(n, std::vector<double>(n, kNaN));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!values[i] || !values[j]) continue;
      distance[i][j] = std::abs(*values[i] - *values[j]);
    }
  }
  return scaled_similarity(ids, distance, false);
}

SquareMatrix textual_feature_similarity(const std::vector<std::string>& ids,
                                        const std::vector<std::optional<std::string>>& values,
                                        EmbeddingClient& client) {
  const std::size_t n = ids.size();
  std::vector<std::string> present;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < n; ++i) {
    if (values[i]) {
      present.push_back(*values[i]);
      where.push_back(i);
    }
  }
  std::vector<std::optional<EmbeddingVector>> vectors(n);
  if (!present.empty()) {
    auto embedded = client.embed("Represent the title", present);
    for (std::size_t k = 0; k < where.size(); ++k) vectors[where[k]] = std::move(embedded[k]);
  }

  std::vector<std::vector<double>> cosine(n, std::vector<double>(n, kNaN));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!vectors[i] || !vectors[j]) continue;
      cosine[i][j] = cosine_similarity(*vectors[i], *vectors[j]);
    }
  }
  return scaled_similarity(ids, cosine, true);
}

// ---------------------------------------------------------------------------
// CSV exports

std::string centralities_to_csv(const CentralityReport& report) {
  std::string out = "node,degree,closeness,betweenness\n";
  auto emit = [&](const std::vector<NodeCentrality>& nodes) {
    for (const auto& nc : nodes) {
      out += csv_join({nc.node, format_double(nc.degree), format_double(nc.closeness),
                       format_double(nc.betweenness)});
      out += '\n';
    }
  };
  emit(report.left);
  emit(report.right);
  return out;
}

std::string entropy_to_csv(const std::map<std::string, double>& entropy) {
  std::string out = "node,entropy_nats\n";
  for (const auto& [node, h] : entropy) {
    out += csv_join({node, format_double(h)});
    out += '\n';
  }
  return out;
}

std::string matrix_to_csv(const SquareMatrix& m) {
  std::string out = "id";
  for (const auto& id : m.ids) out += "," + csv_escape(id);
  out += '\n';
  for (std::size_t i = 0; i < m.ids.size(); ++i) {
    out += csv_escape(m.ids[i]);
    for (std::size_t j = 0; j < m.ids.size(); ++j) {
      const double v = m.at(i, j);
      out += ',';
      out += std::isnan(v) ? "" : format_double(v);
    }
    out += '\n';
  }
  return out;
}

SquareMatrix matrix_from_csv(const std::string& content) {
  const auto rows = parse_csv(content);
  if (rows.empty() || rows[0].empty() || rows[0][0] != "id")
    throw ConfigInvalid("similarity matrix CSV must start with an id header");
  SquareMatrix m;
  m.ids.assign(rows[0].begin() + 1, rows[0].end());
  const std::size_t n = m.ids.size();
  if (rows.size() != n + 1) throw ConfigInvalid("similarity matrix is not square");
  m.values.assign(n * n, kNaN);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = rows[i + 1];
    if (row.size() != n + 1 || row[0] != m.ids[i])
      throw ConfigInvalid("similarity matrix row/column ids disagree");
    for (std::size_t j = 0; j < n; ++j) {
      if (!row[j + 1].empty()) m.at(i, j) = std::stod(row[j + 1]);
    }
  }
  return m;
}

std::string similarity_edges_to_csv(const SquareMatrix& m, double threshold) {
  std::string out = "company_a,company_b,similarity\n";
  for (std::size_t i = 0; i < m.ids.size(); ++i) {
    for (std::size_t j = i + 1; j < m.ids.size(); ++j) {
      const double v = m.at(i, j);
      if (std::isnan(v) || v < threshold) continue;
      out += csv_join({m.ids[i], m.ids[j], format_double(v)});
      out += '\n';
    }
  }
  return out;
}

}  // namespace esgkg
