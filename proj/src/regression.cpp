#include "esgkg/regression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "esgkg/analytics.hpp"
#include "esgkg/errors.hpp"
#include "esgkg/io.hpp"
#include "esgkg/rng.hpp"
#include "esgkg/search.hpp"

#include <nlohmann/json.hpp>

namespace esgkg {

using json = nlohmann::json;

namespace {

double parse_required_double(const std::string& cell, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw ConfigInvalid("bad numeric value for " + what + ": \"" + cell + "\"");
  }
}

std::optional<double> parse_optional_double(const std::string& cell, const std::string& what) {
  if (trim(cell).empty()) return std::nullopt;
  return parse_required_double(cell, what);
}

}  // namespace

std::vector<CompanyRecord> load_company_records(const std::filesystem::path& path) {
  const auto rows = parse_csv(read_file(path));
  const std::vector<std::string> expected = {
      "company_id", "esg_combined", "env_score", "social_score", "gov_score",
      "sector", "industry", "country", "region", "subregion", "continent",
      "incorporation_year", "employees", "market_cap", "ebitda", "liabilities"};
  if (rows.empty() || rows[0] != expected)
    throw ConfigInvalid("company records header mismatch in " + path.string());

  std::vector<CompanyRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != expected.size())
      throw ConfigInvalid("records row " + std::to_string(r) + " has " +
                          std::to_string(row.size()) + " fields");
    CompanyRecord rec;
    rec.company_id = row[0];
    rec.esg_combined = parse_required_double(row[1], "esg_combined");
    rec.env_score = parse_required_double(row[2], "env_score");
    rec.social_score = parse_required_double(row[3], "social_score");
    rec.gov_score = parse_required_double(row[4], "gov_score");
    for (double score : {rec.esg_combined, rec.env_score, rec.social_score, rec.gov_score}) {
      if (score < 0.0 || score > 100.0)
        throw ConfigInvalid("score out of [0,100] for " + rec.company_id);
    }
    rec.sector = row[5];
    rec.industry = row[6];
    rec.country = row[7];
    rec.region = row[8];
    rec.subregion = row[9];
    rec.continent = row[10];
    if (auto year = parse_optional_double(row[11], "incorporation_year"))
      rec.incorporation_year = static_cast<int>(*year);
    rec.employees = parse_optional_double(row[12], "employees");
    rec.market_cap = parse_optional_double(row[13], "market_cap");
    rec.ebitda = parse_optional_double(row[14], "ebitda");
    rec.liabilities = parse_optional_double(row[15], "liabilities");
    out.push_back(std::move(rec));
  }
  return out;
}

std::map<std::string, char> load_pillar_map(const std::filesystem::path& path) {
  json parsed = json::parse(read_file(path), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object())
    throw ConfigInvalid("pillar map must be a JSON object: " + path.string());
  std::map<std::string, char> out;
  for (const auto& [category, pillar] : parsed.items()) {
    const std::string p = pillar.get<std::string>();
    if (p != "E" && p != "S" && p != "G")
      throw ConfigInvalid("pillar for \"" + category + "\" must be E, S or G");
    out[category] = p[0];
  }
  if (out.empty()) throw ConfigInvalid("pillar map is empty: " + path.string());
  return out;
}

// ---------------------------------------------------------------------------
// Feature construction

FeatureMatrix build_features(const std::vector<EsgTriple>& triples,
                             const std::vector<CompanyRecord>& records,
                             const std::map<std::string, char>& pillar_map,
                             EmbeddingClient& client, double pillar_floor) {
  // Triple counts per company and category.
  std::map<std::string, std::map<std::string, std::int64_t>> cat_counts;
  std::map<std::string, std::map<std::string, std::int64_t>> action_counts;
  for (const auto& t : triples) {
    ++cat_counts[t.company_id][t.cat];
    ++action_counts[t.company_id][action_canonical(t.cat, t.pred)];
  }

  for (const auto& rec : records) {
    if (!cat_counts.count(rec.company_id))
      throw MissingRecord("company has a record but no triples: " + rec.company_id);
  }

  // Map every distinct extracted category to a reference pillar. Exact
  // matches short-circuit; the rest go to the nearest reference category
  // by embedding similarity, provided it clears the floor.
  std::set<std::string> extracted;
  for (const auto& t : triples) extracted.insert(t.cat);
  std::vector<std::string> reference;
  for (const auto& [category, pillar] : pillar_map) reference.push_back(category);

  std::map<std::string, char> pillar_of;
  std::vector<std::string> unmatched;
  for (const auto& cat : extracted) {
    auto direct = pillar_map.find(cat);
    if (direct != pillar_map.end()) pillar_of[cat] = direct->second;
    else unmatched.push_back(cat);
  }
  if (!unmatched.empty()) {
    const auto ref_vecs = client.embed(std::string(kQueryInstruction), reference);
    const auto cat_vecs = client.embed(std::string(kQueryInstruction), unmatched);
    for (std::size_t i = 0; i < unmatched.size(); ++i) {
      double best = -2.0;
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < reference.size(); ++j) {
        const double sim = cosine_similarity(cat_vecs[i], ref_vecs[j]);
        if (sim > best) {
          best = sim;
          best_j = j;
        }
      }
      if (best < pillar_floor)
        throw UnmappablePillar(unmatched[i] + " (best score " + format_double(best) + ")");
      pillar_of[unmatched[i]] = pillar_map.at(reference[best_j]);
    }
  }

  // Per-company top ten category shares; the column set is their union.
  struct ShareEntry {
    std::string cat;
    double share;
  };
  std::map<std::string, std::vector<ShareEntry>> top_shares;
  std::set<std::string> share_columns;
  for (const auto& rec : records) {
    const auto& counts = cat_counts.at(rec.company_id);
    std::int64_t total = 0;
    for (const auto& [cat, count] : counts) total += count;
    std::vector<ShareEntry> shares;
    for (const auto& [cat, count] : counts)
      shares.push_back({cat, static_cast<double>(count) / static_cast<double>(total)});
    std::sort(shares.begin(), shares.end(), [](const ShareEntry& a, const ShareEntry& b) {
      if (a.share != b.share) return a.share > b.share;
      return a.cat < b.cat;
    });
    if (shares.size() > 10) shares.resize(10);
    for (const auto& entry : shares) share_columns.insert(entry.cat);
    top_shares[rec.company_id] = std::move(shares);
  }

  // Dummy levels, all kept.
  auto collect_levels = [&](auto getter) {
    std::set<std::string> levels;
    for (const auto& rec : records) levels.insert(getter(rec));
    return levels;
  };
  const auto sectors = collect_levels([](const CompanyRecord& r) { return r.sector; });
  const auto countries = collect_levels([](const CompanyRecord& r) { return r.country; });
  const auto regions = collect_levels([](const CompanyRecord& r) { return r.region; });
  const auto continents = collect_levels([](const CompanyRecord& r) { return r.continent; });

  FeatureMatrix m;
  auto add_column = [&](const std::string& name, ColumnKind kind) {
    m.columns.push_back(name);
    m.kinds.push_back(kind);
  };
  for (const auto& cat : share_columns) add_column("Category:" + cat, ColumnKind::category_share);
  add_column("Pillar:E", ColumnKind::pillar_share);
  add_column("Pillar:S", ColumnKind::pillar_share);
  add_column("Pillar:G", ColumnKind::pillar_share);
  add_column("Category Entropy", ColumnKind::entropy);
  add_column("Action Entropy", ColumnKind::entropy);
  add_column("Incorporation Year", ColumnKind::numeric_financial);
  add_column("Employees", ColumnKind::numeric_financial);
  add_column("Market Cap", ColumnKind::numeric_financial);
  add_column("EBITDA", ColumnKind::numeric_financial);
  add_column("Liabilities", ColumnKind::numeric_financial);
  for (const auto& v : sectors) add_column("SECTOR:" + v, ColumnKind::dummy);
  for (const auto& v : countries) add_column("COUNTRY:" + v, ColumnKind::dummy);
  for (const auto& v : regions) add_column("REGION:" + v, ColumnKind::dummy);
  for (const auto& v : continents) add_column("CONTINENT:" + v, ColumnKind::dummy);

  std::map<std::string, std::size_t> column_index;
  for (std::size_t c = 0; c < m.columns.size(); ++c) column_index[m.columns[c]] = c;

  m.values.assign(records.size() * m.columns.size(), 0.0);
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    m.row_ids.push_back(rec.company_id);

    for (const auto& entry : top_shares.at(rec.company_id))
      m.at(r, column_index.at("Category:" + entry.cat)) = entry.share;

    const auto& counts = cat_counts.at(rec.company_id);
    std::size_t e = 0, s = 0, g = 0;
    for (const auto& [cat, count] : counts) {
      switch (pillar_of.at(cat)) {
        case 'E': ++e; break;
        case 'S': ++s; break;
        case 'G': ++g; break;
      }
    }
    const double distinct = static_cast<double>(counts.size());
    m.at(r, column_index.at("Pillar:E")) = e / distinct;
    m.at(r, column_index.at("Pillar:S")) = s / distinct;
    m.at(r, column_index.at("Pillar:G")) = g / distinct;

    auto entropy_of = [](const std::map<std::string, std::int64_t>& byKey) {
      std::vector<std::int64_t> values;
      values.reserve(byKey.size());
      for (const auto& [key, count] : byKey) values.push_back(count);
      return shannon_entropy(values);
    };
    m.at(r, column_index.at("Category Entropy")) = entropy_of(counts);
    m.at(r, column_index.at("Action Entropy")) = entropy_of(action_counts.at(rec.company_id));

    auto require = [&](const auto& opt, const char* what) -> double {
      if (!opt) throw ConfigInvalid(std::string(what) + " missing for " + rec.company_id);
      return static_cast<double>(*opt);
    };
    m.at(r, column_index.at("Incorporation Year")) = require(rec.incorporation_year, "incorporation_year");
    m.at(r, column_index.at("Employees")) = require(rec.employees, "employees");
    m.at(r, column_index.at("Market Cap")) = require(rec.market_cap, "market_cap");
    m.at(r, column_index.at("EBITDA")) = require(rec.ebitda, "ebitda");
    m.at(r, column_index.at("Liabilities")) = require(rec.liabilities, "liabilities");

    m.at(r, column_index.at("SECTOR:" + rec.sector)) = 1.0;
    m.at(r, column_index.at("COUNTRY:" + rec.country)) = 1.0;
    m.at(r, column_index.at("REGION:" + rec.region)) = 1.0;
    m.at(r, column_index.at("CONTINENT:" + rec.continent)) = 1.0;
  }
  return m;
}

Standardization standardize(FeatureMatrix& m) {
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  Standardization st;
  st.mean.assign(cols, 0.0);
  st.scale.assign(cols, 1.0);
  if (rows == 0) return st;

  for (std::size_t c = 0; c < cols; ++c) {
    if (m.kinds[c] == ColumnKind::dummy) continue;
    double mean = 0.0;
    for (std::size_t r = 0; r < rows; ++r) mean += m.at(r, c);
    mean /= static_cast<double>(rows);
    double var = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = m.at(r, c) - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(rows));
    st.mean[c] = mean;
    st.scale[c] = sd > 0.0 ? sd : 1.0;
    for (std::size_t r = 0; r < rows; ++r)
      m.at(r, c) = (m.at(r, c) - mean) / st.scale[c];
  }
  return st;
}

// ---------------------------------------------------------------------------
// Elastic net

namespace {

double soft_threshold(double value, double threshold) {
  if (value > threshold) return value - threshold;
  if (value < -threshold) return value + threshold;
  return 0.0;
}

}  // namespace

double elastic_net_objective(const FeatureMatrix& x, std::span<const double> y,
                             const LinearModel& model) {
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  double sse = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double pred = model.intercept;
    for (std::size_t c = 0; c < cols; ++c) pred += x.at(r, c) * model.weights[c];
    const double res = y[r] - pred;
    sse += res * res;
  }
  double l1 = 0.0, l2 = 0.0;
  for (double w : model.weights) {
    l1 += std::abs(w);
    l2 += w * w;
  }
  return sse / (2.0 * static_cast<double>(rows)) +
         model.alpha * (model.l1_ratio * l1 + (1.0 - model.l1_ratio) / 2.0 * l2);
}

LinearModel fit_elastic_net_single(const FeatureMatrix& x, std::span<const double> y,
                                   double alpha, double l1_ratio, int max_sweeps,
                                   double tol, std::vector<double>* objective_per_sweep) {
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  if (rows == 0 || rows != y.size())
    throw ConfigInvalid("design matrix and target length disagree");

  LinearModel model;
  model.columns = x.columns;
  model.weights.assign(cols, 0.0);
  model.alpha = alpha;
  model.l1_ratio = l1_ratio;

  // Mean squared column norms, fixed across sweeps.
  std::vector<double> col_sq(cols, 0.0);
  for (std::size_t c = 0; c < cols; ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) acc += x.at(r, c) * x.at(r, c);
    col_sq[c] = acc / static_cast<double>(rows);
  }

  std::vector<double> residual(y.begin(), y.end());  // y - b0 - Xb, with b = 0, b0 = 0
  const double l1_penalty = alpha * l1_ratio;
  const double l2_penalty = alpha * (1.0 - l1_ratio);

  model.converged = false;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;

    // Unpenalized intercept first: optimal value is the residual mean.
    double mean_res = 0.0;
    for (double r : residual) mean_res += r;
    mean_res /= static_cast<double>(rows);
    if (mean_res != 0.0) {
      model.intercept += mean_res;
      for (double& r : residual) r -= mean_res;
      max_change = std::max(max_change, std::abs(mean_res));
    }

    for (std::size_t c = 0; c < cols; ++c) {
      if (col_sq[c] == 0.0) continue;  // constant-zero column stays at 0
      double rho = 0.0;
      for (std::size_t r = 0; r < rows; ++r) rho += x.at(r, c) * residual[r];
      rho = rho / static_cast<double>(rows) + col_sq[c] * model.weights[c];
      const double updated = soft_threshold(rho, l1_penalty) / (col_sq[c] + l2_penalty);
      const double change = updated - model.weights[c];
      if (change != 0.0) {
        for (std::size_t r = 0; r < rows; ++r) residual[r] -= x.at(r, c) * change;
        model.weights[c] = updated;
        max_change = std::max(max_change, std::abs(change));
      }
    }

    model.sweeps = sweep + 1;
    if (objective_per_sweep)
      objective_per_sweep->push_back(elastic_net_objective(x, y, model));
    if (max_change < tol) {
      model.converged = true;
      break;
    }
  }
  return model;
}

LinearModel fit_elastic_net(const FeatureMatrix& x, std::span<const double> y,
                            const ElasticNetGrid& grid, int folds, std::uint64_t seed) {
  if (grid.alphas.empty() || grid.l1_ratios.empty())
    throw EmptyGrid("alpha or l1_ratio list is empty");
  const std::size_t rows = x.rows();
  if (folds < 2) throw ConfigInvalid("need at least 2 folds");
  if (rows < static_cast<std::size_t>(folds))
    throw ConfigInvalid("fewer rows (" + std::to_string(rows) + ") than folds (" +
                        std::to_string(folds) + ")");

  // Seeded shuffle, then round-robin assignment.
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(seed);
  for (std::size_t i = rows - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<int> fold_of(rows);
  for (std::size_t pos = 0; pos < rows; ++pos)
    fold_of[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));

  auto subset = [&](int fold, bool train) {
    FeatureMatrix sub;
    sub.columns = x.columns;
    sub.kinds = x.kinds;
    std::vector<double> target;
    for (std::size_t r = 0; r < rows; ++r) {
      if ((fold_of[r] != fold) != train) continue;
      sub.row_ids.push_back(x.row_ids[r]);
      for (std::size_t c = 0; c < x.cols(); ++c) sub.values.push_back(x.at(r, c));
      target.push_back(y[r]);
    }
    return std::make_pair(std::move(sub), std::move(target));
  };

  double best_error = std::numeric_limits<double>::infinity();
  double best_alpha = grid.alphas.front();
  double best_l1 = grid.l1_ratios.front();
  for (double alpha : grid.alphas) {
    for (double l1 : grid.l1_ratios) {
      double total_mse = 0.0;
      for (int fold = 0; fold < folds; ++fold) {
        auto [train_x, train_y] = subset(fold, true);
        auto [valid_x, valid_y] = subset(fold, false);
        const LinearModel model = fit_elastic_net_single(train_x, train_y, alpha, l1);
        double sse = 0.0;
        for (std::size_t r = 0; r < valid_x.rows(); ++r) {
          double pred = model.intercept;
          for (std::size_t c = 0; c < valid_x.cols(); ++c)
            pred += valid_x.at(r, c) * model.weights[c];
          const double res = valid_y[r] - pred;
          sse += res * res;
        }
        total_mse += sse / static_cast<double>(valid_x.rows());
      }
      const double mean_mse = total_mse / folds;
      if (mean_mse < best_error) {
        best_error = mean_mse;
        best_alpha = alpha;
        best_l1 = l1;
      }
    }
  }

  LinearModel model = fit_elastic_net_single(x, y, best_alpha, best_l1);
  model.cv_error = best_error;
  return model;
}

// ---------------------------------------------------------------------------
// SHAP

ShapExplanation shap_linear(const LinearModel& model, const FeatureMatrix& x_train,
                            std::size_t row) {
  if (x_train.columns != model.columns)
    throw ColumnMismatch("features do not match the fitted model");
  const std::size_t rows = x_train.rows();
  const std::size_t cols = x_train.cols();

  ShapExplanation out;
  out.phi.assign(cols, 0.0);
  double base = model.intercept;
  for (std::size_t c = 0; c < cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < rows; ++r) mean += x_train.at(r, c);
    mean /= static_cast<double>(rows);
    base += model.weights[c] * mean;
    out.phi[c] = model.weights[c] * (x_train.at(row, c) - mean);
  }
  out.base_value = base;
  return out;
}

std::vector<ShapSummaryRow> shap_summary(const std::vector<ShapExplanation>& explanations,
                                         const std::vector<std::string>& columns,
                                         const std::vector<bool>* cohort) {
  std::vector<std::size_t> selected;
  for (std::size_t i = 0; i < explanations.size(); ++i) {
    if (!cohort || (i < cohort->size() && (*cohort)[i])) selected.push_back(i);
  }
  if (selected.empty()) throw EmptyCohort("no explanations selected");

  std::vector<ShapSummaryRow> out;
  out.reserve(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    ShapSummaryRow row;
    row.feature = columns[c];
    std::vector<double> phis;
    phis.reserve(selected.size());
    for (std::size_t i : selected) {
      const double phi = explanations[i].phi[c];
      row.mean_phi += phi;
      row.mean_abs_phi += std::abs(phi);
      phis.push_back(phi);
    }
    row.mean_phi /= static_cast<double>(selected.size());
    row.mean_abs_phi /= static_cast<double>(selected.size());
    std::sort(phis.begin(), phis.end());
    const std::size_t n = phis.size();
    row.median_phi = n % 2 ? phis[n / 2] : (phis[n / 2 - 1] + phis[n / 2]) / 2.0;
    out.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics and residual diagnostics

RegressionMetrics regression_metrics(std::span<const double> y,
                                     std::span<const double> y_hat) {
  if (y.size() != y_hat.size() || y.empty())
    throw ConfigInvalid("metric inputs must be equal-length and non-empty");
  const std::size_t n = y.size();
  double mean_y = 0.0;
  for (double v : y) mean_y += v;
  mean_y /= static_cast<double>(n);

  double ss_res = 0.0, ss_tot = 0.0, abs_res = 0.0, abs_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double res = y[i] - y_hat[i];
    ss_res += res * res;
    ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
    abs_res += std::abs(res);
    abs_y += std::abs(y[i]);
  }
  if (ss_tot == 0.0) throw ZeroVariance("target has no variance, r2 undefined");
  if (abs_y == 0.0) throw ZeroVariance("target has zero magnitude, wmape undefined");

  RegressionMetrics metrics;
  metrics.r2 = 1.0 - ss_res / ss_tot;
  metrics.rmse = std::sqrt(ss_res / static_cast<double>(n));
  metrics.wmape = abs_res / abs_y;
  return metrics;
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// log Phi(z), switching to the asymptotic tail expansion where the direct
// value underflows.
double log_normal_cdf(double z) {
  if (z > -37.0) return std::log(normal_cdf(z));
  const double z2 = z * z;
  return -z2 / 2.0 - std::log(-z) - 0.5 * std::log(2.0 * 3.14159265358979323846);
}

}  // namespace

NormalityTest residual_normality(std::span<const double> residuals) {
  const std::size_t n = residuals.size();
  if (n < 8) throw TooFewSamples("need at least 8 residuals, have " + std::to_string(n));

  double mean = 0.0;
  for (double r : residuals) mean += r;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double r : residuals) var += (r - mean) * (r - mean);
  var /= static_cast<double>(n - 1);  // parameters are estimated from the sample
  if (var == 0.0) throw ZeroVariance("residuals are constant");
  const double sd = std::sqrt(var);

  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = (residuals[i] - mean) / sd;
  std::sort(z.begin(), z.end());

  double a2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double weight = 2.0 * static_cast<double>(i) + 1.0;
    // 1 - Phi(z) = Phi(-z), keeping the upper-tail log finite.
    a2 += weight * (log_normal_cdf(z[i]) + log_normal_cdf(-z[n - 1 - i]));
  }
  a2 = -static_cast<double>(n) - a2 / static_cast<double>(n);

  // Small-sample correction and p-value approximation for the case where
  // both parameters are estimated.
  const double corrected =
      a2 * (1.0 + 0.75 / static_cast<double>(n) + 2.25 / static_cast<double>(n * n));
  double p = 0.0;
  if (corrected >= 0.6) {
    p = std::exp(1.2937 - 5.709 * corrected + 0.0186 * corrected * corrected);
  } else if (corrected > 0.34) {
    p = std::exp(0.9177 - 4.279 * corrected - 1.38 * corrected * corrected);
  } else if (corrected > 0.2) {
    p = 1.0 - std::exp(-8.318 + 42.796 * corrected - 59.938 * corrected * corrected);
  } else {
    p = 1.0 - std::exp(-13.436 + 101.14 * corrected - 223.73 * corrected * corrected);
  }
  p = std::clamp(p, 0.0, 1.0);

  return NormalityTest{corrected, p};
}

}  // namespace esgkg
