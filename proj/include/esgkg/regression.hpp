#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esgkg/clients.hpp"
#include "esgkg/extraction.hpp"

namespace esgkg {

struct CompanyRecord {
  std::string company_id;
  double esg_combined = 0.0;  // 0..100, the regression target
  double env_score = 0.0;
  double social_score = 0.0;
  double gov_score = 0.0;
  std::string sector;
  std::string industry;
  std::string country;
  std::string region;
  std::string subregion;
  std::string continent;
  std::optional<int> incorporation_year;
  std::optional<double> employees;
  std::optional<double> market_cap;
  std::optional<double> ebitda;
  std::optional<double> liabilities;
};

// CSV with header company_id,esg_combined,env_score,social_score,gov_score,
// sector,industry,country,region,subregion,continent,incorporation_year,
// employees,market_cap,ebitda,liabilities. Empty numeric cells are missing.
std::vector<CompanyRecord> load_company_records(const std::filesystem::path& path);

// {"<reference category>": "E" | "S" | "G"}
std::map<std::string, char> load_pillar_map(const std::filesystem::path& path);

enum class ColumnKind { category_share, pillar_share, entropy, numeric_financial, dummy };

struct FeatureMatrix {
  std::vector<std::string> row_ids;   // company ids
  std::vector<std::string> columns;
  std::vector<ColumnKind> kinds;      // aligned with columns
  std::vector<double> values;         // row-major

  double at(std::size_t r, std::size_t c) const { return values[r * columns.size() + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * columns.size() + c]; }
  std::size_t rows() const { return row_ids.size(); }
  std::size_t cols() const { return columns.size(); }
};

// Assembles the raw (unstandardized) design matrix:
//  - Category:<name> columns carry each company's disclosure share for its
//    ten most disclosed categories, zero elsewhere
//  - Pillar:E/S/G shares over the company's distinct disclosed categories,
//    each mapped to its nearest reference category by embedding similarity
//    (UnmappablePillar below `pillar_floor`)
//  - Category Entropy and Action Entropy of the company's triples
//  - incorporation year and the four financials, passed through raw here
//    and standardized later
//  - one dummy column per observed sector, country, region and continent
//    level, all levels kept
// Throws MissingRecord when a record has no triples, ConfigInvalid when a
// numeric field is missing (filter records first).
FeatureMatrix build_features(const std::vector<EsgTriple>& triples,
                             const std::vector<CompanyRecord>& records,
                             const std::map<std::string, char>& pillar_map,
                             EmbeddingClient& client, double pillar_floor = 0.5);

struct Standardization {
  std::vector<double> mean;   // per column; dummies keep 0
  std::vector<double> scale;  // per column; dummies and constants keep 1
};

// Centers and scales every non-dummy column to mean 0, population sd 1.
// Constant columns become all zeros. Applied in place.
Standardization standardize(FeatureMatrix& m);

struct LinearModel {
  double intercept = 0.0;
  std::vector<std::string> columns;
  std::vector<double> weights;
  double alpha = 0.0;
  double l1_ratio = 0.0;
  bool converged = true;
  int sweeps = 0;
  double cv_error = 0.0;  // mean held-out MSE of the winning grid cell
};

// Penalized least squares:
//   (1/2N) |y - X b - b0|^2 + alpha (l1 |b|_1 + (1 - l1)/2 |b|_2^2)
// minimized by cyclic coordinate descent with an unpenalized intercept.
// Convergence: max coefficient change below tol, else NonConvergence is
// reported through converged=false after max_sweeps.
LinearModel fit_elastic_net_single(const FeatureMatrix& x, std::span<const double> y,
                                   double alpha, double l1_ratio,
                                   int max_sweeps = 10000, double tol = 1e-7,
                                   std::vector<double>* objective_per_sweep = nullptr);

double elastic_net_objective(const FeatureMatrix& x, std::span<const double> y,
                             const LinearModel& model);

struct ElasticNetGrid {
  std::vector<double> alphas = {0.001, 0.01, 0.1, 1.0, 10.0};
  std::vector<double> l1_ratios = {0.1, 0.5, 0.9};
};

// Grid search by k-fold cross-validation: rows are shuffled with the seed,
// dealt round-robin into folds, and the (alpha, l1_ratio) cell with the
// lowest mean held-out MSE is refit on all rows. Throws EmptyGrid on an
// empty grid and ConfigInvalid when rows < folds.
LinearModel fit_elastic_net(const FeatureMatrix& x, std::span<const double> y,
                            const ElasticNetGrid& grid = {}, int folds = 8,
                            std::uint64_t seed = 0);

struct ShapExplanation {
  double base_value = 0.0;
  std::vector<double> phi;  // one per column
};

// Exact SHAP values for a linear model: phi_j = w_j (x_j - mean X_j) with
// the base value the mean training prediction, so base + sum(phi) equals
// the prediction identically. Throws ColumnMismatch when the matrix does
// not match the model's columns.
ShapExplanation shap_linear(const LinearModel& model, const FeatureMatrix& x_train,
                            std::size_t row);

struct ShapSummaryRow {
  std::string feature;
  double mean_phi = 0.0;
  double mean_abs_phi = 0.0;
  double median_phi = 0.0;
};

// Aggregates explanations per feature, optionally over a cohort mask.
// Throws EmptyCohort when the mask selects nothing.
std::vector<ShapSummaryRow> shap_summary(const std::vector<ShapExplanation>& explanations,
                                         const std::vector<std::string>& columns,
                                         const std::vector<bool>* cohort = nullptr);

struct RegressionMetrics {
  double r2 = 0.0;
  double rmse = 0.0;
  double wmape = 0.0;  // sum |residual| / sum |y|
};

RegressionMetrics regression_metrics(std::span<const double> y,
                                     std::span<const double> y_hat);

struct NormalityTest {
  double ad_statistic = 0.0;  // small-sample corrected A^2
  double p_value = 0.0;
};

// Anderson-Darling test of the residuals against a normal with estimated
// mean and sd, with the usual small-sample correction and the piecewise
// exponential p-value approximation for that case. Needs at least 8
// residuals (TooFewSamples) with spread (ZeroVariance).
NormalityTest residual_normality(std::span<const double> residuals);

}  // namespace esgkg
