#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "esgkg/graph.hpp"
#include "esgkg/regression.hpp"

// Slow reference implementations kept deliberately separate from the library
// algorithms. Each recomputes its quantity from first principles (distance
// matrices, pair enumeration, exhaustive subsets, proximal gradient) so that
// agreement with the fast path is meaningful evidence, not a tautology.
namespace testoracle {

struct CentralityTriplet {
  std::vector<double> degree;       // left nodes first, then right
  std::vector<double> closeness;
  std::vector<double> betweenness;
};

// Degree, closeness and betweenness recomputed via a Floyd-Warshall distance
// matrix and the sigma(s,v) * sigma(v,t) / sigma(s,t) pair-counting identity.
// The betweenness normalizer is not taken from a formula: the extremal
// two-mode hub graph is built explicitly and its hub score measured.
CentralityTriplet centrality_oracle(const esgkg::BipartiteGraph& g);

// Mean Jaccard similarity over every pair of subsets (size_a, size_b) drawn
// from a pool of pool_size items, by full enumeration of both subsets.
double exhaustive_null_jaccard(int pool_size, int size_a, int size_b);

struct KendallCounts {
  long long concordant = 0;
  long long discordant = 0;
  double tau = 0.0;
};

// O(n^2) pair scan. Pairs tied in either coordinate count as neither.
KendallCounts kendall_oracle(std::span<const double> x, std::span<const double> y);

// Elastic net objective evaluated from its definition, with no calls into
// the library:  (1/2N)|y - X b - b0|^2 + alpha (l1 |b|_1 + (1-l1)/2 |b|_2^2).
double penalized_objective(const esgkg::FeatureMatrix& x, std::span<const double> y,
                           double intercept, std::span<const double> beta,
                           double alpha, double l1_ratio);

struct IstaFit {
  double intercept = 0.0;
  std::vector<double> beta;
  double objective = 0.0;
};

// Proximal gradient (ISTA) minimizer of the same objective: columns and the
// target are centered, the step follows the largest eigenvalue of X'X / N
// found by power iteration, and iterations run to a far tighter tolerance
// than the coordinate descent under test.
IstaFit ista_oracle(const esgkg::FeatureMatrix& x, std::span<const double> y,
                    double alpha, double l1_ratio);

}  // namespace testoracle
