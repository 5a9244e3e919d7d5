#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drl/lda.hpp"

namespace drl {

// Disparity at or below this value yields an infinite coherence.
inline constexpr double kZeroDisparity = 1e-12;

// Relevance values closer than this are ranking ties.
inline constexpr double kRelevanceTie = 1e-12;

struct JrParams {
  // Renyi order; must lie in (0, 1) where the divergence is convex.
  double renyi_order = 0.5;
  // Mixture weights; uniform when empty.
  std::vector<double> weights;

  void validate(std::size_t n) const;
};

struct Coherence {
  double value = 0.0;  // meaningful only when !infinite
  bool infinite = false;
};

struct SetScore {
  std::string set_key;
  double relevance = 0.0;
  double disparity = 0.0;
  Coherence coherence;
  std::size_t n_docs_scored = 0;
  std::size_t n_docs_skipped = 0;
};

// dot(a, b) / (|a| |b|). Throws kMetric on a zero-norm input.
double cosine(std::span<const double> a, std::span<const double> b);
double cosine(const SemanticVector& a, const SemanticVector& b);

// Mean cosine between each document's topic vector and the query's.
double relevance(std::span<const SemanticVector> set, const SemanticVector& query);

// (1 / (1 - order)) ln sum_j p_j^order; zero-probability outcomes contribute
// nothing.
double renyi_entropy(std::span<const double> p, double order);

// Jensen-Renyi divergence: entropy of the weighted mixture minus the weighted
// mean of the entropies.
double jr_divergence(std::span<const std::vector<double>> dists, const JrParams& params);

// Document disparity of a set: the JR divergence of its topic vectors.
double disparity(std::span<const SemanticVector> set, const JrParams& params);

// Reciprocal disparity, flagged infinite when disparity <= kZeroDisparity.
Coherence coherence_from_disparity(double disparity);
Coherence coherence(std::span<const SemanticVector> set, const JrParams& params);

// |s1 - s2| <= delta; delta = 0 is strict equivalence.
bool informationally_equivalent(double s1, double s2, double delta);

// Descending relevance; ties within kRelevanceTie go to the lower disparity,
// then to the lexicographically smaller key.
std::vector<SetScore> rank_sets(std::span<const SetScore> scores);

// Groups an already-ranked list into delta-equivalence classes. The relation
// is not transitive, so classes are built greedily in rank order: each class
// starts at the first unassigned set and takes every following set whose
// relevance is within delta of that leader. Returns indices into `ranked`.
std::vector<std::vector<std::size_t>> equivalence_classes(std::span<const SetScore> ranked,
                                                          double delta);

}  // namespace drl
