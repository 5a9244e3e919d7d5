#include "drl/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "drl/error.hpp"

namespace drl {

void JrParams::validate(std::size_t n) const {
  if (!(renyi_order > 0.0 && renyi_order < 1.0)) {
    throw Error(ErrorKind::kConfig, "renyi_order must lie in (0, 1)");
  }
  if (weights.empty()) return;
  if (weights.size() != n) {
    throw Error(ErrorKind::kInvalidArgument,
                "JR weights have " + std::to_string(weights.size()) + " entries for " +
                    std::to_string(n) + " distributions");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw Error(ErrorKind::kInvalidArgument, "JR weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorKind::kInvalidArgument, "JR weights must sum to 1");
  }
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::kInvalidArgument, "cosine: dimension mismatch");
  double dot = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw Error(ErrorKind::kMetric, "cosine of a zero-norm vector");
  return dot / (std::sqrt(aa) * std::sqrt(bb));
}

double cosine(const SemanticVector& a, const SemanticVector& b) { return cosine(a.theta, b.theta); }

double relevance(std::span<const SemanticVector> set, const SemanticVector& query) {
  if (set.empty()) throw Error(ErrorKind::kMetric, "relevance of an empty document set");
  double sum = 0.0;
  for (const auto& doc : set) sum += cosine(doc, query);
  return sum / static_cast<double>(set.size());
}

double renyi_entropy(std::span<const double> p, double order) {
  if (!(order > 0.0) || order == 1.0) {
    throw Error(ErrorKind::kInvalidArgument, "Renyi order must be > 0 and != 1");
  }
  double sum = 0.0;
  for (double x : p) {
    if (x > 0.0) sum += std::pow(x, order);
  }
  return std::log(sum) / (1.0 - order);
}

double jr_divergence(std::span<const std::vector<double>> dists, const JrParams& params) {
  if (dists.size() < 2) {
    throw Error(ErrorKind::kMetric, "JR divergence needs at least two distributions");
  }
  params.validate(dists.size());
  const std::size_t dim = dists.front().size();
  for (const auto& p : dists) {
    if (p.size() != dim) throw Error(ErrorKind::kInvalidArgument, "JR divergence: dimension mismatch");
  }
  const double uniform = 1.0 / static_cast<double>(dists.size());
  auto weight = [&](std::size_t i) { return params.weights.empty() ? uniform : params.weights[i]; };

  std::vector<double> mixture(dim, 0.0);
  double mean_entropy = 0.0;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    const double w = weight(i);
    for (std::size_t j = 0; j < dim; ++j) mixture[j] += w * dists[i][j];
    mean_entropy += w * renyi_entropy(dists[i], params.renyi_order);
  }
  return renyi_entropy(mixture, params.renyi_order) - mean_entropy;
}

double disparity(std::span<const SemanticVector> set, const JrParams& params) {
  if (set.size() < 2) {
    throw Error(ErrorKind::kMetric, "document disparity needs at least two projectable documents");
  }
  std::vector<std::vector<double>> dists;
  dists.reserve(set.size());
  for (const auto& v : set) dists.push_back(v.theta);
  return jr_divergence(dists, params);
}

Coherence coherence_from_disparity(double dd) {
  if (dd <= kZeroDisparity) return {0.0, true};
  return {1.0 / dd, false};
}

Coherence coherence(std::span<const SemanticVector> set, const JrParams& params) {
  return coherence_from_disparity(disparity(set, params));
}

bool informationally_equivalent(double s1, double s2, double delta) {
  return std::abs(s1 - s2) <= delta;
}

std::vector<SetScore> rank_sets(std::span<const SetScore> scores) {
  auto tie_break = [](const SetScore& a, const SetScore& b) {
    if (a.disparity != b.disparity) return a.disparity < b.disparity;
    return a.set_key < b.set_key;
  };
  std::vector<SetScore> ranked(scores.begin(), scores.end());
  std::stable_sort(ranked.begin(), ranked.end(), [&](const SetScore& a, const SetScore& b) {
    if (a.relevance != b.relevance) return a.relevance > b.relevance;
    return tie_break(a, b);
  });
  // A tolerance comparison is not a strict weak order, so ties are resolved
  // afterwards: each run of neighbours within kRelevanceTie is re-sorted by
  // the tie-break keys alone.
  std::size_t start = 0;
  while (start < ranked.size()) {
    std::size_t end = start + 1;
    while (end < ranked.size() &&
           ranked[end - 1].relevance - ranked[end].relevance <= kRelevanceTie) {
      ++end;
    }
    std::stable_sort(ranked.begin() + static_cast<std::ptrdiff_t>(start),
                     ranked.begin() + static_cast<std::ptrdiff_t>(end), tie_break);
    start = end;
  }
  return ranked;
}

std::vector<std::vector<std::size_t>> equivalence_classes(std::span<const SetScore> ranked,
                                                          double delta) {
  if (delta < 0.0) throw Error(ErrorKind::kInvalidArgument, "delta must be nonnegative");
  std::vector<std::vector<std::size_t>> classes;
  std::size_t i = 0;
  while (i < ranked.size()) {
    std::vector<std::size_t> group{i};
    std::size_t j = i + 1;
    while (j < ranked.size() &&
           informationally_equivalent(ranked[i].relevance, ranked[j].relevance, delta)) {
      group.push_back(j++);
    }
    classes.push_back(std::move(group));
    i = j;
  }
  return classes;
}

}  // namespace drl
