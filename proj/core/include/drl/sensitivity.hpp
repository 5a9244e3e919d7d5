#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drl/corpus.hpp"
#include "drl/lda.hpp"

namespace drl {

enum class PerturbationKind { kRepetition, kReplacement, kDeletion };

PerturbationKind parse_perturbation_kind(std::string_view name);
std::string_view to_string(PerturbationKind kind);

// A single edit of the query token list. The edited span is located either
// by `position` (span length = max(1, terms.size()), checked against `terms`
// when given) or by the first contiguous occurrence of `terms`.
struct Perturbation {
  std::string label;
  PerturbationKind kind = PerturbationKind::kRepetition;
  std::optional<std::size_t> position;
  std::vector<std::string> terms;
  // New tokens for kReplacement; may be shorter than the span it replaces.
  std::vector<std::string> replacement;
};

// Repetition duplicates the span in place, deletion removes it, replacement
// substitutes it. Throws kInvalidArgument for a span that cannot be located
// or an edit that leaves the query empty.
std::vector<std::string> perturb_query(std::span<const std::string> tokens,
                                       const Perturbation& perturbation);

// A parsed row of a perturbation spec file. Rows that fail to parse keep
// their label and an error instead of a perturbation.
struct PerturbationEntry {
  std::string label;
  std::optional<Perturbation> perturbation;
  std::string error;
};

// Spec file format: JSON array of {label, kind, position_or_term} where
// position_or_term is an integer position, a string of whitespace-separated
// terms, a replacement string "old terms -> new terms", or an object with
// any of {position, terms, from, to}.
std::vector<PerturbationEntry> parse_perturbation_spec(std::string_view json);
std::vector<PerturbationEntry> load_perturbation_spec(const std::filesystem::path& path);

double l2_norm(const BowDocument& doc);
double l2_distance(const BowDocument& a, const BowDocument& b);
double l2_distance(const SemanticVector& a, const SemanticVector& b);

// Relative change in the semantic projection over relative change in the
// query, Euclidean in both spaces:
//   |g(q) - g(qp)| |q| / (|q - qp| |g(q)|)
// Throws kInvalidArgument when q and qp coincide in word space.
double s1_from_projections(const SemanticVector& theta_q, const SemanticVector& theta_qp,
                           const BowDocument& q, const BowDocument& qp);

// Projects q and qp with the same seed, then applies s1_from_projections.
double s1_quotient(const TopicModel& model, const BowDocument& q, const BowDocument& qp,
                   std::uint64_t seed);

// Relative change in relevance over relative change in the query:
//   |sim - sim_p| |q| / (|q - qp| |sim|)
double s2_quotient(double sim, double sim_p, const BowDocument& q, const BowDocument& qp);

struct SensitivityResult {
  std::string label;
  PerturbationKind kind = PerturbationKind::kRepetition;
  std::vector<std::string> perturbed_tokens;
  std::vector<std::string> oov_terms;
  double word_space_distance = 0.0;

  // Means over runs.
  double semantic_distance = 0.0;
  double s1 = 0.0;
  std::map<std::string, double> s2_per_set;

  // Per-run values the means are computed from.
  std::vector<double> semantic_distance_runs;
  std::vector<double> s1_runs;
  std::map<std::string, std::vector<double>> s2_runs;

  std::optional<std::string> error;

  bool ok() const noexcept { return !error.has_value(); }
  void recompute_means();
};

// Per-run seed under a master seed.
std::uint64_t run_seed(std::uint64_t master_seed, std::uint64_t run);

// Projection seed for a document within a run. Depends only on the document
// id, so a document's projection does not depend on its position in a set.
// Queries and their perturbations share the id "query" and hence the seed.
std::uint64_t projection_seed(std::uint64_t run_seed, std::string_view doc_id);

// One result per perturbation, in input order. For each run the set
// documents are projected once and the query and every perturbed query are
// projected with matched seeds. Failures of a single perturbation are
// recorded in its result and do not stop the report.
std::vector<SensitivityResult> sensitivity_report(const TopicModel& model,
                                                  std::span<const std::string> query_tokens,
                                                  std::span<const Perturbation> perturbations,
                                                  std::span<const DocumentSet> sets, int runs,
                                                  std::uint64_t master_seed);

// Concatenates per-run values of reports over the same perturbation list
// (e.g. one report per retrained model) and recomputes the means.
std::vector<SensitivityResult> combine_reports(
    std::span<const std::vector<SensitivityResult>> reports);

}  // namespace drl
