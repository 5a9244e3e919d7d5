#include "drl/sensitivity.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "drl/error.hpp"
#include "drl/log.hpp"
#include "drl/metrics.hpp"
#include "drl/rng.hpp"
#include "drl/stats.hpp"

namespace drl {
namespace {

using json = nlohmann::json;

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) out.push_back(word);
  return out;
}

std::vector<std::string> terms_from_json(const json& value) {
  if (value.is_string()) return split_words(value.get<std::string>());
  if (value.is_array()) {
    std::vector<std::string> out;
    for (const auto& item : value) {
      if (!item.is_string()) throw Error(ErrorKind::kParse, "term lists must contain strings");
      out.push_back(item.get<std::string>());
    }
    return out;
  }
  throw Error(ErrorKind::kParse, "expected a string or an array of strings");
}

std::size_t position_from_json(const json& value) {
  if (!value.is_number_integer() || value.get<long long>() < 0) {
    throw Error(ErrorKind::kParse, "position must be a nonnegative integer");
  }
  return value.get<std::size_t>();
}

Perturbation parse_row(const json& row, std::size_t index) {
  if (!row.is_object()) throw Error(ErrorKind::kParse, "entry is not an object");
  Perturbation p;
  p.label = row.contains("label") && row["label"].is_string() ? row["label"].get<std::string>()
                                                              : "p" + std::to_string(index + 1);
  if (!row.contains("kind") || !row["kind"].is_string()) {
    throw Error(ErrorKind::kParse, "missing string field 'kind'");
  }
  p.kind = parse_perturbation_kind(row["kind"].get<std::string>());
  if (!row.contains("position_or_term")) {
    throw Error(ErrorKind::kParse, "missing field 'position_or_term'");
  }
  const json& target = row["position_or_term"];
  if (target.is_number()) {
    p.position = position_from_json(target);
  } else if (target.is_string()) {
    const std::string text = target.get<std::string>();
    const auto arrow = text.find("->");
    if (arrow != std::string::npos) {
      p.terms = split_words(text.substr(0, arrow));
      p.replacement = split_words(text.substr(arrow + 2));
    } else {
      p.terms = split_words(text);
    }
  } else if (target.is_object()) {
    if (target.contains("position")) p.position = position_from_json(target["position"]);
    if (target.contains("terms")) p.terms = terms_from_json(target["terms"]);
    if (target.contains("from")) p.terms = terms_from_json(target["from"]);
    if (target.contains("to")) p.replacement = terms_from_json(target["to"]);
  } else {
    throw Error(ErrorKind::kParse, "position_or_term must be an integer, string or object");
  }
  if (!p.position && p.terms.empty()) {
    throw Error(ErrorKind::kParse, "perturbation needs a position or at least one term");
  }
  if (p.kind == PerturbationKind::kReplacement && p.replacement.empty()) {
    throw Error(ErrorKind::kParse, "replacement needs at least one new term");
  }
  if (p.kind != PerturbationKind::kReplacement && !p.replacement.empty()) {
    throw Error(ErrorKind::kParse, "only replacement perturbations take new terms");
  }
  return p;
}

// [start, start + length) of the span a perturbation edits.
std::pair<std::size_t, std::size_t> locate(std::span<const std::string> tokens,
                                           const Perturbation& p) {
  const std::size_t length = std::max<std::size_t>(1, p.terms.size());
  auto matches_at = [&](std::size_t start) {
    for (std::size_t i = 0; i < p.terms.size(); ++i) {
      if (tokens[start + i] != p.terms[i]) return false;
    }
    return true;
  };
  if (p.position) {
    if (*p.position + length > tokens.size()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "position " + std::to_string(*p.position) + " is out of range for a " +
                      std::to_string(tokens.size()) + "-token query");
    }
    if (!matches_at(*p.position)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "terms do not match the query at position " + std::to_string(*p.position));
    }
    return {*p.position, length};
  }
  for (std::size_t start = 0; start + length <= tokens.size(); ++start) {
    if (matches_at(start)) return {start, length};
  }
  std::string joined;
  for (const auto& t : p.terms) joined += (joined.empty() ? "" : " ") + t;
  throw Error(ErrorKind::kInvalidArgument, "'" + joined + "' does not occur in the query");
}

double sum_sq_diff(const BowDocument& a, const BowDocument& b) {
  double ss = 0.0;
  auto ia = a.counts.begin();
  auto ib = b.counts.begin();
  while (ia != a.counts.end() || ib != b.counts.end()) {
    double diff;
    if (ib == b.counts.end() || (ia != a.counts.end() && ia->first < ib->first)) {
      diff = ia->second;
      ++ia;
    } else if (ia == a.counts.end() || ib->first < ia->first) {
      diff = ib->second;
      ++ib;
    } else {
      diff = static_cast<double>(ia->second) - static_cast<double>(ib->second);
      ++ia;
      ++ib;
    }
    ss += diff * diff;
  }
  return ss;
}

double nonzero_word_distance(const BowDocument& q, const BowDocument& qp) {
  const double d = l2_distance(q, qp);
  if (d == 0.0) {
    throw Error(ErrorKind::kInvalidArgument,
                "zero perturbation: the perturbed query equals the query in word space");
  }
  return d;
}

struct PreparedPerturbation {
  BowDocument bow;
  bool valid = false;
};

}  // namespace

PerturbationKind parse_perturbation_kind(std::string_view name) {
  if (name == "repetition") return PerturbationKind::kRepetition;
  if (name == "replacement") return PerturbationKind::kReplacement;
  if (name == "deletion") return PerturbationKind::kDeletion;
  throw Error(ErrorKind::kParse, "unknown perturbation kind '" + std::string(name) + "'");
}

std::string_view to_string(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::kRepetition: return "repetition";
    case PerturbationKind::kReplacement: return "replacement";
    case PerturbationKind::kDeletion: return "deletion";
  }
  return "repetition";
}

std::vector<std::string> perturb_query(std::span<const std::string> tokens,
                                       const Perturbation& p) {
  const auto [start, length] = locate(tokens, p);
  std::vector<std::string> out(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(start));
  const auto span_begin = tokens.begin() + static_cast<std::ptrdiff_t>(start);
  const auto span_end = span_begin + static_cast<std::ptrdiff_t>(length);
  switch (p.kind) {
    case PerturbationKind::kRepetition:
      out.insert(out.end(), span_begin, span_end);
      out.insert(out.end(), span_begin, span_end);
      break;
    case PerturbationKind::kDeletion:
      break;
    case PerturbationKind::kReplacement:
      if (p.replacement.empty()) {
        throw Error(ErrorKind::kInvalidArgument, "replacement needs at least one new term");
      }
      out.insert(out.end(), p.replacement.begin(), p.replacement.end());
      break;
  }
  out.insert(out.end(), span_end, tokens.end());
  if (out.empty()) throw Error(ErrorKind::kInvalidArgument, "perturbation leaves an empty query");
  return out;
}

std::vector<PerturbationEntry> parse_perturbation_spec(std::string_view text) {
  json in = json::parse(text, nullptr, false);
  if (in.is_discarded() || !in.is_array()) {
    throw Error(ErrorKind::kParse, "perturbation spec must be a JSON array");
  }
  std::vector<PerturbationEntry> entries;
  for (std::size_t i = 0; i < in.size(); ++i) {
    PerturbationEntry entry;
    const json& row = in[i];
    entry.label = row.is_object() && row.contains("label") && row["label"].is_string()
                      ? row["label"].get<std::string>()
                      : "p" + std::to_string(i + 1);
    try {
      entry.perturbation = parse_row(row, i);
    } catch (const Error& e) {
      entry.error = "row " + std::to_string(i + 1) + ": " + e.what();
    } catch (const json::exception& e) {
      entry.error = "row " + std::to_string(i + 1) + ": " + e.what();
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::vector<PerturbationEntry> load_perturbation_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read perturbation spec '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_perturbation_spec(buffer.str());
}

double l2_norm(const BowDocument& doc) {
  double ss = 0.0;
  for (const auto& [index, count] : doc.counts) ss += static_cast<double>(count) * count;
  return std::sqrt(ss);
}

double l2_distance(const BowDocument& a, const BowDocument& b) {
  return std::sqrt(sum_sq_diff(a, b));
}

double l2_distance(const SemanticVector& a, const SemanticVector& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::kInvalidArgument, "dimension mismatch");
  double ss = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) ss += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(ss);
}

double s1_from_projections(const SemanticVector& theta_q, const SemanticVector& theta_qp,
                           const BowDocument& q, const BowDocument& qp) {
  const double word_distance = nonzero_word_distance(q, qp);
  double theta_norm = 0.0;
  for (double t : theta_q.theta) theta_norm += t * t;
  theta_norm = std::sqrt(theta_norm);
  if (theta_norm == 0.0) throw Error(ErrorKind::kMetric, "query projection has zero norm");
  return l2_distance(theta_q, theta_qp) * l2_norm(q) / (word_distance * theta_norm);
}

double s1_quotient(const TopicModel& model, const BowDocument& q, const BowDocument& qp,
                   std::uint64_t seed) {
  nonzero_word_distance(q, qp);
  return s1_from_projections(project(model, q, seed), project(model, qp, seed), q, qp);
}

double s2_quotient(double sim, double sim_p, const BowDocument& q, const BowDocument& qp) {
  const double word_distance = nonzero_word_distance(q, qp);
  if (sim == 0.0) throw Error(ErrorKind::kMetric, "zero base relevance");
  return std::abs(sim - sim_p) * l2_norm(q) / (word_distance * std::abs(sim));
}

void SensitivityResult::recompute_means() {
  semantic_distance = semantic_distance_runs.empty() ? 0.0 : mean(semantic_distance_runs);
  s1 = s1_runs.empty() ? 0.0 : mean(s1_runs);
  s2_per_set.clear();
  for (const auto& [key, values] : s2_runs) {
    if (!values.empty()) s2_per_set[key] = mean(values);
  }
}

std::uint64_t run_seed(std::uint64_t master_seed, std::uint64_t run) {
  return derive_seed(master_seed, run);
}

std::uint64_t projection_seed(std::uint64_t seed, std::string_view doc_id) {
  return derive_seed(seed, fnv1a64(doc_id));
}

std::vector<SensitivityResult> sensitivity_report(const TopicModel& model,
                                                  std::span<const std::string> query_tokens,
                                                  std::span<const Perturbation> perturbations,
                                                  std::span<const DocumentSet> sets, int runs,
                                                  std::uint64_t master_seed) {
  if (runs < 1) throw Error(ErrorKind::kInvalidArgument, "runs must be >= 1");
  const Vocabulary& vocab = model.vocab();
  const BowDocument q = bow_from_tokens("query", query_tokens, vocab);
  if (q.empty()) {
    throw Error(ErrorKind::kUnprojectable, "query has no in-vocabulary tokens");
  }

  std::vector<SensitivityResult> results(perturbations.size());
  std::vector<PreparedPerturbation> prepared(perturbations.size());
  for (std::size_t i = 0; i < perturbations.size(); ++i) {
    const Perturbation& p = perturbations[i];
    SensitivityResult& r = results[i];
    r.label = p.label;
    r.kind = p.kind;
    try {
      r.perturbed_tokens = perturb_query(query_tokens, p);
      for (const auto& term : p.replacement) {
        if (!vocab.index_of(term)) {
          log_warning(p.label + ": replacement term '" + term + "' is out of vocabulary");
        }
      }
      BowDocument qp = bow_from_tokens("query", r.perturbed_tokens, vocab, &r.oov_terms);
      if (qp.empty()) {
        throw Error(ErrorKind::kUnprojectable, "perturbed query has no in-vocabulary tokens");
      }
      r.word_space_distance = nonzero_word_distance(q, qp);
      prepared[i] = {std::move(qp), true};
    } catch (const Error& e) {
      r.error = e.what();
    }
  }

  for (int run = 0; run < runs; ++run) {
    const std::uint64_t seed = run_seed(master_seed, static_cast<std::uint64_t>(run));

    std::vector<std::vector<SemanticVector>> set_thetas(sets.size());
    for (std::size_t s = 0; s < sets.size(); ++s) {
      for (const auto& doc : sets[s].docs) {
        if (doc.empty()) continue;
        set_thetas[s].push_back(project(model, doc, projection_seed(seed, doc.id)));
      }
    }

    const std::uint64_t query_seed = projection_seed(seed, q.id);
    const SemanticVector theta_q = project(model, q, query_seed);
    std::vector<double> base_sim(sets.size(), 0.0);
    for (std::size_t s = 0; s < sets.size(); ++s) {
      if (!set_thetas[s].empty()) base_sim[s] = relevance(set_thetas[s], theta_q);
    }

    for (std::size_t i = 0; i < perturbations.size(); ++i) {
      if (!prepared[i].valid) continue;
      SensitivityResult& r = results[i];
      const BowDocument& qp = prepared[i].bow;
      const SemanticVector theta_qp = project(model, qp, query_seed);
      r.semantic_distance_runs.push_back(l2_distance(theta_q, theta_qp));
      r.s1_runs.push_back(s1_from_projections(theta_q, theta_qp, q, qp));
      for (std::size_t s = 0; s < sets.size(); ++s) {
        if (set_thetas[s].empty()) continue;
        const double sim_p = relevance(set_thetas[s], theta_qp);
        r.s2_runs[sets[s].key].push_back(s2_quotient(base_sim[s], sim_p, q, qp));
      }
    }
  }

  for (auto& r : results) r.recompute_means();
  return results;
}

std::vector<SensitivityResult> combine_reports(
    std::span<const std::vector<SensitivityResult>> reports) {
  if (reports.empty()) return {};
  std::vector<SensitivityResult> combined = reports.front();
  for (std::size_t r = 1; r < reports.size(); ++r) {
    if (reports[r].size() != combined.size()) {
      throw Error(ErrorKind::kInvalidArgument, "reports cover different perturbation lists");
    }
    for (std::size_t i = 0; i < combined.size(); ++i) {
      SensitivityResult& into = combined[i];
      const SensitivityResult& from = reports[r][i];
      if (into.label != from.label) {
        throw Error(ErrorKind::kInvalidArgument, "reports cover different perturbation lists");
      }
      if (!into.error && from.error) into.error = from.error;
      into.semantic_distance_runs.insert(into.semantic_distance_runs.end(),
                                         from.semantic_distance_runs.begin(),
                                         from.semantic_distance_runs.end());
      into.s1_runs.insert(into.s1_runs.end(), from.s1_runs.begin(), from.s1_runs.end());
      for (const auto& [key, values] : from.s2_runs) {
        auto& dest = into.s2_runs[key];
        dest.insert(dest.end(), values.begin(), values.end());
      }
    }
  }
  for (auto& r : combined) r.recompute_means();
  return combined;
}

}  // namespace drl
