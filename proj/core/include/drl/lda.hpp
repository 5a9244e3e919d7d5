#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "drl/corpus.hpp"
#include "drl/rng.hpp"

namespace drl {

struct LdaConfig {
  int num_topics = 50;
  // Symmetric document-topic prior; 50 / num_topics when unset.
  std::optional<double> alpha;
  double beta = 0.01;
  int train_iterations = 1000;
  int infer_iterations = 100;
  // Sweeps discarded before averaging; half the iterations when unset.
  std::optional<int> burn_in;
  std::optional<int> infer_burn_in;
  // Training keeps every thinning-th post-burn-in sample.
  int thinning = 10;
  std::uint64_t seed = 0;

  double effective_alpha() const { return alpha.value_or(50.0 / num_topics); }
  int effective_burn_in() const { return burn_in.value_or(train_iterations / 2); }
  int effective_infer_burn_in() const { return infer_burn_in.value_or(infer_iterations / 2); }

  // Throws Error(kConfig) on any invalid field.
  void validate() const;
};

// A document's distribution over topics: a point on the K-simplex.
struct SemanticVector {
  std::vector<double> theta;

  std::size_t size() const noexcept { return theta.size(); }
  double operator[](std::size_t k) const { return theta[k]; }
};

// Trained topic-word distributions. Immutable once built; safe to share
// across threads for concurrent projection.
class TopicModel {
 public:
  // `phi` is row-major num_topics x vocab.size(); rows must sum to 1.
  TopicModel(LdaConfig config, Vocabulary vocab, std::vector<double> phi);

  int num_topics() const noexcept { return config_.num_topics; }
  std::size_t vocab_size() const noexcept { return vocab_.size(); }
  const LdaConfig& config() const noexcept { return config_; }
  const Vocabulary& vocab() const noexcept { return vocab_; }

  double phi(int topic, std::uint32_t word) const { return phi_[topic * vocab_size() + word]; }
  std::span<const double> topic(int k) const {
    return std::span<const double>(phi_).subspan(static_cast<std::size_t>(k) * vocab_size(),
                                                 vocab_size());
  }
  const std::vector<double>& phi_matrix() const noexcept { return phi_; }

 private:
  LdaConfig config_;
  Vocabulary vocab_;
  std::vector<double> phi_;
};

// Collapsed Gibbs sampler state over a training corpus: one topic assignment
// per token plus the document-topic, topic-word and topic-total count tables.
class GibbsSampler {
 public:
  GibbsSampler(std::span<const BowDocument> docs, std::size_t vocab_size, const LdaConfig& config);

  // One full pass resampling every token's topic.
  void sweep();

  // Adds the current smoothed topic-word estimate to the running average.
  void accumulate_phi();

  // Averaged estimate; falls back to the current state when nothing has been
  // accumulated yet.
  std::vector<double> averaged_phi() const;

  // Recounts the tables from the assignments and compares: document-topic
  // rows sum to document lengths, topic-word columns sum to topic totals, and
  // every table entry matches z.
  bool counts_consistent() const;

  int completed_sweeps() const noexcept { return sweeps_; }
  std::size_t num_tokens() const noexcept { return words_.size(); }

 private:
  void smoothed_phi(std::vector<double>& out) const;

  int num_topics_;
  std::size_t vocab_size_;
  double alpha_;
  double beta_;
  Rng rng_;

  // Token arrays, flattened across documents.
  std::vector<std::uint32_t> words_;
  std::vector<std::uint32_t> doc_of_;
  std::vector<std::uint32_t> z_;
  std::vector<std::uint32_t> doc_lengths_;

  std::vector<std::uint32_t> doc_topic_;   // D x K
  std::vector<std::uint32_t> topic_word_;  // K x V
  std::vector<std::uint32_t> topic_total_; // K

  std::vector<double> phi_sum_;
  int phi_samples_ = 0;
  int sweeps_ = 0;
  std::vector<double> scratch_;
};

// Called after each sweep with the 1-based sweep number.
using TrainObserver = std::function<void(const GibbsSampler&, int sweep)>;

// Collapsed Gibbs training. After burn-in, phi is estimated as
// (n_kw + beta) / (n_k + V beta) averaged over every thinning-th sample.
// Deterministic for a fixed config.seed.
TopicModel train(std::span<const BowDocument> corpus, const Vocabulary& vocab,
                 const LdaConfig& config, const TrainObserver& observer = {});

// Fold-in inference of a document's topic distribution with phi held fixed:
// theta_k = (n_dk + alpha) / (N_d + K alpha) averaged over post-burn-in
// sweeps. Throws kUnprojectable for documents with no in-vocabulary tokens.
SemanticVector project(const TopicModel& model, const BowDocument& doc, std::uint64_t seed);

// The n heaviest words of topic k, weight-descending with ties broken by
// vocabulary index. n is clamped to the vocabulary size.
std::vector<std::pair<std::string, double>> top_words(const TopicModel& model, int topic,
                                                      std::size_t n);

// Versioned JSON model file: config, vocabulary hash and phi.
std::string model_to_json(const TopicModel& model);
// Refuses a model whose stored vocabulary hash differs from `vocab`.
TopicModel model_from_json(std::string_view json, const Vocabulary& vocab);

void save_model(const std::filesystem::path& path, const TopicModel& model);
TopicModel load_model(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace drl
