#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "drl/corpus.hpp"
#include "drl/rng.hpp"

namespace drl::synthetic {

// Known topic-word distributions for generating corpora with a planted
// answer. Each topic owns a block of exclusive words with Zipf-shaped
// weights; an optional pool of generic words is shared uniformly by all
// topics.
struct PlantedTopics {
  int num_topics = 0;
  std::vector<std::string> words;
  std::vector<double> phi;  // num_topics x words.size(), row-major
  std::vector<std::vector<std::uint32_t>> exclusive;  // word indices owned by each topic
  std::vector<std::uint32_t> generic;

  std::size_t vocab_size() const noexcept { return words.size(); }
  std::span<const double> topic(int k) const {
    return std::span<const double>(phi).subspan(static_cast<std::size_t>(k) * words.size(),
                                                words.size());
  }
};

struct PlantedTopicsSpec {
  int num_topics = 5;
  int exclusive_per_topic = 18;
  std::vector<std::string> generic_words;
  double generic_mass = 0.3;
  double zipf_exponent = 1.0;
  // Optional leading names per topic; remaining words are named "t<k>w<r>".
  std::vector<std::vector<std::string>> named_words;
};

PlantedTopics make_planted_topics(const PlantedTopicsSpec& spec);

double sample_normal(Rng& rng);
double sample_gamma(double shape, Rng& rng);
std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng);
std::uint32_t sample_categorical(std::span<const double> weights, Rng& rng);

// Draws `length` tokens: a topic from theta, then a word from that topic.
std::vector<std::string> sample_document(const PlantedTopics& topics, std::span<const double> theta,
                                         std::size_t length, Rng& rng);

// Planted analog of the daily-sets experiment. Set "A" is drawn from the
// query's topic, "B" alternates documents between the query's topic and a
// second topic, and "C" draws each document from one of the remaining
// topics, none of which the query touches. The query is a single topic-0
// keyword ("basketball") surrounded by generic words every topic shares.
struct DrlFixture {
  PlantedTopics topics;
  std::vector<RawDocument> docs;
  std::string query_text;
  std::string keyword;
  int query_topic = 0;
  int mixed_topic = 1;
  std::vector<int> disjoint_topics;
};

struct DrlFixtureSpec {
  std::size_t docs_per_set = 200;
  std::size_t min_length = 8;
  std::size_t max_length = 16;
  // Fraction of documents given decorations the preprocessor must remove
  // (capitalization, URLs, punctuation).
  double noisy_fraction = 0.1;
  std::uint64_t seed = 2014;
};

DrlFixture make_drl_fixture(const DrlFixtureSpec& spec = {});

// Serializes documents as JSONL records {id, text, set_key}.
std::string to_jsonl(std::span<const RawDocument> docs);

// Run config for scoring the fixture corpus stored at `corpus_file`
// (relative paths resolve against the config's directory).
std::string fixture_config_json(const DrlFixture& fixture, const std::string& corpus_file);

// Perturbation spec for the fixture query: a repetition of every query
// token, three replacements and four deletions.
std::string fixture_perturbations_json();

}  // namespace drl::synthetic
