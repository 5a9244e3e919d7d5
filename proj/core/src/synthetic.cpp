#include "drl/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include <json.hpp>

#include "drl/error.hpp"

namespace drl::synthetic {

PlantedTopics make_planted_topics(const PlantedTopicsSpec& spec) {
  if (spec.num_topics < 1 || spec.exclusive_per_topic < 1) {
    throw Error(ErrorKind::kInvalidArgument, "planted topics need >= 1 topic and word");
  }
  if (spec.generic_mass < 0.0 || spec.generic_mass >= 1.0 ||
      (spec.generic_mass > 0.0 && spec.generic_words.empty())) {
    throw Error(ErrorKind::kInvalidArgument, "generic_mass must be in [0, 1) with generic words");
  }
  PlantedTopics out;
  out.num_topics = spec.num_topics;
  out.exclusive.resize(spec.num_topics);
  for (int k = 0; k < spec.num_topics; ++k) {
    for (int r = 0; r < spec.exclusive_per_topic; ++r) {
      std::string name;
      if (k < static_cast<int>(spec.named_words.size()) &&
          r < static_cast<int>(spec.named_words[k].size())) {
        name = spec.named_words[k][r];
      } else {
        char buf[32];
        std::snprintf(buf, sizeof buf, "t%dw%02d", k, r);
        name = buf;
      }
      out.exclusive[k].push_back(static_cast<std::uint32_t>(out.words.size()));
      out.words.push_back(std::move(name));
    }
  }
  for (const auto& g : spec.generic_words) {
    out.generic.push_back(static_cast<std::uint32_t>(out.words.size()));
    out.words.push_back(g);
  }

  const std::size_t V = out.words.size();
  std::vector<double> zipf(spec.exclusive_per_topic);
  double zipf_total = 0.0;
  for (int r = 0; r < spec.exclusive_per_topic; ++r) {
    zipf[r] = 1.0 / std::pow(r + 1.0, spec.zipf_exponent);
    zipf_total += zipf[r];
  }
  const double generic_each =
      out.generic.empty() ? 0.0 : spec.generic_mass / static_cast<double>(out.generic.size());
  const double exclusive_mass = out.generic.empty() ? 1.0 : 1.0 - spec.generic_mass;
  out.phi.assign(spec.num_topics * V, 0.0);
  for (int k = 0; k < spec.num_topics; ++k) {
    double* row = &out.phi[k * V];
    for (int r = 0; r < spec.exclusive_per_topic; ++r) {
      row[out.exclusive[k][r]] = exclusive_mass * zipf[r] / zipf_total;
    }
    for (auto g : out.generic) row[g] = generic_each;
  }
  return out;
}

double sample_normal(Rng& rng) {
  // Box-Muller; 1 - u keeps the logarithm finite.
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double sample_gamma(double shape, Rng& rng) {
  if (!(shape > 0.0)) throw Error(ErrorKind::kInvalidArgument, "gamma shape must be > 0");
  if (shape < 1.0) {
    const double u = 1.0 - rng.uniform();
    return sample_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia and Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = sample_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = 1.0 - rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng) {
  std::vector<double> out(alpha.size());
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    out[i] = sample_gamma(alpha[i], rng);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

std::uint32_t sample_categorical(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double target = rng.uniform() * total;
  for (std::uint32_t i = 0; i < weights.size(); ++i) {
    if (target < weights[i]) return i;
    target -= weights[i];
  }
  // Rounding can leave a sliver past the last bucket; return the last
  // positive-weight outcome.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return static_cast<std::uint32_t>(i);
  }
  return 0;
}

std::vector<std::string> sample_document(const PlantedTopics& topics, std::span<const double> theta,
                                         std::size_t length, Rng& rng) {
  std::vector<std::string> tokens;
  tokens.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    const auto k = static_cast<int>(sample_categorical(theta, rng));
    tokens.push_back(topics.words[sample_categorical(topics.topic(k), rng)]);
  }
  return tokens;
}

namespace {

std::string decorate(std::vector<std::string> tokens, Rng& rng) {
  // Capitalize one word, add punctuation and a link; none of it may survive
  // preprocessing.
  std::string& first = tokens.front();
  if (!first.empty() && first[0] >= 'a' && first[0] <= 'z') first[0] = static_cast<char>(first[0] - 'a' + 'A');
  std::string text;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) text += (rng.uniform() < 0.2) ? ", " : " ";
    text += tokens[i];
  }
  char link[48];
  std::snprintf(link, sizeof link, " http://t.co/x%04llu!",
                static_cast<unsigned long long>(rng.uniform_int(10000)));
  return text + link;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string text;
  for (const auto& t : tokens) text += (text.empty() ? "" : " ") + t;
  return text;
}

}  // namespace

DrlFixture make_drl_fixture(const DrlFixtureSpec& spec) {
  if (spec.min_length < 2 || spec.max_length < spec.min_length) {
    throw Error(ErrorKind::kInvalidArgument, "fixture document lengths must satisfy 2 <= min <= max");
  }
  PlantedTopicsSpec topic_spec;
  topic_spec.num_topics = 5;
  topic_spec.exclusive_per_topic = 18;
  topic_spec.generic_words = {"usa", "team", "win", "world", "cup",
                              "spain", "game", "fans", "today", "live"};
  topic_spec.generic_mass = 0.3;
  topic_spec.named_words = {{"basketball", "fiba", "hoops", "dunk", "rebound"}};

  DrlFixture fixture;
  fixture.topics = make_planted_topics(topic_spec);
  fixture.keyword = "basketball";
  fixture.query_text = "Will the USA Basketball team win the world cup in Spain?";
  fixture.query_topic = 0;
  fixture.mixed_topic = 1;
  fixture.disjoint_topics = {2, 3, 4};

  Rng rng(spec.seed);
  const int K = fixture.topics.num_topics;
  auto one_hot = [K](int k) {
    std::vector<double> theta(K, 0.0);
    theta[k] = 1.0;
    return theta;
  };

  auto emit = [&](const std::string& key, std::size_t i, int topic) {
    const std::size_t length =
        spec.min_length + rng.uniform_int(spec.max_length - spec.min_length + 1);
    auto tokens = sample_document(fixture.topics, one_hot(topic), length, rng);
    RawDocument doc;
    char id[32];
    std::snprintf(id, sizeof id, "%s-%03zu", key.c_str(), i);
    doc.id = id;
    doc.text = rng.uniform() < spec.noisy_fraction ? decorate(std::move(tokens), rng) : join(tokens);
    doc.set_key = key;
    fixture.docs.push_back(std::move(doc));
  };

  for (std::size_t i = 0; i < spec.docs_per_set; ++i) emit("A", i, fixture.query_topic);
  for (std::size_t i = 0; i < spec.docs_per_set; ++i) {
    emit("B", i, i % 2 == 0 ? fixture.query_topic : fixture.mixed_topic);
  }
  for (std::size_t i = 0; i < spec.docs_per_set; ++i) {
    emit("C", i, fixture.disjoint_topics[rng.uniform_int(fixture.disjoint_topics.size())]);
  }
  return fixture;
}

std::string to_jsonl(std::span<const RawDocument> docs) {
  std::string out;
  for (const auto& doc : docs) {
    nlohmann::json record = {{"id", doc.id}, {"text", doc.text}};
    if (doc.set_key) record["set_key"] = *doc.set_key;
    out += record.dump();
    out.push_back('\n');
  }
  return out;
}

std::string fixture_config_json(const DrlFixture& fixture, const std::string& corpus_file) {
  nlohmann::ordered_json config = {
      {"input", {{"paths", {corpus_file}}, {"format", "jsonl"}}},
      {"preprocess", {{"min_doc_freq", 5}, {"min_doc_tokens", 2}}},
      {"lda",
       {{"num_topics", fixture.topics.num_topics},
        {"alpha", 0.3},
        {"beta", 0.01},
        {"train_iterations", 500},
        {"infer_iterations", 200},
        {"thinning", 10}}},
      {"jr", {{"renyi_order", 0.5}}},
      {"query", fixture.query_text},
      {"n_runs", 20},
      {"delta", 0.0},
      {"master_seed", 0},
      {"output_dir", "out"},
  };
  return config.dump(2) + "\n";
}

std::string fixture_perturbations_json() {
  using row = nlohmann::ordered_json;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  const char* tokens[] = {"usa", "basketball", "team", "win", "world", "cup", "spain"};
  int i = 1;
  for (const char* t : tokens) {
    rows.push_back(row{{"label", "q_a" + std::to_string(i++)}, {"kind", "repetition"}, {"position_or_term", t}});
  }
  rows.push_back(row{{"label", "q_b1"}, {"kind", "replacement"}, {"position_or_term", "world cup -> fiba"}});
  rows.push_back(row{{"label", "q_b2"}, {"kind", "replacement"}, {"position_or_term", "spain -> fiba"}});
  rows.push_back(row{{"label", "q_b3"}, {"kind", "replacement"}, {"position_or_term", "spain -> spain2014"}});
  rows.push_back(row{{"label", "q_c1"}, {"kind", "deletion"}, {"position_or_term", "basketball"}});
  rows.push_back(row{{"label", "q_c2"}, {"kind", "deletion"}, {"position_or_term", "team"}});
  rows.push_back(row{{"label", "q_c3"}, {"kind", "deletion"}, {"position_or_term", "spain"}});
  rows.push_back(row{{"label", "q_c4"}, {"kind", "deletion"}, {"position_or_term", "world cup"}});
  return rows.dump(2) + "\n";
}

}  // namespace drl::synthetic
