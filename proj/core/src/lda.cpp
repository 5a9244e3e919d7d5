#include "drl/lda.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "drl/error.hpp"
#include "drl/log.hpp"

namespace drl {
namespace {

using json = nlohmann::json;

constexpr std::uint64_t kTrainStream = 0x747261696eULL;  // "train"
constexpr int kModelFormatVersion = 1;

// Inverse-CDF draw from unnormalized weights held as a running prefix sum.
std::uint32_t sample_prefix(std::span<const double> cumulative, double u) {
  const double target = u * cumulative.back();
  for (std::uint32_t k = 0; k + 1 < cumulative.size(); ++k) {
    if (target < cumulative[k]) return k;
  }
  return static_cast<std::uint32_t>(cumulative.size() - 1);
}

void normalize_rows(std::vector<double>& m, std::size_t cols) {
  for (std::size_t start = 0; start < m.size(); start += cols) {
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) sum += m[start + j];
    for (std::size_t j = 0; j < cols; ++j) m[start + j] /= sum;
  }
}

}  // namespace

void LdaConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::kConfig, "lda: " + what); };
  if (num_topics < 2) fail("num_topics must be >= 2");
  if (alpha && !(*alpha > 0.0)) fail("alpha must be > 0");
  if (!(beta > 0.0)) fail("beta must be > 0");
  if (train_iterations < 1) fail("train_iterations must be >= 1");
  if (infer_iterations < 1) fail("infer_iterations must be >= 1");
  if (effective_burn_in() < 0 || effective_burn_in() >= train_iterations) {
    fail("burn_in must be in [0, train_iterations)");
  }
  if (effective_infer_burn_in() < 0 || effective_infer_burn_in() >= infer_iterations) {
    fail("infer_burn_in must be in [0, infer_iterations)");
  }
  if (thinning < 1) fail("thinning must be >= 1");
}

TopicModel::TopicModel(LdaConfig config, Vocabulary vocab, std::vector<double> phi)
    : config_(std::move(config)), vocab_(std::move(vocab)), phi_(std::move(phi)) {
  if (phi_.size() != static_cast<std::size_t>(config_.num_topics) * vocab_.size()) {
    throw Error(ErrorKind::kInvalidArgument, "phi matrix size does not match K x V");
  }
}

// GibbsSampler ---------------------------------------------------------------

GibbsSampler::GibbsSampler(std::span<const BowDocument> docs, std::size_t vocab_size,
                           const LdaConfig& config)
    : num_topics_(config.num_topics),
      vocab_size_(vocab_size),
      alpha_(config.effective_alpha()),
      beta_(config.beta),
      rng_(derive_seed(config.seed, kTrainStream)) {
  config.validate();
  if (docs.empty()) throw Error(ErrorKind::kEmptyCorpus, "lda: training corpus is empty");
  if (vocab_size == 0) throw Error(ErrorKind::kEmptyCorpus, "lda: vocabulary is empty");

  const auto K = static_cast<std::size_t>(num_topics_);
  doc_lengths_.reserve(docs.size());
  for (std::uint32_t d = 0; d < docs.size(); ++d) {
    for (const auto& [word, count] : docs[d].counts) {
      if (word >= vocab_size) {
        throw Error(ErrorKind::kInvalidArgument,
                    "lda: document '" + docs[d].id + "' has term index " + std::to_string(word) +
                        " >= vocabulary size " + std::to_string(vocab_size));
      }
      for (std::uint32_t c = 0; c < count; ++c) {
        words_.push_back(word);
        doc_of_.push_back(d);
      }
    }
    doc_lengths_.push_back(docs[d].total_tokens);
  }
  if (words_.empty()) throw Error(ErrorKind::kEmptyCorpus, "lda: training corpus has no tokens");

  doc_topic_.assign(docs.size() * K, 0);
  topic_word_.assign(K * vocab_size_, 0);
  topic_total_.assign(K, 0);
  z_.resize(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    const auto k = static_cast<std::uint32_t>(rng_.uniform_int(K));
    z_[i] = k;
    ++doc_topic_[doc_of_[i] * K + k];
    ++topic_word_[k * vocab_size_ + words_[i]];
    ++topic_total_[k];
  }
  scratch_.resize(K);
}

void GibbsSampler::sweep() {
  const auto K = static_cast<std::size_t>(num_topics_);
  const double v_beta = static_cast<double>(vocab_size_) * beta_;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    const std::uint32_t w = words_[i];
    std::uint32_t* dt = &doc_topic_[doc_of_[i] * K];
    std::uint32_t k = z_[i];
    --dt[k];
    --topic_word_[k * vocab_size_ + w];
    --topic_total_[k];

    double acc = 0.0;
    for (std::size_t t = 0; t < K; ++t) {
      acc += (dt[t] + alpha_) * (topic_word_[t * vocab_size_ + w] + beta_) /
             (topic_total_[t] + v_beta);
      scratch_[t] = acc;
    }
    k = sample_prefix(scratch_, rng_.uniform());

    z_[i] = k;
    ++dt[k];
    ++topic_word_[k * vocab_size_ + w];
    ++topic_total_[k];
  }
  ++sweeps_;
}

void GibbsSampler::smoothed_phi(std::vector<double>& out) const {
  const auto K = static_cast<std::size_t>(num_topics_);
  const double v_beta = static_cast<double>(vocab_size_) * beta_;
  out.resize(K * vocab_size_);
  for (std::size_t k = 0; k < K; ++k) {
    const double denom = topic_total_[k] + v_beta;
    for (std::size_t w = 0; w < vocab_size_; ++w) {
      out[k * vocab_size_ + w] = (topic_word_[k * vocab_size_ + w] + beta_) / denom;
    }
  }
}

void GibbsSampler::accumulate_phi() {
  std::vector<double> current;
  smoothed_phi(current);
  if (phi_sum_.empty()) phi_sum_.assign(current.size(), 0.0);
  for (std::size_t i = 0; i < current.size(); ++i) phi_sum_[i] += current[i];
  ++phi_samples_;
}

std::vector<double> GibbsSampler::averaged_phi() const {
  std::vector<double> phi;
  if (phi_samples_ == 0) {
    smoothed_phi(phi);
  } else {
    phi = phi_sum_;
    for (double& x : phi) x /= phi_samples_;
  }
  normalize_rows(phi, vocab_size_);
  return phi;
}

bool GibbsSampler::counts_consistent() const {
  const auto K = static_cast<std::size_t>(num_topics_);
  std::vector<std::uint32_t> dt(doc_topic_.size(), 0);
  std::vector<std::uint32_t> tw(topic_word_.size(), 0);
  std::vector<std::uint32_t> tt(K, 0);
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (z_[i] >= K) return false;
    ++dt[doc_of_[i] * K + z_[i]];
    ++tw[z_[i] * vocab_size_ + words_[i]];
    ++tt[z_[i]];
  }
  if (dt != doc_topic_ || tw != topic_word_ || tt != topic_total_) return false;

  for (std::size_t d = 0; d < doc_lengths_.size(); ++d) {
    std::uint64_t row = 0;
    for (std::size_t k = 0; k < K; ++k) row += doc_topic_[d * K + k];
    if (row != doc_lengths_[d]) return false;
  }
  for (std::size_t k = 0; k < K; ++k) {
    std::uint64_t column = 0;
    for (std::size_t w = 0; w < vocab_size_; ++w) column += topic_word_[k * vocab_size_ + w];
    if (column != topic_total_[k]) return false;
  }
  return true;
}

// Training and inference -----------------------------------------------------

TopicModel train(std::span<const BowDocument> corpus, const Vocabulary& vocab,
                 const LdaConfig& config, const TrainObserver& observer) {
  config.validate();
  if (vocab.size() < static_cast<std::size_t>(config.num_topics)) {
    log_warning("lda: vocabulary size " + std::to_string(vocab.size()) +
                " is smaller than the number of topics " + std::to_string(config.num_topics));
  }
  GibbsSampler sampler(corpus, vocab.size(), config);
  const int burn_in = config.effective_burn_in();
  for (int it = 1; it <= config.train_iterations; ++it) {
    sampler.sweep();
    if (it > burn_in && (it - burn_in) % config.thinning == 0) sampler.accumulate_phi();
    if (observer) observer(sampler, it);
  }
  LdaConfig stored = config;
  stored.alpha = config.effective_alpha();
  stored.burn_in = burn_in;
  stored.infer_burn_in = config.effective_infer_burn_in();
  return TopicModel(std::move(stored), vocab, sampler.averaged_phi());
}

SemanticVector project(const TopicModel& model, const BowDocument& doc, std::uint64_t seed) {
  const LdaConfig& config = model.config();
  const auto K = static_cast<std::size_t>(model.num_topics());
  const double alpha = config.effective_alpha();

  std::vector<std::uint32_t> words;
  for (const auto& [word, count] : doc.counts) {
    if (word >= model.vocab_size()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "project: term index " + std::to_string(word) + " out of vocabulary range");
    }
    words.insert(words.end(), count, word);
  }
  if (words.empty()) {
    throw Error(ErrorKind::kUnprojectable,
                "document '" + doc.id + "' has no in-vocabulary tokens and cannot be projected");
  }

  Rng rng(seed);
  std::vector<std::uint32_t> z(words.size());
  std::vector<std::uint32_t> n_topic(K, 0);
  for (std::size_t i = 0; i < words.size(); ++i) {
    z[i] = static_cast<std::uint32_t>(rng.uniform_int(K));
    ++n_topic[z[i]];
  }

  std::vector<double> cumulative(K);
  std::vector<double> theta_sum(K, 0.0);
  const double denom = static_cast<double>(words.size()) + static_cast<double>(K) * alpha;
  const int burn_in = config.effective_infer_burn_in();
  int samples = 0;
  for (int it = 1; it <= config.infer_iterations; ++it) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      --n_topic[z[i]];
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        acc += (n_topic[k] + alpha) * model.phi(static_cast<int>(k), words[i]);
        cumulative[k] = acc;
      }
      z[i] = sample_prefix(cumulative, rng.uniform());
      ++n_topic[z[i]];
    }
    if (it > burn_in) {
      for (std::size_t k = 0; k < K; ++k) theta_sum[k] += (n_topic[k] + alpha) / denom;
      ++samples;
    }
  }

  SemanticVector out;
  out.theta.resize(K);
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    out.theta[k] = theta_sum[k] / samples;
    total += out.theta[k];
  }
  for (double& t : out.theta) t /= total;
  return out;
}

std::vector<std::pair<std::string, double>> top_words(const TopicModel& model, int topic,
                                                      std::size_t n) {
  if (topic < 0 || topic >= model.num_topics()) {
    throw Error(ErrorKind::kInvalidArgument, "topic index " + std::to_string(topic) +
                                                 " out of range [0, " +
                                                 std::to_string(model.num_topics()) + ")");
  }
  if (n == 0) throw Error(ErrorKind::kInvalidArgument, "top_words: n must be >= 1");
  const auto row = model.topic(topic);
  std::vector<std::uint32_t> order(row.size());
  std::iota(order.begin(), order.end(), 0u);
  n = std::min(n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      if (row[a] != row[b]) return row[a] > row[b];
                      return a < b;
                    });
  std::vector<std::pair<std::string, double>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(model.vocab().term(order[i]), row[order[i]]);
  return out;
}

// Persistence ----------------------------------------------------------------

std::string model_to_json(const TopicModel& model) {
  const LdaConfig& c = model.config();
  json out;
  out["format"] = "drl-topic-model";
  out["version"] = kModelFormatVersion;
  out["config"] = {
      {"num_topics", c.num_topics},
      {"alpha", c.effective_alpha()},
      {"beta", c.beta},
      {"train_iterations", c.train_iterations},
      {"infer_iterations", c.infer_iterations},
      {"burn_in", c.effective_burn_in()},
      {"infer_burn_in", c.effective_infer_burn_in()},
      {"thinning", c.thinning},
      {"seed", c.seed},
  };
  out["vocab_size"] = model.vocab_size();
  out["vocab_hash"] = model.vocab().hash_hex();
  json phi = json::array();
  for (int k = 0; k < model.num_topics(); ++k) {
    const auto row = model.topic(k);
    phi.push_back(std::vector<double>(row.begin(), row.end()));
  }
  out["phi"] = std::move(phi);
  return out.dump();
}

TopicModel model_from_json(std::string_view text, const Vocabulary& vocab) {
  json in = json::parse(text, nullptr, false);
  if (in.is_discarded() || !in.is_object() || in.value("format", "") != "drl-topic-model") {
    throw Error(ErrorKind::kParse, "not a drl topic model file");
  }
  if (in.value("version", 0) != kModelFormatVersion) {
    throw Error(ErrorKind::kParse, "unsupported model format version " +
                                       std::to_string(in.value("version", 0)));
  }
  if (in.value("vocab_hash", "") != vocab.hash_hex()) {
    throw Error(ErrorKind::kConfig, "model vocabulary hash " + in.value("vocab_hash", "") +
                                        " does not match the supplied vocabulary " +
                                        vocab.hash_hex());
  }
  try {
    const json& c = in.at("config");
    LdaConfig config;
    config.num_topics = c.at("num_topics").get<int>();
    config.alpha = c.at("alpha").get<double>();
    config.beta = c.at("beta").get<double>();
    config.train_iterations = c.at("train_iterations").get<int>();
    config.infer_iterations = c.at("infer_iterations").get<int>();
    config.burn_in = c.at("burn_in").get<int>();
    config.infer_burn_in = c.at("infer_burn_in").get<int>();
    config.thinning = c.at("thinning").get<int>();
    config.seed = c.at("seed").get<std::uint64_t>();
    config.validate();

    std::vector<double> phi;
    const json& rows = in.at("phi");
    if (!rows.is_array() || rows.size() != static_cast<std::size_t>(config.num_topics)) {
      throw Error(ErrorKind::kParse, "phi must have num_topics rows");
    }
    phi.reserve(config.num_topics * vocab.size());
    for (const auto& row : rows) {
      if (!row.is_array() || row.size() != vocab.size()) {
        throw Error(ErrorKind::kParse, "phi row length does not match vocabulary size");
      }
      for (const auto& x : row) phi.push_back(x.get<double>());
    }
    return TopicModel(std::move(config), vocab, std::move(phi));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const TopicModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write model file '" + path.string() + "'");
  out << model_to_json(model) << '\n';
  if (!out) throw Error(ErrorKind::kIo, "failed writing model file '" + path.string() + "'");
}

TopicModel load_model(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read model file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str(), vocab);
}

}  // namespace drl
