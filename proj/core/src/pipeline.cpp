#include "drl/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "drl/error.hpp"
#include "drl/log.hpp"
#include "drl/rng.hpp"
#include "drl/stats.hpp"

namespace drl {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr int kReportFormatVersion = 1;
constexpr std::size_t kQueryTopTopics = 5;
constexpr std::size_t kTopWordsPerTopic = 5;

std::string read_file(const fs::path& path, std::string_view what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + std::string(what) + " '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out << contents;
  if (!out) throw Error(ErrorKind::kIo, "failed writing '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create output directory '" + dir.string() + "': " + ec.message());
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Round-trip formatting for CSV cells.
std::string fmt_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_cell(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) out += (out.empty() ? "" : " ") + t;
  return out;
}

// Runs fn(0) .. fn(n - 1) on up to `workers` threads. Exceptions are
// rethrown after all threads finish, lowest run index first.
template <typename Fn>
void run_parallel(int n, int workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int r = next++; r < n; r = next++) {
      try {
        fn(r);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min(workers, n));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Independent runs repeat the same warnings; forward each distinct one once.
template <typename Fn>
void run_parallel_dedup(int n, int workers, Fn&& fn) {
  std::vector<std::string> warnings;
  std::exception_ptr error;
  {
    ScopedLogCapture capture;
    try {
      run_parallel(n, workers, fn);
    } catch (...) {
      error = std::current_exception();
    }
    warnings = capture.warnings();
  }
  std::set<std::string> seen;
  for (const auto& w : warnings) {
    if (seen.insert(w).second) log_warning(w);
  }
  if (error) std::rethrow_exception(error);
}

// Reads keys from a JSON object and rejects any it did not consume.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string where) : object_(object), where_(std::move(where)) {
    if (!object_.is_object()) fail("must be an object");
  }

  const json* get(const std::string& key) {
    consumed_.insert(key);
    auto it = object_.find(key);
    if (it == object_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (const json* v = get(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception&) {
        fail("field '" + key + "' has the wrong type");
      }
    }
  }

  template <typename T>
  void read(const std::string& key, std::optional<T>& out) {
    if (const json* v = get(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception&) {
        fail("field '" + key + "' has the wrong type");
      }
    }
  }

  void finish() {
    for (auto it = object_.begin(); it != object_.end(); ++it) {
      if (!consumed_.contains(it.key())) fail("unknown key '" + it.key() + "'");
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::kConfig, "config " + where_ + ": " + what);
  }

 private:
  const json& object_;
  std::string where_;
  std::set<std::string> consumed_;
};

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() ? p : base / p;
}

ordered_json lda_json(const LdaConfig& c) {
  return {
      {"num_topics", c.num_topics},
      {"alpha", c.effective_alpha()},
      {"beta", c.beta},
      {"train_iterations", c.train_iterations},
      {"infer_iterations", c.infer_iterations},
      {"burn_in", c.effective_burn_in()},
      {"infer_burn_in", c.effective_infer_burn_in()},
      {"thinning", c.thinning},
  };
}

ordered_json preprocess_json(const RunConfig& c) {
  std::vector<std::string> stopwords(c.preprocess.stopwords.begin(), c.preprocess.stopwords.end());
  std::sort(stopwords.begin(), stopwords.end());
  return {
      {"stopwords_hash", hex64(fnv1a64(join_tokens(stopwords)))},
      {"min_doc_freq", c.preprocess.min_doc_freq},
      {"min_doc_tokens", c.preprocess.min_doc_tokens},
      {"lowercase", c.preprocess.lowercase},
      {"strip_urls", c.preprocess.strip_urls},
      {"charset_filter", c.preprocess.charset_filter},
  };
}

ordered_json compat_json(const RunConfig& c) {
  return {
      {"query", c.query},
      {"preprocess", preprocess_json(c)},
      {"lda", lda_json(c.lda)},
      {"jr", {{"renyi_order", c.jr.renyi_order}}},
  };
}

// The vocabulary that accompanies a reused model.
Vocabulary load_model_vocab(const RunConfig& config) {
  const fs::path vocab_path =
      config.vocab_path.value_or(config.model_path->parent_path() / "vocab.json");
  return Vocabulary::from_json(read_file(vocab_path, "vocabulary file"));
}

ordered_json coherence_json(const Coherence& c) {
  return c.infinite ? ordered_json(nullptr) : ordered_json(c.value);
}

std::string coherence_cell(const Coherence& c) { return c.infinite ? "inf" : fmt_double(c.value); }

std::vector<TopicWeight> query_topic_weights(const TopicModel& model, std::span<const double> theta) {
  std::vector<int> order(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) order[k] = static_cast<int>(k);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return theta[a] > theta[b]; });
  std::vector<TopicWeight> out;
  for (std::size_t i = 0; i < std::min(kQueryTopTopics, order.size()); ++i) {
    out.push_back({order[i], theta[order[i]], top_words(model, order[i], kTopWordsPerTopic)});
  }
  return out;
}

}  // namespace

// Config ---------------------------------------------------------------------

void RunConfig::validate() const {
  preprocess.validate();
  lda.validate();
  if (!(jr.renyi_order > 0.0 && jr.renyi_order < 1.0)) {
    throw Error(ErrorKind::kConfig, "jr.renyi_order must lie in (0, 1)");
  }
  if (n_runs < 1) throw Error(ErrorKind::kConfig, "n_runs must be >= 1");
  if (workers < 1) throw Error(ErrorKind::kConfig, "workers must be >= 1");
  if (delta < 0.0) throw Error(ErrorKind::kConfig, "delta must be >= 0");
}

RunConfig run_config_from_json(std::string_view text, const fs::path& base_dir) {
  json root = json::parse(text, nullptr, false);
  if (root.is_discarded()) throw Error(ErrorKind::kConfig, "config is not valid JSON");
  RunConfig config;
  ObjectReader top(root, "root");

  if (const json* input = top.get("input")) {
    ObjectReader r(*input, "input");
    std::vector<std::string> paths;
    if (const json* p = r.get("paths")) {
      if (p->is_string()) {
        paths.push_back(p->get<std::string>());
      } else {
        try {
          paths = p->get<std::vector<std::string>>();
        } catch (const json::exception&) {
          r.fail("paths must be a string or an array of strings");
        }
      }
    }
    for (const auto& p : paths) config.input_paths.push_back(resolve(base_dir, p));
    std::string format = "jsonl";
    r.read("format", format);
    config.ingest.format = parse_input_format(format);
    r.read("id_field", config.ingest.id_field);
    r.read("text_field", config.ingest.text_field);
    r.read("set_key_field", config.ingest.set_key_field);
    r.read("skip_errors", config.ingest.skip_errors);
    r.finish();
  }

  if (const json* pre = top.get("preprocess")) {
    ObjectReader r(*pre, "preprocess");
    std::optional<std::string> stopwords;
    r.read("stopwords", stopwords);
    if (stopwords) {
      config.stopwords_path = resolve(base_dir, *stopwords);
      config.preprocess.stopwords = load_stopwords(*config.stopwords_path);
    }
    r.read("min_doc_freq", config.preprocess.min_doc_freq);
    r.read("min_doc_tokens", config.preprocess.min_doc_tokens);
    r.read("lowercase", config.preprocess.lowercase);
    r.read("strip_urls", config.preprocess.strip_urls);
    r.read("charset_filter", config.preprocess.charset_filter);
    r.finish();
  }

  if (const json* lda = top.get("lda")) {
    ObjectReader r(*lda, "lda");
    r.read("num_topics", config.lda.num_topics);
    r.read("alpha", config.lda.alpha);
    r.read("beta", config.lda.beta);
    r.read("train_iterations", config.lda.train_iterations);
    r.read("infer_iterations", config.lda.infer_iterations);
    r.read("burn_in", config.lda.burn_in);
    r.read("infer_burn_in", config.lda.infer_burn_in);
    r.read("thinning", config.lda.thinning);
    r.finish();
  }

  if (const json* jr = top.get("jr")) {
    ObjectReader r(*jr, "jr");
    r.read("renyi_order", config.jr.renyi_order);
    r.finish();
  }

  top.read("query", config.query);
  top.read("n_runs", config.n_runs);
  top.read("delta", config.delta);
  std::optional<std::string> output_dir;
  top.read("output_dir", output_dir);
  if (output_dir) config.output_dir = resolve(base_dir, *output_dir);
  top.read("master_seed", config.master_seed);
  top.read("workers", config.workers);
  std::optional<std::string> model, vocab;
  top.read("model", model);
  top.read("vocab", vocab);
  if (model) config.model_path = resolve(base_dir, *model);
  if (vocab) config.vocab_path = resolve(base_dir, *vocab);
  top.finish();

  config.validate();
  return config;
}

RunConfig load_run_config(const fs::path& path) {
  const std::string text = read_file(path, "config file");
  return run_config_from_json(text, path.parent_path());
}

std::string run_config_to_json(const RunConfig& c) {
  ordered_json inputs = ordered_json::array();
  for (const auto& p : c.input_paths) inputs.push_back(p.lexically_normal().generic_string());
  ordered_json out = {
      {"input",
       {{"paths", inputs},
        {"format", to_string(c.ingest.format)},
        {"id_field", c.ingest.id_field},
        {"text_field", c.ingest.text_field},
        {"set_key_field", c.ingest.set_key_field},
        {"skip_errors", c.ingest.skip_errors}}},
      {"preprocess", preprocess_json(c)},
      {"lda", lda_json(c.lda)},
      {"jr", {{"renyi_order", c.jr.renyi_order}}},
      {"query", c.query},
      {"n_runs", c.n_runs},
      {"delta", c.delta},
      {"master_seed", c.master_seed},
      {"model", c.model_path ? ordered_json(c.model_path->lexically_normal().generic_string())
                             : ordered_json(nullptr)},
  };
  return out.dump();
}

std::string config_hash(const RunConfig& config) {
  return hex64(fnv1a64(run_config_to_json(config)));
}

std::string compat_hash(const RunConfig& config) {
  return hex64(fnv1a64(compat_json(config).dump()));
}

// Corpus -----------------------------------------------------------------------

PreparedCorpus prepare_corpus(const RunConfig& config, const Vocabulary* fixed_vocab) {
  if (config.input_paths.empty()) throw Error(ErrorKind::kConfig, "no input paths configured");
  PreparedCorpus corpus;
  std::set<std::string> ids;
  for (const auto& path : config.input_paths) {
    for (auto& doc : ingest(path, config.ingest)) {
      if (!ids.insert(doc.id).second) {
        throw Error(ErrorKind::kParse, "document id '" + doc.id + "' appears in more than one input");
      }
      corpus.raws.push_back(std::move(doc));
    }
  }

  if (fixed_vocab == nullptr) {
    corpus.preprocessed = preprocess(corpus.raws, config.preprocess);
  } else {
    corpus.preprocessed.vocab = *fixed_vocab;
    std::size_t nonempty = 0;
    for (const auto& raw : corpus.raws) {
      const auto tokens = tokenize(raw.text, config.preprocess);
      corpus.preprocessed.docs.push_back(bow_from_tokens(raw.id, tokens, *fixed_vocab));
      if (!corpus.preprocessed.docs.back().empty()) ++nonempty;
    }
    if (nonempty == 0) {
      throw Error(ErrorKind::kEmptyCorpus,
                  "empty corpus: no document shares a term with the model vocabulary");
    }
  }
  corpus.sets = partition(corpus.preprocessed.docs, corpus.raws);
  corpus.query = preprocess_query(config.query, config.preprocess, corpus.preprocessed.vocab);
  return corpus;
}

// train ------------------------------------------------------------------------

TrainOutcome cmd_train(const RunConfig& config) {
  config.validate();
  PreparedCorpus corpus = prepare_corpus(config);
  LdaConfig lda = config.lda;
  lda.seed = run_seed(config.master_seed, 0);
  TopicModel model = train(corpus.preprocessed.docs, corpus.preprocessed.vocab, lda);

  ensure_dir(config.output_dir);
  TrainOutcome out;
  out.model_file = config.output_dir / "model.json";
  out.vocab_file = config.output_dir / "vocab.json";
  save_model(out.model_file, model);
  write_file(out.vocab_file, corpus.preprocessed.vocab.to_json() + "\n");

  out.num_raw_docs = corpus.raws.size();
  out.num_docs = corpus.preprocessed.docs.size();
  out.num_sets = corpus.sets.size();
  out.vocab_size = corpus.preprocessed.vocab.size();
  out.num_topics = model.num_topics();
  for (int k = 0; k < model.num_topics(); ++k) out.top_words.push_back(top_words(model, k, 10));
  return out;
}

// score ------------------------------------------------------------------------

bool DrlReport::has_metric_failures() const {
  return std::any_of(sets.begin(), sets.end(), [](const SetSummary& s) { return s.error.has_value(); });
}

DrlReport compute_scores(const RunConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const bool reuse = config.model_path.has_value();

  std::optional<Vocabulary> model_vocab;
  std::optional<TopicModel> shared_model;
  if (reuse) {
    model_vocab = load_model_vocab(config);
    shared_model = load_model(*config.model_path, *model_vocab);
  }
  const PreparedCorpus corpus = prepare_corpus(config, reuse ? &*model_vocab : nullptr);
  if (corpus.query.bow.empty()) {
    throw Error(ErrorKind::kUnprojectable,
                "query has no in-vocabulary terms (dropped: " + join_tokens(corpus.query.oov_terms) +
                    ")");
  }

  struct RunResult {
    std::vector<std::optional<double>> relevance;
    std::vector<std::optional<double>> disparity;
    std::vector<std::size_t> scored;
    std::vector<std::size_t> skipped;
    std::vector<double> theta_q;
    std::vector<TopicWeight> query_topics;
  };
  const std::size_t n_sets = corpus.sets.size();
  std::vector<RunResult> runs(config.n_runs);

  run_parallel_dedup(config.n_runs, config.workers, [&](int r) {
    const std::uint64_t seed = run_seed(config.master_seed, static_cast<std::uint64_t>(r));
    std::optional<TopicModel> trained;
    if (!reuse) {
      LdaConfig lda = config.lda;
      lda.seed = seed;
      trained.emplace(train(corpus.preprocessed.docs, corpus.preprocessed.vocab, lda));
    }
    const TopicModel& model = reuse ? *shared_model : *trained;

    RunResult& out = runs[r];
    out.theta_q = project(model, corpus.query.bow, projection_seed(seed, corpus.query.bow.id)).theta;
    if (r == 0 && !reuse) out.query_topics = query_topic_weights(model, out.theta_q);
    out.relevance.resize(n_sets);
    out.disparity.resize(n_sets);
    out.scored.assign(n_sets, 0);
    out.skipped.assign(n_sets, 0);
    const SemanticVector query_theta{out.theta_q};
    for (std::size_t s = 0; s < n_sets; ++s) {
      std::vector<SemanticVector> thetas;
      for (const auto& doc : corpus.sets[s].docs) {
        if (doc.empty()) {
          ++out.skipped[s];
          continue;
        }
        thetas.push_back(project(model, doc, projection_seed(seed, doc.id)));
      }
      out.scored[s] = thetas.size();
      if (!thetas.empty()) out.relevance[s] = relevance(thetas, query_theta);
      if (thetas.size() >= 2) out.disparity[s] = disparity(thetas, config.jr);
    }
  });

  DrlReport report;
  report.config_hash = config_hash(config);
  report.compat_hash = compat_hash(config);
  report.mode = reuse ? "reuse-model" : "retrain-per-run";
  report.query_text = config.query;
  report.query_tokens = corpus.query.tokens;
  report.query_oov_terms = corpus.query.oov_terms;
  report.n_runs = config.n_runs;
  report.master_seed = config.master_seed;
  for (int r = 0; r < config.n_runs; ++r) {
    report.run_seeds.push_back(run_seed(config.master_seed, static_cast<std::uint64_t>(r)));
  }
  report.delta = config.delta;
  report.num_raw_docs = corpus.raws.size();
  report.num_docs = corpus.preprocessed.docs.size();
  report.vocab_size = corpus.preprocessed.vocab.size();
  report.dropped_short_docs = corpus.preprocessed.dropped_short_docs;

  if (reuse) {
    const std::size_t K = runs.front().theta_q.size();
    report.query_theta.assign(K, 0.0);
    for (const auto& run : runs) {
      for (std::size_t k = 0; k < K; ++k) report.query_theta[k] += run.theta_q[k];
    }
    for (double& t : report.query_theta) t /= config.n_runs;
    report.query_theta_source = "mean-over-runs";
    report.query_topics = query_topic_weights(*shared_model, report.query_theta);
  } else {
    report.query_theta = runs.front().theta_q;
    report.query_theta_source = "run-0";
    report.query_topics = runs.front().query_topics;
  }

  std::vector<SetSummary> summaries(n_sets);
  std::vector<SetScore> scorable;
  for (std::size_t s = 0; s < n_sets; ++s) {
    SetSummary& summary = summaries[s];
    summary.set_key = corpus.sets[s].key;
    summary.n_docs_scored = runs.front().scored[s];
    summary.n_docs_skipped = runs.front().skipped[s];
    for (const auto& run : runs) {
      if (run.relevance[s]) summary.relevance_runs.push_back(*run.relevance[s]);
      if (run.disparity[s]) summary.disparity_runs.push_back(*run.disparity[s]);
    }
    if (!summary.relevance_runs.empty()) {
      summary.relevance_mean = mean(summary.relevance_runs);
      summary.relevance_var = sample_variance(summary.relevance_runs);
    }
    if (summary.disparity_runs.size() == static_cast<std::size_t>(config.n_runs)) {
      summary.disparity_mean = mean(summary.disparity_runs);
      summary.disparity_var = sample_variance(summary.disparity_runs);
      summary.coherence = coherence_from_disparity(summary.disparity_mean);
    } else {
      summary.error = "set has " + std::to_string(summary.n_docs_scored) +
                      " projectable documents; disparity needs at least 2";
      log_warning("set '" + summary.set_key + "': " + *summary.error);
      continue;
    }
    SetScore score;
    score.set_key = summary.set_key;
    score.relevance = summary.relevance_mean;
    score.disparity = summary.disparity_mean;
    score.coherence = summary.coherence;
    score.n_docs_scored = summary.n_docs_scored;
    score.n_docs_skipped = summary.n_docs_skipped;
    scorable.push_back(score);
  }

  const std::vector<SetScore> ranked = rank_sets(scorable);
  std::map<std::string, std::size_t> rank_of;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    rank_of[ranked[i].set_key] = i + 1;
    report.ranking.push_back(ranked[i].set_key);
  }
  for (const auto& group : equivalence_classes(ranked, config.delta)) {
    std::vector<std::string> keys;
    for (std::size_t i : group) keys.push_back(ranked[i].set_key);
    report.equivalence_classes.push_back(std::move(keys));
  }
  for (auto& summary : summaries) {
    auto it = rank_of.find(summary.set_key);
    if (it != rank_of.end()) summary.rank = it->second;
  }
  std::stable_sort(summaries.begin(), summaries.end(), [](const SetSummary& a, const SetSummary& b) {
    if ((a.rank == 0) != (b.rank == 0)) return a.rank != 0;
    if (a.rank != b.rank) return a.rank < b.rank;
    return a.set_key < b.set_key;
  });
  report.sets = std::move(summaries);
  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string report_to_json(const DrlReport& report) {
  ordered_json sets = ordered_json::array();
  for (const auto& s : report.sets) {
    ordered_json row = {
        {"set_key", s.set_key},
        {"rank", s.rank},
        {"relevance_mean", s.relevance_mean},
        {"relevance_var", s.relevance_var},
        {"disparity_mean", s.disparity_mean},
        {"disparity_var", s.disparity_var},
        {"coherence", coherence_json(s.coherence)},
        {"coherence_infinite", s.coherence.infinite},
        {"n_docs_scored", s.n_docs_scored},
        {"n_docs_skipped", s.n_docs_skipped},
        {"relevance_runs", s.relevance_runs},
        {"disparity_runs", s.disparity_runs},
        {"error", s.error ? ordered_json(*s.error) : ordered_json(nullptr)},
    };
    sets.push_back(std::move(row));
  }
  ordered_json topics = ordered_json::array();
  for (const auto& t : report.query_topics) {
    ordered_json words = ordered_json::array();
    for (const auto& [term, weight] : t.top_words) words.push_back({{"term", term}, {"weight", weight}});
    topics.push_back({{"topic", t.topic}, {"weight", t.weight}, {"top_words", words}});
  }
  ordered_json out = {
      {"format", "drl-report"},
      {"version", kReportFormatVersion},
      {"config_hash", report.config_hash},
      {"compat_hash", report.compat_hash},
      {"mode", report.mode},
      {"n_runs", report.n_runs},
      {"master_seed", report.master_seed},
      {"run_seeds", report.run_seeds},
      {"corpus",
       {{"raw_documents", report.num_raw_docs},
        {"documents", report.num_docs},
        {"dropped_short_documents", report.dropped_short_docs},
        {"vocab_size", report.vocab_size}}},
      {"query",
       {{"text", report.query_text},
        {"tokens", report.query_tokens},
        {"oov_terms", report.query_oov_terms},
        {"theta", report.query_theta},
        {"theta_source", report.query_theta_source},
        {"top_topics", topics}}},
      {"sets", sets},
      {"ranking", report.ranking},
      {"delta", report.delta},
      {"equivalence_classes", report.equivalence_classes},
  };
  return out.dump(2);
}

DrlReport report_from_json(std::string_view text) {
  json in = json::parse(text, nullptr, false);
  if (in.is_discarded() || !in.is_object() || in.value("format", "") != "drl-report") {
    throw Error(ErrorKind::kParse, "not a drl report file");
  }
  try {
    DrlReport report;
    report.config_hash = in.at("config_hash").get<std::string>();
    report.compat_hash = in.at("compat_hash").get<std::string>();
    report.mode = in.at("mode").get<std::string>();
    report.n_runs = in.at("n_runs").get<int>();
    report.master_seed = in.at("master_seed").get<std::uint64_t>();
    report.run_seeds = in.at("run_seeds").get<std::vector<std::uint64_t>>();
    report.query_text = in.at("query").at("text").get<std::string>();
    report.query_tokens = in.at("query").at("tokens").get<std::vector<std::string>>();
    report.query_theta = in.at("query").at("theta").get<std::vector<double>>();
    report.ranking = in.at("ranking").get<std::vector<std::string>>();
    report.delta = in.at("delta").get<double>();
    for (const auto& row : in.at("sets")) {
      SetSummary s;
      s.set_key = row.at("set_key").get<std::string>();
      s.rank = row.at("rank").get<std::size_t>();
      s.relevance_mean = row.at("relevance_mean").get<double>();
      s.relevance_var = row.at("relevance_var").get<double>();
      s.disparity_mean = row.at("disparity_mean").get<double>();
      s.disparity_var = row.at("disparity_var").get<double>();
      s.coherence.infinite = row.at("coherence_infinite").get<bool>();
      if (!s.coherence.infinite) s.coherence.value = row.at("coherence").get<double>();
      s.n_docs_scored = row.at("n_docs_scored").get<std::size_t>();
      s.n_docs_skipped = row.at("n_docs_skipped").get<std::size_t>();
      s.relevance_runs = row.at("relevance_runs").get<std::vector<double>>();
      s.disparity_runs = row.at("disparity_runs").get<std::vector<double>>();
      if (!row.at("error").is_null()) s.error = row.at("error").get<std::string>();
      report.sets.push_back(std::move(s));
    }
    return report;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("malformed report file: ") + e.what());
  }
}

void write_score_outputs(const DrlReport& report, const fs::path& dir) {
  ensure_dir(dir);
  write_file(dir / "report.json", report_to_json(report) + "\n");

  std::string scores =
      "set_key,relevance_mean,relevance_var,disparity_mean,disparity_var,coherence,"
      "n_docs_scored,n_docs_skipped,rank\n";
  for (const auto& s : report.sets) {
    scores += csv_cell(s.set_key) + "," + fmt_double(s.relevance_mean) + "," +
              fmt_double(s.relevance_var) + "," + fmt_double(s.disparity_mean) + "," +
              fmt_double(s.disparity_var) + "," + coherence_cell(s.coherence) + "," +
              std::to_string(s.n_docs_scored) + "," + std::to_string(s.n_docs_skipped) + "," +
              std::to_string(s.rank) + "\n";
  }
  write_file(dir / "scores.csv", scores);

  // Plot-ready series: one row per set in key order.
  std::vector<const SetSummary*> by_key;
  for (const auto& s : report.sets) by_key.push_back(&s);
  std::sort(by_key.begin(), by_key.end(),
            [](const SetSummary* a, const SetSummary* b) { return a->set_key < b->set_key; });
  std::string series = "set_key,relevance_mean,relevance_var,disparity_mean,disparity_var\n";
  for (const SetSummary* s : by_key) {
    series += csv_cell(s->set_key) + "," + fmt_double(s->relevance_mean) + "," +
              fmt_double(s->relevance_var) + "," + fmt_double(s->disparity_mean) + "," +
              fmt_double(s->disparity_var) + "\n";
  }
  write_file(dir / "timeseries.csv", series);

  std::string topics = "topic,weight\n";
  for (std::size_t k = 0; k < report.query_theta.size(); ++k) {
    topics += std::to_string(k) + "," + fmt_double(report.query_theta[k]) + "\n";
  }
  write_file(dir / "query_topics.csv", topics);

  ordered_json timings = {{"config_hash", report.config_hash},
                          {"elapsed_seconds", report.elapsed_seconds}};
  write_file(dir / "timings.json", timings.dump(2) + "\n");
}

DrlReport cmd_score(const RunConfig& config) {
  DrlReport report = compute_scores(config);
  write_score_outputs(report, config.output_dir);
  return report;
}

// perturb ----------------------------------------------------------------------

namespace {

ordered_json sensitivity_to_json(const PerturbOutcome& outcome, const RunConfig& config,
                                 std::span<const std::string> query_tokens, bool reuse) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : outcome.results) {
    ordered_json s2 = ordered_json::object();
    ordered_json s2_median = ordered_json::object();
    ordered_json s2_runs = ordered_json::object();
    for (const auto& key : outcome.set_keys) {
      auto mean_it = r.s2_per_set.find(key);
      auto runs_it = r.s2_runs.find(key);
      s2[key] = mean_it != r.s2_per_set.end() ? ordered_json(mean_it->second) : ordered_json(nullptr);
      if (runs_it != r.s2_runs.end() && !runs_it->second.empty()) {
        s2_median[key] = median(runs_it->second);
        s2_runs[key] = runs_it->second;
      } else {
        s2_median[key] = nullptr;
        s2_runs[key] = ordered_json::array();
      }
    }
    rows.push_back({
        {"label", r.label},
        {"kind", to_string(r.kind)},
        {"perturbed_query", join_tokens(r.perturbed_tokens)},
        {"oov_terms", r.oov_terms},
        {"word_space_distance", r.word_space_distance},
        {"semantic_distance", r.semantic_distance},
        {"s1", r.ok() ? ordered_json(r.s1) : ordered_json(nullptr)},
        {"s1_median", r.s1_runs.empty() ? ordered_json(nullptr) : ordered_json(median(r.s1_runs))},
        {"s2", s2},
        {"s2_median", s2_median},
        {"s1_runs", r.s1_runs},
        {"s2_runs", s2_runs},
        {"error", r.error ? ordered_json(*r.error) : ordered_json(nullptr)},
    });
  }
  return {
      {"format", "drl-sensitivity"},
      {"version", kReportFormatVersion},
      {"config_hash", config_hash(config)},
      {"compat_hash", compat_hash(config)},
      {"mode", reuse ? "reuse-model" : "retrain-per-run"},
      {"n_runs", config.n_runs},
      {"master_seed", config.master_seed},
      {"query_tokens", std::vector<std::string>(query_tokens.begin(), query_tokens.end())},
      {"set_keys", outcome.set_keys},
      {"results", rows},
  };
}

std::string sensitivity_to_csv(const PerturbOutcome& outcome) {
  std::string csv = "label,kind,perturbed_query,word_space_distance,semantic_distance,s1";
  for (const auto& key : outcome.set_keys) csv += "," + csv_cell("s2_" + key);
  csv += ",error\n";
  for (const auto& r : outcome.results) {
    csv += csv_cell(r.label) + "," + std::string(to_string(r.kind)) + "," +
           csv_cell(join_tokens(r.perturbed_tokens)) + ",";
    if (r.ok()) {
      csv += fmt_double(r.word_space_distance) + "," + fmt_double(r.semantic_distance) + "," +
             fmt_double(r.s1);
    } else {
      csv += ",,";
    }
    for (const auto& key : outcome.set_keys) {
      auto it = r.s2_per_set.find(key);
      csv += ",";
      if (r.ok() && it != r.s2_per_set.end()) csv += fmt_double(it->second);
    }
    csv += "," + (r.error ? csv_cell(*r.error) : std::string()) + "\n";
  }
  return csv;
}

}  // namespace

PerturbOutcome cmd_perturb(const RunConfig& config, const fs::path& spec_path) {
  config.validate();
  const std::vector<PerturbationEntry> entries = load_perturbation_spec(spec_path);
  const bool reuse = config.model_path.has_value();

  std::optional<Vocabulary> model_vocab;
  std::optional<TopicModel> shared_model;
  if (reuse) {
    model_vocab = load_model_vocab(config);
    shared_model = load_model(*config.model_path, *model_vocab);
  }
  const PreparedCorpus corpus = prepare_corpus(config, reuse ? &*model_vocab : nullptr);
  if (corpus.query.bow.empty()) {
    throw Error(ErrorKind::kUnprojectable,
                "query has no in-vocabulary terms (dropped: " + join_tokens(corpus.query.oov_terms) +
                    ")");
  }

  std::vector<Perturbation> valid;
  for (const auto& e : entries) {
    if (e.perturbation) valid.push_back(*e.perturbation);
  }

  std::vector<SensitivityResult> pooled;
  if (!valid.empty()) {
    if (reuse) {
      pooled = sensitivity_report(*shared_model, corpus.query.tokens, valid, corpus.sets,
                                  config.n_runs, config.master_seed);
    } else {
      std::vector<std::vector<SensitivityResult>> per_run(config.n_runs);
      run_parallel_dedup(config.n_runs, config.workers, [&](int r) {
        const std::uint64_t seed = run_seed(config.master_seed, static_cast<std::uint64_t>(r));
        LdaConfig lda = config.lda;
        lda.seed = seed;
        const TopicModel model = train(corpus.preprocessed.docs, corpus.preprocessed.vocab, lda);
        per_run[r] = sensitivity_report(model, corpus.query.tokens, valid, corpus.sets, 1, seed);
      });
      pooled = combine_reports(per_run);
    }
  }

  PerturbOutcome outcome;
  for (const auto& set : corpus.sets) outcome.set_keys.push_back(set.key);
  std::size_t next_valid = 0;
  for (const auto& e : entries) {
    if (e.perturbation) {
      outcome.results.push_back(pooled[next_valid++]);
    } else {
      SensitivityResult failed;
      failed.label = e.label;
      failed.error = e.error;
      outcome.results.push_back(std::move(failed));
    }
  }
  for (const auto& r : outcome.results) {
    if (!r.ok()) {
      ++outcome.failed_rows;
      log_warning("perturbation '" + r.label + "': " + *r.error);
    }
  }

  ensure_dir(config.output_dir);
  write_file(config.output_dir / "sensitivity.json",
             sensitivity_to_json(outcome, config, corpus.query.tokens, reuse).dump(2) + "\n");
  write_file(config.output_dir / "sensitivity.csv", sensitivity_to_csv(outcome));
  return outcome;
}

// rank -------------------------------------------------------------------------

RankOutcome cmd_rank(std::span<const fs::path> score_files, double delta, const fs::path& output_dir) {
  if (score_files.empty()) throw Error(ErrorKind::kConfig, "rank needs at least one score file");
  if (delta < 0.0) throw Error(ErrorKind::kConfig, "delta must be >= 0");

  RankOutcome outcome;
  std::vector<SetScore> merged;
  std::set<std::string> keys;
  for (const auto& path : score_files) {
    const DrlReport report = report_from_json(read_file(path, "score file"));
    if (outcome.compat_hash.empty()) {
      outcome.compat_hash = report.compat_hash;
    } else if (report.compat_hash != outcome.compat_hash) {
      throw Error(ErrorKind::kConfig, "config-hash mismatch: '" + path.string() + "' has " +
                                          report.compat_hash + ", expected " + outcome.compat_hash);
    }
    for (const auto& s : report.sets) {
      if (s.error || s.rank == 0) continue;
      if (!keys.insert(s.set_key).second) {
        throw Error(ErrorKind::kConfig, "set '" + s.set_key + "' appears in more than one score file");
      }
      SetScore score;
      score.set_key = s.set_key;
      score.relevance = s.relevance_mean;
      score.disparity = s.disparity_mean;
      score.coherence = s.coherence;
      score.n_docs_scored = s.n_docs_scored;
      score.n_docs_skipped = s.n_docs_skipped;
      merged.push_back(std::move(score));
    }
  }

  outcome.ranked = rank_sets(merged);
  std::vector<std::size_t> class_of(outcome.ranked.size(), 0);
  const auto groups = equivalence_classes(outcome.ranked, delta);
  for (std::size_t c = 0; c < groups.size(); ++c) {
    std::vector<std::string> names;
    for (std::size_t i : groups[c]) {
      class_of[i] = c;
      names.push_back(outcome.ranked[i].set_key);
    }
    outcome.classes.push_back(std::move(names));
  }

  ordered_json ranking = ordered_json::array();
  std::string csv = "rank,set_key,relevance_mean,disparity_mean,coherence,equivalence_class\n";
  for (std::size_t i = 0; i < outcome.ranked.size(); ++i) {
    const SetScore& s = outcome.ranked[i];
    ranking.push_back({{"rank", i + 1},
                       {"set_key", s.set_key},
                       {"relevance_mean", s.relevance},
                       {"disparity_mean", s.disparity},
                       {"coherence", coherence_json(s.coherence)},
                       {"coherence_infinite", s.coherence.infinite},
                       {"equivalence_class", class_of[i]}});
    csv += std::to_string(i + 1) + "," + csv_cell(s.set_key) + "," + fmt_double(s.relevance) + "," +
           fmt_double(s.disparity) + "," + coherence_cell(s.coherence) + "," +
           std::to_string(class_of[i]) + "\n";
  }
  ordered_json sources = ordered_json::array();
  for (const auto& p : score_files) sources.push_back(p.generic_string());
  ordered_json out = {
      {"format", "drl-rank"},
      {"version", kReportFormatVersion},
      {"compat_hash", outcome.compat_hash},
      {"delta", delta},
      {"sources", sources},
      {"ranking", ranking},
      {"equivalence_classes", outcome.classes},
  };
  ensure_dir(output_dir);
  write_file(output_dir / "rank.json", out.dump(2) + "\n");
  write_file(output_dir / "rank.csv", csv);
  return outcome;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUnprojectable:
    case ErrorKind::kMetric:
      return 1;
    case ErrorKind::kIo:
    case ErrorKind::kConfig:
    case ErrorKind::kParse:
    case ErrorKind::kEmptyCorpus:
    case ErrorKind::kInvalidArgument:
      return 2;
  }
  return 2;
}

}  // namespace drl
