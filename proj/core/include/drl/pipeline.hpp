#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "drl/corpus.hpp"
#include "drl/error.hpp"
#include "drl/lda.hpp"
#include "drl/metrics.hpp"
#include "drl/sensitivity.hpp"

namespace drl {

// Everything a train/score/perturb invocation needs. Loaded from a JSON
// config file (schema in README.md) and adjusted by command-line flags.
struct RunConfig {
  std::vector<std::filesystem::path> input_paths;
  IngestOptions ingest;
  PreprocessConfig preprocess = default_preprocess_config();
  std::optional<std::filesystem::path> stopwords_path;
  LdaConfig lda;
  JrParams jr;
  std::string query;
  int n_runs = 20;
  double delta = 0.0;
  std::filesystem::path output_dir = "drl-out";
  std::uint64_t master_seed = 0;
  int workers = 1;
  // Reuse-model mode: score every run with this model instead of retraining.
  // Its vocabulary is read from `vocab_path`, or vocab.json beside it.
  std::optional<std::filesystem::path> model_path;
  std::optional<std::filesystem::path> vocab_path;

  void validate() const;
};

// Relative paths are resolved against `base_dir`. Unknown keys are errors.
RunConfig run_config_from_json(std::string_view json, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

// Canonical JSON of the fields that affect results.
std::string run_config_to_json(const RunConfig& config);
// Hash of run_config_to_json; embedded in every output.
std::string config_hash(const RunConfig& config);
// Hash of the query, preprocessing, LDA and JR settings only. Score files
// with equal compat hashes can be merged by cmd_rank.
std::string compat_hash(const RunConfig& config);

struct PreparedCorpus {
  std::vector<RawDocument> raws;
  PreprocessResult preprocessed;
  std::vector<DocumentSet> sets;
  QueryBow query;
};

// Ingests every input path, preprocesses, partitions and maps the query.
// Without `fixed_vocab` the vocabulary is built from the corpus. With it,
// documents are mapped onto that vocabulary unpruned, and documents without
// in-vocabulary tokens are kept (empty) so scoring can count them as skipped.
PreparedCorpus prepare_corpus(const RunConfig& config, const Vocabulary* fixed_vocab = nullptr);

struct TrainOutcome {
  std::filesystem::path model_file;
  std::filesystem::path vocab_file;
  std::size_t num_raw_docs = 0;
  std::size_t num_docs = 0;
  std::size_t num_sets = 0;
  std::size_t vocab_size = 0;
  int num_topics = 0;
  std::vector<std::vector<std::pair<std::string, double>>> top_words;
};

// Trains one model with the run-0 seed and writes model.json + vocab.json.
TrainOutcome cmd_train(const RunConfig& config);

struct SetSummary {
  std::string set_key;
  std::vector<double> relevance_runs;
  std::vector<double> disparity_runs;
  double relevance_mean = 0.0;
  double relevance_var = 0.0;
  double disparity_mean = 0.0;
  double disparity_var = 0.0;
  Coherence coherence;
  std::size_t n_docs_scored = 0;
  std::size_t n_docs_skipped = 0;
  std::size_t rank = 0;  // 1-based; 0 when the set could not be scored
  std::optional<std::string> error;
};

struct TopicWeight {
  int topic = 0;
  double weight = 0.0;
  std::vector<std::pair<std::string, double>> top_words;
};

struct DrlReport {
  std::string config_hash;
  std::string compat_hash;
  std::string mode;  // "retrain-per-run" or "reuse-model"
  std::string query_text;
  std::vector<std::string> query_tokens;
  std::vector<std::string> query_oov_terms;
  // Mean over runs in reuse-model mode. Topic labels are not comparable
  // across independently trained models, so retrain mode reports run 0.
  std::vector<double> query_theta;
  std::string query_theta_source;
  std::vector<TopicWeight> query_topics;
  int n_runs = 0;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> run_seeds;
  std::vector<SetSummary> sets;  // rank order; unscored sets last, by key
  std::vector<std::string> ranking;
  double delta = 0.0;
  std::vector<std::vector<std::string>> equivalence_classes;
  std::size_t num_raw_docs = 0;
  std::size_t num_docs = 0;
  std::size_t vocab_size = 0;
  std::size_t dropped_short_docs = 0;
  double elapsed_seconds = 0.0;

  bool has_metric_failures() const;
};

// Runs n_runs seeded repetitions of train (or reuse) -> project -> score and
// writes report.json, scores.csv, timeseries.csv and query_topics.csv, plus
// timings.json for the non-deterministic wall-clock data.
DrlReport cmd_score(const RunConfig& config);

// Score computation without file output; cmd_score = compute_scores + write.
DrlReport compute_scores(const RunConfig& config);
void write_score_outputs(const DrlReport& report, const std::filesystem::path& dir);

std::string report_to_json(const DrlReport& report);
// Reads the fields cmd_rank needs back from report.json.
DrlReport report_from_json(std::string_view json);

struct PerturbOutcome {
  std::vector<SensitivityResult> results;
  std::vector<std::string> set_keys;
  std::size_t failed_rows = 0;
};

// Sensitivity quotients for every row of the spec file, in file order. Each
// run retrains (or reuses) the model; per-run values are pooled.
PerturbOutcome cmd_perturb(const RunConfig& config, const std::filesystem::path& spec_path);

struct RankOutcome {
  std::vector<SetScore> ranked;
  std::vector<std::vector<std::string>> classes;
  std::string compat_hash;
};

// Merges report.json files produced under the same compat hash, ranks every
// set and groups the ranking into delta-equivalence classes. Writes
// rank.json and rank.csv to `output_dir`.
RankOutcome cmd_rank(std::span<const std::filesystem::path> score_files, double delta,
                     const std::filesystem::path& output_dir);

// Process exit code for an error: 2 for I/O, config and input problems,
// 1 for metric-level failures.
int exit_code_for(ErrorKind kind);

}  // namespace drl
