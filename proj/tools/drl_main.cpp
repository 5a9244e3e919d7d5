// drl: command line front end for training, scoring, perturbation analysis
// and ranking of document sets.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drl/error.hpp"
#include "drl/pipeline.hpp"
#include "drl/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config;
  std::vector<std::string> inputs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<int> runs;
  std::optional<int> workers;
  std::optional<std::string> query;
  std::optional<std::string> model;
  std::optional<std::string> vocab;
  std::optional<double> delta;
  bool skip_errors = false;
};

void add_run_options(CLI::App* cmd, Overrides& o, bool scoring) {
  cmd->add_option("-c,--config", o.config, "JSON run config")->required()->check(CLI::ExistingFile);
  cmd->add_option("-i,--input", o.inputs, "Input file(s); replaces input.paths from the config");
  cmd->add_option("-s,--seed", o.seed, "Master seed");
  cmd->add_option("-o,--output-dir", o.output_dir, "Directory for output files");
  cmd->add_option("-w,--workers", o.workers, "Worker threads for independent runs");
  cmd->add_flag("--skip-errors", o.skip_errors, "Skip malformed input records with a warning");
  cmd->add_option("-q,--query", o.query, "Query text");
  if (scoring) {
    cmd->add_option("-n,--runs", o.runs, "Number of seeded runs");
    cmd->add_option("-m,--model", o.model, "Reuse this trained model instead of retraining per run");
    cmd->add_option("--vocab", o.vocab, "Vocabulary for --model (default: vocab.json beside it)");
    cmd->add_option("-d,--delta", o.delta, "Equivalence tolerance");
  }
}

drl::RunConfig resolve_config(const Overrides& o) {
  drl::RunConfig config = drl::load_run_config(o.config);
  if (!o.inputs.empty()) {
    config.input_paths.assign(o.inputs.begin(), o.inputs.end());
  }
  if (o.seed) config.master_seed = *o.seed;
  if (o.output_dir) config.output_dir = *o.output_dir;
  if (o.runs) config.n_runs = *o.runs;
  if (o.workers) config.workers = *o.workers;
  if (o.query) config.query = *o.query;
  if (o.model) config.model_path = fs::path(*o.model);
  if (o.vocab) config.vocab_path = fs::path(*o.vocab);
  if (o.delta) config.delta = *o.delta;
  if (o.skip_errors) config.ingest.skip_errors = true;
  config.validate();
  return config;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

int run_train(const Overrides& o) {
  const auto config = resolve_config(o);
  const auto out = drl::cmd_train(config);
  std::cout << "documents: " << out.num_docs << " of " << out.num_raw_docs << " in " << out.num_sets
            << " sets, vocabulary: " << out.vocab_size << "\n";
  for (int k = 0; k < out.num_topics; ++k) {
    std::cout << "topic " << k << ":";
    for (const auto& [term, weight] : out.top_words[k]) std::cout << " " << term;
    std::cout << "\n";
  }
  std::cout << "wrote " << out.model_file.string() << " and " << out.vocab_file.string() << "\n";
  return 0;
}

int run_score(const Overrides& o) {
  const auto config = resolve_config(o);
  const auto report = drl::cmd_score(config);
  std::cout << "query: " << report.query_text << "\n";
  std::cout << "rank  set  relevance  disparity  coherence\n";
  for (const auto& s : report.sets) {
    if (s.error) {
      std::cout << "-     " << s.set_key << "  error: " << *s.error << "\n";
      continue;
    }
    std::cout << s.rank << "     " << s.set_key << "  " << fmt(s.relevance_mean) << "  "
              << fmt(s.disparity_mean) << "  "
              << (s.coherence.infinite ? std::string("inf") : fmt(s.coherence.value)) << "\n";
  }
  std::cout << "wrote " << (config.output_dir / "report.json").string() << "\n";
  return report.has_metric_failures() ? 1 : 0;
}

int run_perturb(const Overrides& o, const std::string& spec) {
  const auto config = resolve_config(o);
  const auto out = drl::cmd_perturb(config, spec);
  std::cout << "label  kind  s1";
  for (const auto& key : out.set_keys) std::cout << "  s2_" << key;
  std::cout << "\n";
  for (const auto& r : out.results) {
    if (!r.ok()) {
      std::cout << r.label << "  error: " << *r.error << "\n";
      continue;
    }
    std::cout << r.label << "  " << drl::to_string(r.kind) << "  " << fmt(r.s1);
    for (const auto& key : out.set_keys) {
      auto it = r.s2_per_set.find(key);
      std::cout << "  " << (it == r.s2_per_set.end() ? std::string("-") : fmt(it->second));
    }
    std::cout << "\n";
  }
  std::cout << "wrote " << (config.output_dir / "sensitivity.csv").string() << "\n";
  return out.failed_rows > 0 ? 1 : 0;
}

int run_rank(const std::vector<std::string>& files, double delta, const std::string& output_dir) {
  const std::vector<fs::path> paths(files.begin(), files.end());
  const auto out = drl::cmd_rank(paths, delta, output_dir);
  for (std::size_t i = 0; i < out.ranked.size(); ++i) {
    std::cout << i + 1 << "  " << out.ranked[i].set_key << "  " << fmt(out.ranked[i].relevance)
              << "\n";
  }
  std::cout << out.classes.size() << " equivalence classes at delta " << delta << "\n";
  return 0;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) {
    throw drl::Error(drl::ErrorKind::kIo, "cannot write '" + path.string() + "'");
  }
}

int run_fixture(const std::string& dir, std::uint64_t seed, std::size_t docs_per_set) {
  drl::synthetic::DrlFixtureSpec spec;
  spec.seed = seed;
  spec.docs_per_set = docs_per_set;
  const auto fixture = drl::synthetic::make_drl_fixture(spec);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw drl::Error(drl::ErrorKind::kIo, "cannot create '" + dir + "': " + ec.message());
  write_text(fs::path(dir) / "corpus.jsonl", drl::synthetic::to_jsonl(fixture.docs));
  write_text(fs::path(dir) / "config.json", drl::synthetic::fixture_config_json(fixture, "corpus.jsonl"));
  write_text(fs::path(dir) / "perturbations.json", drl::synthetic::fixture_perturbations_json());
  std::cout << "wrote " << fixture.docs.size() << " documents to " << dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data readiness scoring for topic-modelled document sets"};
  app.require_subcommand(1);

  Overrides train_opts, score_opts, perturb_opts;
  auto* train = app.add_subcommand("train", "Train one topic model and write model.json + vocab.json");
  add_run_options(train, train_opts, false);

  auto* score = app.add_subcommand("score", "Score every document set against the query");
  add_run_options(score, score_opts, true);

  std::string spec;
  auto* perturb = app.add_subcommand("perturb", "Sensitivity of the scores to query perturbations");
  add_run_options(perturb, perturb_opts, true);
  perturb->add_option("--spec", spec, "Perturbation spec (JSON)")->required();

  std::vector<std::string> score_files;
  double rank_delta = 0.0;
  std::string rank_out = "drl-out";
  auto* rank = app.add_subcommand("rank", "Merge score files and group sets into equivalence classes");
  rank->add_option("files", score_files, "report.json files from `drl score`")->required();
  rank->add_option("-d,--delta", rank_delta, "Equivalence tolerance")->check(CLI::NonNegativeNumber);
  rank->add_option("-o,--output-dir", rank_out, "Directory for rank.json and rank.csv");

  std::string fixture_dir = "fixture";
  std::uint64_t fixture_seed = 2014;
  std::size_t fixture_docs = 200;
  auto* fixture = app.add_subcommand("fixture", "Write the planted three-set corpus with config and perturbations");
  fixture->add_option("-o,--output-dir", fixture_dir, "Destination directory");
  fixture->add_option("-s,--seed", fixture_seed, "Generator seed");
  fixture->add_option("--docs-per-set", fixture_docs, "Documents per set")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return run_train(train_opts);
    if (*score) return run_score(score_opts);
    if (*perturb) return run_perturb(perturb_opts, spec);
    if (*rank) return run_rank(score_files, rank_delta, rank_out);
    if (*fixture) return run_fixture(fixture_dir, fixture_seed, fixture_docs);
  } catch (const drl::Error& e) {
    std::cerr << "drl: " << drl::to_string(e.kind()) << ": " << e.what() << "\n";
    return drl::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "drl: error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
