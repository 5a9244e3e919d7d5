// Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "drl/corpus.hpp"
#include "drl/error.hpp"
#include "drl/lda.hpp"
#include "drl/log.hpp"
#include "drl/metrics.hpp"
#include "drl/pipeline.hpp"
#include "drl/sensitivity.hpp"
#include "drl/stats.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("drl-acceptance-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

drl::RunConfig fixture_config() {
  return drl::load_run_config(fs::path(DRL_FIXTURE_DIR) / "config.json");
}

// Independent evaluator: long double, direct from the definition.
long double naive_renyi(const std::vector<long double>& p, long double order) {
  long double s = 0.0L;
  for (long double x : p) {
    if (x > 0.0L) s += std::pow(x, order);
  }
  return std::log(s) / (1.0L - order);
}

long double naive_jr(const std::vector<std::vector<double>>& dists, const std::vector<double>& w,
                     double order) {
  const std::size_t dim = dists[0].size();
  std::vector<long double> mix(dim, 0.0L);
  long double mean_entropy = 0.0L;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    std::vector<long double> p(dists[i].begin(), dists[i].end());
    for (std::size_t j = 0; j < dim; ++j) mix[j] += static_cast<long double>(w[i]) * p[j];
    mean_entropy += static_cast<long double>(w[i]) * naive_renyi(p, order);
  }
  return naive_renyi(mix, order) - mean_entropy;
}

std::vector<double> random_dist(std::size_t dim, std::mt19937_64& gen, bool allow_zeros) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(dim);
  double total = 0.0;
  for (double& x : p) {
    x = (allow_zeros && u(gen) < 0.15) ? 0.0 : u(gen) + 1e-3;
    total += x;
  }
  if (total == 0.0) {
    p[0] = total = 1.0;
  }
  for (double& x : p) x /= total;
  return p;
}

Outcome jr_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 gen(20140915);
  std::uniform_int_distribution<int> n_dist(2, 6), dim_dist(2, 10);
  const double orders[] = {0.1, 0.5, 0.9};
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = n_dist(gen);
    const int dim = dim_dist(gen);
    drl::JrParams params;
    params.renyi_order = orders[trial % 3];
    std::vector<std::vector<double>> dists;
    for (int i = 0; i < n; ++i) dists.push_back(random_dist(dim, gen, true));
    std::vector<double> w(n, 1.0 / n);
    if (trial % 2 == 1) {
      w = random_dist(n, gen, false);
      params.weights = w;
    }
    const double got = drl::jr_divergence(dists, params);
    const long double want = naive_jr(dists, w, params.renyi_order);
    worst = std::max(worst, static_cast<double>(std::abs(got - want)));
  }
  const double elapsed = seconds_since(start);
  return {worst <= 1e-10 && elapsed < 5.0,
          fmt("max |diff| %.3g over 1000 tuples, %.3f s", worst, elapsed)};
}

Outcome analytic_values() {
  drl::JrParams params;
  const std::vector<std::vector<double>> opposite{{1.0, 0.0}, {0.0, 1.0}};
  const double jr_err = std::abs(drl::jr_divergence(opposite, params) - std::log(2.0));
  double renyi_err = 0.0;
  for (int k = 1; k <= 64; ++k) {
    const std::vector<double> uniform(k, 1.0 / k);
    for (double order : {0.1, 0.5, 0.9}) {
      renyi_err = std::max(renyi_err, std::abs(drl::renyi_entropy(uniform, order) - std::log(double(k))));
    }
  }
  const std::vector<double> a{0.5, 0.5}, b{1.0, 0.0};
  const double cos_err = std::abs(drl::cosine(a, b) - std::sqrt(2.0) / 2.0);
  return {jr_err <= 1e-12 && renyi_err <= 1e-12 && cos_err <= 1e-12,
          fmt("JR-ln2 %.2g, Renyi-lnk %.2g, cos-sqrt2/2 %.2g", jr_err, renyi_err, cos_err)};
}

Outcome nonnegativity() {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<int> n_dist(2, 8), dim_dist(2, 20);
  std::uniform_real_distribution<double> order_dist(1e-3, 1.0 - 1e-3);
  double min_dd = 1.0, max_equal = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    drl::JrParams params;
    params.renyi_order = order_dist(gen);
    const int n = n_dist(gen), dim = dim_dist(gen);
    std::vector<drl::SemanticVector> set, same;
    for (int i = 0; i < n; ++i) set.push_back({random_dist(dim, gen, trial % 4 == 0)});
    for (int i = 0; i < n; ++i) same.push_back(set.front());
    min_dd = std::min(min_dd, drl::disparity(set, params));
    max_equal = std::max(max_equal, std::abs(drl::disparity(same, params)));
  }
  return {min_dd >= -1e-12 && max_equal <= 1e-12,
          fmt("min DD %.3g, max |DD| on equal inputs %.3g", min_dd, max_equal)};
}

Outcome planted_ordering() {
  const auto start = Clock::now();
  int held = 0;
  std::string failures;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto config = fixture_config();
    config.master_seed = seed;
    config.n_runs = 20;
    config.lda.train_iterations = 500;
    const auto report = drl::compute_scores(config);
    auto find = [&](const std::string& key) -> const drl::SetSummary& {
      return *std::find_if(report.sets.begin(), report.sets.end(),
                           [&](const drl::SetSummary& s) { return s.set_key == key; });
    };
    const auto &a = find("A"), &b = find("B"), &c = find("C");
    const bool ok = a.relevance_mean > b.relevance_mean && b.relevance_mean > c.relevance_mean &&
                    a.disparity_mean < b.disparity_mean;
    if (ok) {
      ++held;
    } else {
      failures += " " + std::to_string(seed);
    }
  }
  const double elapsed = seconds_since(start);
  return {held >= 19 && elapsed < 120.0,
          fmt("ordering held for %d/20 master seeds, %.1f s", held, elapsed) +
              (failures.empty() ? "" : "; failed seeds:" + failures)};
}

Outcome perturbation_sensitivity() {
  const auto start = Clock::now();
  auto config = fixture_config();
  config.n_runs = 20;
  config.output_dir = scratch_dir("perturb");
  drl::ScopedLogCapture quiet;
  const auto out = drl::cmd_perturb(config, fs::path(DRL_FIXTURE_DIR) / "perturbations.json");
  const double elapsed = seconds_since(start);

  bool ok = out.failed_rows == 0 && elapsed < 120.0;
  double worst_rep_s1 = 0.0, worst_rep_s2 = 0.0;
  std::string largest;
  double largest_s1 = -1.0;
  int repetitions = 0;
  for (const auto& r : out.results) {
    if (!r.ok()) continue;
    const double s1 = drl::median(r.s1_runs);
    if (s1 > largest_s1) {
      largest_s1 = s1;
      largest = r.label;
    }
    if (r.kind != drl::PerturbationKind::kRepetition) continue;
    ++repetitions;
    worst_rep_s1 = std::max(worst_rep_s1, s1);
    for (const auto& [key, values] : r.s2_runs) worst_rep_s2 = std::max(worst_rep_s2, drl::median(values));
  }
  const std::string keyword_label = "q_c1";  // deletion of "basketball"
  ok = ok && repetitions == 7 && worst_rep_s1 < 1.0 && worst_rep_s2 < 1.0 && largest == keyword_label;
  return {ok, fmt("%d repetitions: max median s1 %.3f, max median s2 %.3f; largest median s1 %s = %.3f; %.1f s",
                  repetitions, worst_rep_s1, worst_rep_s2, largest.c_str(), largest_s1, elapsed)};
}

Outcome determinism() {
  auto config = fixture_config();
  std::vector<std::string> differing;
  std::vector<fs::path> dirs;
  for (int i = 0; i < 2; ++i) {
    const fs::path dir = scratch_dir("determinism-" + std::to_string(i));
    dirs.push_back(dir);
    config.output_dir = dir / "train";
    drl::cmd_train(config);
    config.output_dir = dir / "score";
    drl::cmd_score(config);
  }
  const char* files[] = {"train/model.json", "train/vocab.json", "score/report.json", "score/scores.csv",
                         "score/timeseries.csv", "score/query_topics.csv"};
  for (const char* f : files) {
    const std::string a = slurp(dirs[0] / f), b = slurp(dirs[1] / f);
    if (a.empty() || a != b) differing.push_back(f);
  }
  std::string detail = "6 files compared";
  for (const auto& d : differing) detail += ", differs: " + d;
  return {differing.empty(), detail};
}

drl::BowDocument scaled(const drl::BowDocument& d, std::uint32_t factor) {
  drl::BowDocument out = d;
  out.total_tokens = 0;
  for (auto& [index, count] : out.counts) {
    count *= factor;
    out.total_tokens += count;
  }
  return out;
}

Outcome scale_invariance() {
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<std::uint32_t> word(0, 49), count(1, 4);
  std::uniform_real_distribution<double> sim(0.05, 1.0);
  double worst_s1 = 0.0, worst_s2 = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    drl::BowDocument q{"query", {}, 0}, qp{"query", {}, 0};
    for (int i = 0; i < 7; ++i) q.counts[word(gen)] += count(gen);
    qp.counts = q.counts;
    qp.counts[word(gen)] += count(gen);
    if (trial % 2) qp.counts.erase(qp.counts.begin());
    if (qp.counts.empty()) qp.counts[0] = 1;
    for (auto& [w, c] : q.counts) q.total_tokens += c;
    for (auto& [w, c] : qp.counts) qp.total_tokens += c;
    if (drl::l2_distance(q, qp) == 0.0) continue;

    const drl::SemanticVector tq{random_dist(8, gen, false)}, tqp{random_dist(8, gen, false)};
    const double s = sim(gen), sp = sim(gen);
    const auto q3 = scaled(q, 3), qp3 = scaled(qp, 3);
    const double s1 = drl::s1_from_projections(tq, tqp, q, qp);
    const double s2 = drl::s2_quotient(s, sp, q, qp);
    worst_s1 = std::max(worst_s1, std::abs(s1 - drl::s1_from_projections(tq, tqp, q3, qp3)));
    worst_s2 = std::max(worst_s2, std::abs(s2 - drl::s2_quotient(s, sp, q3, qp3)));
  }
  return {worst_s1 <= 1e-9 && worst_s2 <= 1e-9,
          fmt("max |s1 - s1(3q)| %.3g, max |s2 - s2(3q)| %.3g over 1000 pairs", worst_s1, worst_s2)};
}

Outcome gibbs_consistency() {
  const auto config = fixture_config();
  const auto corpus = drl::prepare_corpus(config);
  auto lda = config.lda;
  lda.train_iterations = 1000;
  lda.seed = 1;
  int checks = 0, violations = 0;
  drl::train(corpus.preprocessed.docs, corpus.preprocessed.vocab, lda,
             [&](const drl::GibbsSampler& sampler, int sweep) {
               if (sweep % 100 != 0) return;
               ++checks;
               if (!sampler.counts_consistent()) ++violations;
             });
  return {checks == 10 && violations == 0,
          fmt("%d checks over 1000 sweeps, %d violations", checks, violations)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"1 JR divergence matches naive oracle", jr_oracle},
      {"2 analytic values (JR ln2, Renyi ln k, cosine)", analytic_values},
      {"3 disparity nonnegative, zero at equality", nonnegativity},
      {"4 planted sets: relevance A>B>C, disparity A<B", planted_ordering},
      {"5 perturbation sensitivity on planted query", perturbation_sensitivity},
      {"6 train/score outputs byte-identical", determinism},
      {"7 s1 and s2 invariant to scaling query counts", scale_invariance},
      {"8 Gibbs count tables consistent", gibbs_consistency},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  criterion %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
