#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "drl/corpus.hpp"
#include "drl/lda.hpp"
#include "drl/sensitivity.hpp"
#include "drl/synthetic.hpp"
#include "test_util.hpp"

namespace {

using drl::testing::kind_of;

const std::vector<std::string> kQuery{"usa", "basketball", "team", "win", "world", "cup", "spain"};

drl::Perturbation make(drl::PerturbationKind kind, std::vector<std::string> terms,
                       std::vector<std::string> replacement = {}) {
  drl::Perturbation p;
  p.label = "p";
  p.kind = kind;
  p.terms = std::move(terms);
  p.replacement = std::move(replacement);
  return p;
}

std::string joined(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) out += (out.empty() ? "" : " ") + t;
  return out;
}

TEST(PerturbQuery, RepetitionReplacementDeletion) {
  using K = drl::PerturbationKind;
  EXPECT_EQ(joined(drl::perturb_query(kQuery, make(K::kRepetition, {"usa"}))),
            "usa usa basketball team win world cup spain");
  EXPECT_EQ(joined(drl::perturb_query(kQuery, make(K::kReplacement, {"world", "cup"}, {"fiba"}))),
            "usa basketball team win fiba spain");
  EXPECT_EQ(joined(drl::perturb_query(kQuery, make(K::kDeletion, {"basketball"}))),
            "usa team win world cup spain");
  EXPECT_EQ(joined(drl::perturb_query(kQuery, make(K::kDeletion, {"world", "cup"}))),
            "usa basketball team win spain");

  auto by_position = make(K::kRepetition, {});
  by_position.position = 6;
  EXPECT_EQ(drl::perturb_query(kQuery, by_position).back(), "spain");
  EXPECT_EQ(drl::perturb_query(kQuery, by_position).size(), 8u);
}

TEST(PerturbQuery, Errors) {
  using K = drl::PerturbationKind;
  EXPECT_EQ(kind_of([] { drl::perturb_query(kQuery, make(K::kDeletion, {"fiba"})); }),
            drl::ErrorKind::kInvalidArgument);
  auto out_of_range = make(K::kDeletion, {});
  out_of_range.position = 7;
  EXPECT_EQ(kind_of([&] { drl::perturb_query(kQuery, out_of_range); }), drl::ErrorKind::kInvalidArgument);
  auto mismatch = make(K::kDeletion, {"team"});
  mismatch.position = 0;
  EXPECT_EQ(kind_of([&] { drl::perturb_query(kQuery, mismatch); }), drl::ErrorKind::kInvalidArgument);
  const std::vector<std::string> single{"usa"};
  EXPECT_EQ(kind_of([&] { drl::perturb_query(single, make(K::kDeletion, {"usa"})); }),
            drl::ErrorKind::kInvalidArgument);
}

TEST(PerturbationSpec, ParsesEveryFormAndKeepsBadRows) {
  const auto entries = drl::parse_perturbation_spec(R"([
    {"label": "r", "kind": "repetition", "position_or_term": 2},
    {"label": "s", "kind": "replacement", "position_or_term": "world cup -> fiba"},
    {"label": "o", "kind": "replacement", "position_or_term": {"from": ["spain"], "to": "spain2014"}},
    {"label": "d", "kind": "deletion", "position_or_term": "basketball"},
    {"label": "bad", "kind": "shuffle", "position_or_term": 1},
    {"kind": "replacement", "position_or_term": "spain"}
  ])");
  ASSERT_EQ(entries.size(), 6u);
  EXPECT_EQ(*entries[0].perturbation->position, 2u);
  EXPECT_EQ(entries[1].perturbation->terms, (std::vector<std::string>{"world", "cup"}));
  EXPECT_EQ(entries[1].perturbation->replacement, std::vector<std::string>{"fiba"});
  EXPECT_EQ(entries[2].perturbation->replacement, std::vector<std::string>{"spain2014"});
  EXPECT_EQ(entries[3].perturbation->kind, drl::PerturbationKind::kDeletion);
  EXPECT_FALSE(entries[4].perturbation.has_value());
  EXPECT_NE(entries[4].error.find("shuffle"), std::string::npos);
  EXPECT_EQ(entries[5].label, "p6");
  EXPECT_FALSE(entries[5].perturbation.has_value());
  EXPECT_EQ(kind_of([] { drl::parse_perturbation_spec("{}"); }), drl::ErrorKind::kParse);
}

TEST(Quotients, WorkedValues) {
  // |q| = sqrt(7); one repeated token gives |q - qp| = 1.
  const drl::BowDocument q{"q", {{0, 1}, {1, 1}, {2, 1}, {3, 1}, {4, 1}, {5, 1}, {6, 1}}, 7};
  drl::BowDocument qp = q;
  ++qp.counts[1];
  ++qp.total_tokens;
  EXPECT_DOUBLE_EQ(drl::l2_norm(q), std::sqrt(7.0));
  EXPECT_DOUBLE_EQ(drl::l2_distance(q, qp), 1.0);
  EXPECT_NEAR(drl::s2_quotient(0.5, 0.45, q, qp), 0.05 * std::sqrt(7.0) / 0.5, 1e-15);
  EXPECT_NEAR(drl::s2_quotient(0.5, 0.45, q, qp), 0.2645751311, 1e-9);

  const drl::SemanticVector tq{{0.6, 0.8}}, tqp{{0.8, 0.6}};
  // |tq - tqp| = sqrt(0.08), |tq| = 1.
  EXPECT_NEAR(drl::s1_from_projections(tq, tqp, q, qp), std::sqrt(0.08) * std::sqrt(7.0), 1e-15);

  EXPECT_EQ(kind_of([&] { drl::s2_quotient(0.5, 0.4, q, q); }), drl::ErrorKind::kInvalidArgument);
  EXPECT_EQ(kind_of([&] { drl::s2_quotient(0.0, 0.4, q, qp); }), drl::ErrorKind::kMetric);
}

class FixtureModel : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    drl::synthetic::DrlFixtureSpec spec;
    spec.docs_per_set = 60;
    fixture_ = new drl::synthetic::DrlFixture(drl::synthetic::make_drl_fixture(spec));
    auto config = drl::default_preprocess_config();
    config.min_doc_freq = 2;
    prep_ = new drl::PreprocessResult(drl::preprocess(fixture_->docs, config));
    sets_ = new std::vector<drl::DocumentSet>(drl::partition(prep_->docs, fixture_->docs));
    drl::LdaConfig lda;
    lda.num_topics = 5;
    lda.alpha = 0.3;
    lda.train_iterations = 100;
    lda.seed = 3;
    model_ = new drl::TopicModel(drl::train(prep_->docs, prep_->vocab, lda));
  }
  static void TearDownTestSuite() {
    delete model_;
    delete sets_;
    delete prep_;
    delete fixture_;
  }

  static drl::synthetic::DrlFixture* fixture_;
  static drl::PreprocessResult* prep_;
  static std::vector<drl::DocumentSet>* sets_;
  static drl::TopicModel* model_;
};

drl::synthetic::DrlFixture* FixtureModel::fixture_ = nullptr;
drl::PreprocessResult* FixtureModel::prep_ = nullptr;
std::vector<drl::DocumentSet>* FixtureModel::sets_ = nullptr;
drl::TopicModel* FixtureModel::model_ = nullptr;

TEST_F(FixtureModel, ReportIsDeterministicAndRecordsFailures) {
  const auto entries = drl::parse_perturbation_spec(drl::synthetic::fixture_perturbations_json());
  std::vector<drl::Perturbation> perts;
  for (const auto& e : entries) perts.push_back(*e.perturbation);
  drl::Perturbation missing = make(drl::PerturbationKind::kDeletion, {"hockey"});
  missing.label = "missing";
  perts.push_back(missing);

  const auto a = drl::sensitivity_report(*model_, kQuery, perts, *sets_, 3, 42);
  const auto b = drl::sensitivity_report(*model_, kQuery, perts, *sets_, 3, 42);
  ASSERT_EQ(a.size(), perts.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].label, perts[i].label);
    EXPECT_EQ(a[i].s1_runs, b[i].s1_runs);
    EXPECT_EQ(a[i].s2_runs, b[i].s2_runs);
  }
  EXPECT_FALSE(a.back().ok());
  for (std::size_t i = 0; i + 1 < a.size(); ++i) {
    ASSERT_TRUE(a[i].ok()) << a[i].label << ": " << *a[i].error;
    EXPECT_EQ(a[i].s1_runs.size(), 3u);
    EXPECT_EQ(a[i].s2_runs.size(), 3u);
    EXPECT_GE(a[i].s1, 0.0);
  }
  // The out-of-vocabulary replacement collapses to deleting "spain".
  const auto& b3 = a[9];
  const auto& c3 = a[12];
  EXPECT_EQ(b3.oov_terms, std::vector<std::string>{"spain2014"});
  EXPECT_EQ(b3.s1_runs, c3.s1_runs);
}

TEST_F(FixtureModel, CombineConcatenatesRuns) {
  std::vector<drl::Perturbation> perts{make(drl::PerturbationKind::kRepetition, {"usa"})};
  std::vector<std::vector<drl::SensitivityResult>> parts;
  for (std::uint64_t seed : {1u, 2u}) {
    parts.push_back(drl::sensitivity_report(*model_, kQuery, perts, *sets_, 1, seed));
  }
  const auto combined = drl::combine_reports(parts);
  ASSERT_EQ(combined.size(), 1u);
  ASSERT_EQ(combined[0].s1_runs.size(), 2u);
  EXPECT_EQ(combined[0].s1_runs[0], parts[0][0].s1_runs[0]);
  EXPECT_EQ(combined[0].s1_runs[1], parts[1][0].s1_runs[0]);
  EXPECT_NEAR(combined[0].s1, (parts[0][0].s1 + parts[1][0].s1) / 2.0, 1e-15);
}

TEST_F(FixtureModel, MatchedSeedsGiveZeroChangeForIdenticalProjection) {
  const auto q = drl::bow_from_tokens("query", kQuery, prep_->vocab);
  ASSERT_FALSE(q.empty());
  const auto seed = drl::projection_seed(drl::run_seed(9, 0), "query");
  EXPECT_EQ(drl::project(*model_, q, seed).theta, drl::project(*model_, q, seed).theta);
  EXPECT_EQ(drl::projection_seed(5, "a"), drl::projection_seed(5, "a"));
  EXPECT_NE(drl::projection_seed(5, "a"), drl::projection_seed(5, "b"));
}

}  // namespace
