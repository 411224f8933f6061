#include <gtest/gtest.h>

#include <functional>
#include <set>

#include "eppo/driver.hpp"
#include "test_support.hpp"

namespace eppo {
namespace {

using test::RecordingOptimizer;
using test::ScriptedEvaluator;

TEST(PickWinner, Examples) {
  EXPECT_EQ(pick_winner({{3, 5}}), 1u);
  EXPECT_EQ(pick_winner({{60, 100}, {70, 100}}), 2u);
  EXPECT_EQ(pick_winner({{60, 100}, {60, 100}}), 2u);
  EXPECT_EQ(pick_winner({{70, 100}, {60, 100}}), 1u);
  EXPECT_EQ(pick_winner({{5, 10}, {5, 10}, {4, 10}}), 2u);
  EXPECT_EQ(pick_winner({{1, 2}, {2, 4}}), 2u);  // equal as fractions
  EXPECT_THROW(pick_winner({}), std::invalid_argument);
}

TEST(Compare, SingleCandidateWins) {
  ScriptedEvaluator ev(10, [](const PrePrompt&) { return Score{1, 4}; });
  auto out = compare({{{{1, 2}}}}, ev);
  EXPECT_EQ(out.winner, 1u);
  ASSERT_EQ(out.scores.size(), 1u);
  EXPECT_EQ(out.scores[0], (Score{1, 4}));
}

TEST(Recommend, Examples) {
  Archive a;
  EXPECT_THROW(recommend(a), std::invalid_argument);
  a.append({1, 0, {{1}}, {5, 10}, true});
  EXPECT_EQ(recommend(a).candidate, PrePrompt{{1}});
  a.append({2, 0, {{2}}, {7, 10}, true});
  EXPECT_EQ(recommend(a).candidate, PrePrompt{{2}});

  Archive ties;
  ties.append({3, 1, {{3}}, {6, 10}, false});
  ties.append({3, 0, {{4}}, {6, 10}, true});
  ties.append({7, 0, {{7}}, {6, 10}, true});
  EXPECT_EQ(recommend(ties).candidate, PrePrompt{{4}});
}

TEST(InfoBits, Examples) {
  EXPECT_DOUBLE_EQ(info_bits(100, 2), 100.0);
  EXPECT_DOUBLE_EQ(info_bits(37, 1), 0.0);
  EXPECT_DOUBLE_EQ(info_bits(10, 4), 20.0);
}

RunConfig config(Algorithm algorithm, std::size_t budget, std::size_t shots = 4,
                 std::size_t cardinality = 50, std::uint64_t seed = 1) {
  RunConfig c;
  c.seed = seed;
  c.budget = budget;
  c.algorithm = algorithm;
  c.space = SearchSpace(shots, cardinality);
  return c;
}

TEST(Run, FeedbackTraceHasBudgetEntries) {
  auto world = test::small_world(3);
  SyntheticEvaluator ev(world);
  auto result = run(config(Algorithm::disc_1p1, 5, 4, world->n_demos()), ev);
  ASSERT_TRUE(result.completed);
  ASSERT_EQ(result.feedback_trace.size(), 5u);
  for (auto w : result.feedback_trace) EXPECT_TRUE(w == 1 || w == 2);
  EXPECT_DOUBLE_EQ(result.bits_used, 5.0);
  EXPECT_EQ(result.kappa, 2u);
}

TEST(Run, OneStepArchivesIncumbentAndMutant) {
  auto world = test::small_world(3);
  SyntheticEvaluator ev(world);
  auto result = run(config(Algorithm::disc_1p1, 1, 4, world->n_demos()), ev);
  ASSERT_EQ(result.archive.size(), 2u);
  EXPECT_EQ(result.archive.entries()[0].position, 0u);
  EXPECT_EQ(result.archive.entries()[1].position, 1u);
}

TEST(Run, RandomSearchCarriesNoInformation) {
  auto world = test::small_world(3);
  SyntheticEvaluator ev(world);
  auto result = run(config(Algorithm::random_search, 20, 4, world->n_demos()), ev);
  EXPECT_EQ(result.archive.size(), 20u);
  EXPECT_DOUBLE_EQ(result.bits_used, 0.0);
  for (auto w : result.feedback_trace) EXPECT_EQ(w, 1u);
}

class RunInvariants : public ::testing::TestWithParam<Algorithm> {};

TEST_P(RunInvariants, OptimizerSeesOnlyWinnerIndices) {
  auto world = test::small_world(4);
  SyntheticEvaluator ev(world);
  auto cfg = config(GetParam(), 40, 6, world->n_demos());
  RecordingOptimizer rec(make_optimizer(cfg.algorithm, cfg.space, derive_stream(cfg.seed, "optimizer")));
  auto result = run(cfg, rec, ev);
  ASSERT_TRUE(result.completed);
  EXPECT_EQ(rec.told.size(), cfg.budget);
  EXPECT_EQ(rec.told, result.feedback_trace);
  for (auto w : rec.told) {
    EXPECT_GE(w, 1u);
    EXPECT_LE(w, rec.kappa());
  }
  // every asked candidate is archived, in order
  ASSERT_EQ(result.archive.size(), rec.asked.size() * rec.kappa());
  std::size_t k = 0;
  for (const auto& batch : rec.asked)
    for (const auto& c : batch.candidates) EXPECT_EQ(result.archive.entries()[k++].candidate, c);
}

TEST_P(RunInvariants, ScoreFreeReplayReproducesRun) {
  // Feeding the recorded winner indices through a fresh optimizer with a
  // constant evaluator reproduces every ask: nothing but the indices matter.
  auto world = test::small_world(5);
  SyntheticEvaluator ev(world);
  auto cfg = config(GetParam(), 30, 5, world->n_demos());
  auto original = run(cfg, ev);
  ScriptedEvaluator flat(world->n_demos(), [](const PrePrompt&) { return Score{0, 1}; });
  RunOptions replay;
  replay.feedback_override = [&](std::size_t step, const CompareOutcome&) {
    return original.feedback_trace[step - 1];
  };
  auto again = run(cfg, flat, replay);
  ASSERT_EQ(again.archive.size(), original.archive.size());
  for (std::size_t i = 0; i < again.archive.size(); ++i)
    EXPECT_EQ(again.archive.entries()[i].candidate, original.archive.entries()[i].candidate);
}

TEST_P(RunInvariants, RecommendationIsArchivedBest) {
  auto world = test::small_world(6);
  SyntheticEvaluator ev(world);
  auto result = run(config(GetParam(), 25, 4, world->n_demos()), ev);
  ASSERT_TRUE(result.recommendation);
  bool found = false;
  for (const auto& e : result.archive.entries()) {
    EXPECT_TRUE(compare_scores(e.train_score, *result.recommendation_train) <= 0);
    found = found || (e.candidate == *result.recommendation && e.train_score == *result.recommendation_train);
  }
  EXPECT_TRUE(found);
  auto replayed = Archive::from_jsonl(result.archive.to_jsonl());
  EXPECT_EQ(recommend(replayed).candidate, *result.recommendation);
}

TEST_P(RunInvariants, ChosenFlagsMatchFeedback) {
  auto world = test::small_world(7);
  SyntheticEvaluator ev(world);
  auto result = run(config(GetParam(), 15, 4, world->n_demos()), ev);
  const auto& entries = result.archive.entries();
  for (std::size_t step = 1; step <= 15; ++step) {
    std::size_t chosen = 0, chosen_pos = 0;
    for (const auto& e : entries)
      if (e.step == step && e.chosen) {
        ++chosen;
        chosen_pos = e.position;
      }
    EXPECT_EQ(chosen, 1u);
    EXPECT_EQ(chosen_pos + 1, result.feedback_trace[step - 1]);
  }
}

TEST_P(RunInvariants, SameConfigSameArchive) {
  auto world = test::small_world(8);
  SyntheticEvaluator ev(world);
  auto cfg = config(GetParam(), 20, 4, world->n_demos(), 99);
  EXPECT_EQ(run(cfg, ev).archive.to_jsonl(), run(cfg, ev).archive.to_jsonl());
}

INSTANTIATE_TEST_SUITE_P(AllAlgorithms, RunInvariants, ::testing::ValuesIn(all_algorithms()),
                         [](const auto& info) { return std::string(algorithm_tag(info.param)); });

TEST(Run, IncumbentTrainScoreNeverDrops) {
  auto world = test::small_world(9);
  SyntheticEvaluator ev(world);
  for (auto alg : all_algorithms()) {
    if (alg == Algorithm::random_search) continue;
    auto result = run(config(alg, 60, 6, world->n_demos()), ev);
    std::optional<Score> last;
    for (const auto& e : result.archive.entries()) {
      if (!e.chosen) continue;
      if (last) EXPECT_TRUE(compare_scores(e.train_score, *last) >= 0) << algorithm_tag(alg);
      last = e.train_score;
    }
  }
}

TEST(Run, ForcedFeedbackReachesAtMostKappaPowB) {
  auto world = test::small_world(10);
  SyntheticEvaluator ev(world);
  for (std::size_t b = 1; b <= 3; ++b) {
    auto cfg = config(Algorithm::disc_1p1, b, 4, world->n_demos(), 5);
    std::set<PrePrompt> recs;
    for (std::size_t seq = 0; seq < (std::size_t{1} << b); ++seq) {
      RunOptions opt;
      opt.feedback_override = [seq](std::size_t step, const CompareOutcome&) {
        return 1 + ((seq >> (step - 1)) & 1);
      };
      recs.insert(*run(cfg, ev, opt).recommendation);
    }
    EXPECT_LE(recs.size(), std::size_t{1} << b);
    EXPECT_GE(recs.size(), 1u);
  }
}

TEST(Run, EvaluatorFailureReturnsPartialArchive) {
  int calls = 0;
  ScriptedEvaluator ev(50, [&](const PrePrompt&) -> Score {
    if (++calls > 6) throw EvaluatorTimeout("deadline passed");
    return {1, 2};
  });
  auto result = run(config(Algorithm::disc_1p1, 10), ev);
  EXPECT_FALSE(result.completed);
  EXPECT_NE(result.error.find("deadline"), std::string::npos);
  EXPECT_EQ(result.feedback_trace.size(), 3u);
  EXPECT_EQ(result.archive.size(), 6u);
  EXPECT_TRUE(result.recommendation);
  EXPECT_DOUBLE_EQ(result.bits_used, 3.0);
}

TEST(Run, RejectsCardinalityMismatch) {
  auto world = test::small_world(11);
  SyntheticEvaluator ev(world);
  EXPECT_THROW(run(config(Algorithm::disc_1p1, 3, 4, world->n_demos() + 1), ev), ConfigError);
}

TEST(Run, ReevaluationUsesFreshScores) {
  // a noisy evaluator: the archive holds stale scores, the re-evaluation
  // path must use what the evaluator says now
  int phase = 0;
  ScriptedEvaluator ev(50, [&](const PrePrompt& p) -> Score {
    return phase == 0 ? Score{p[0], 100} : Score{100 - p[0], 100};
  });
  RunOptions opt;
  opt.on_step = [&](const StepRecord& rec) {
    if (rec.step == 8) phase = 1;
  };
  opt.reevaluate_recommendation = true;
  auto result = run(config(Algorithm::disc_1p1, 8, 1), ev, opt);
  ASSERT_TRUE(result.recommendation);
  std::uint32_t lowest = 100;
  for (const auto& e : result.archive.entries()) lowest = std::min(lowest, e.candidate[0]);
  EXPECT_EQ((*result.recommendation)[0], lowest);
  EXPECT_EQ(result.recommendation_train->correct, 100 - lowest);
}

}  // namespace
}  // namespace eppo
