#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include <json.hpp>

#include "eppo/analysis.hpp"
#include "eppo/channel.hpp"
#include "test_support.hpp"

namespace eppo {
namespace {

using namespace std::chrono_literals;

/// P(more than n/2 of n independent paths are correct), by enumeration.
double majority_oracle(double p, std::size_t n) {
  double total = 0.0;
  for (std::size_t k = n / 2 + 1; k <= n; ++k) {
    double c = 1.0;
    for (std::size_t i = 0; i < k; ++i) c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
    total += c * std::pow(p, static_cast<double>(k)) * std::pow(1.0 - p, static_cast<double>(n - k));
  }
  return total;
}

/// Every question has the same accuracy: zero demo skills, constant base.
World flat_world(double accuracy, std::size_t n_test, std::uint64_t seed = 1) {
  WorldParams p;
  p.n_demos = 10;
  p.n_train = 10;
  p.n_test = n_test;
  p.base_sd = 0.0;
  p.base_mean = std::log(accuracy / (1.0 - accuracy));
  p.skill_sd = 0.0;
  return World(seed, p);
}

bool same_multiset(std::vector<std::uint32_t> a, std::vector<std::uint32_t> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

TEST(Permutation, SyntheticWorldIsOrderInvariant) {
  auto world = test::small_world(2);
  SyntheticEvaluator ev(world);
  PrePrompt base{{3, 1, 4, 15, 9, 26}};
  Stream s(1, "permute");
  auto report = permutation_study(base, ev, 10, s);
  ASSERT_EQ(report.variants.size(), 10u);
  EXPECT_EQ(report.kind, "permute");
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_NE(report.variants[i], base);
    EXPECT_TRUE(same_multiset(report.variants[i].indices, base.indices));
    EXPECT_EQ(report.deltas[i], Rational(0, 1));
  }
  EXPECT_EQ(report.min, Rational(0, 1));
  EXPECT_EQ(report.max, Rational(0, 1));
}

TEST(Permutation, OrderSensitiveBackendDeltasPassThrough) {
  ExternalEvaluator ev(spawn_subprocess({EPPO_FAKE_EVALUATOR, "--mode", "order", "--demos", "20"}),
                       20, 5000ms);
  PrePrompt base{{1, 7, 2, 19}};
  auto weighted = [](const PrePrompt& p) {
    std::int64_t acc = 0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += static_cast<std::int64_t>((i + 1) * p[i]);
    return acc % 101;
  };
  Stream s(2, "permute");
  auto report = permutation_study(base, ev, 10, s);
  ASSERT_EQ(report.deltas.size(), 10u);
  bool any_nonzero = false;
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(report.deltas[i], Rational(weighted(report.variants[i]) - weighted(base), 101));
    any_nonzero = any_nonzero || report.deltas[i] != Rational(0, 1);
  }
  EXPECT_TRUE(any_nonzero);
}

TEST(Permutation, Rejections) {
  auto world = test::small_world(2);
  SyntheticEvaluator ev(world);
  Stream s(3, "permute");
  EXPECT_THROW(permutation_study(PrePrompt{{4}}, ev, 10, s), std::invalid_argument);
  EXPECT_THROW(permutation_study(PrePrompt{{4, 4, 4}}, ev, 10, s), std::invalid_argument);
  // with a duplicate, some reorderings coincide with the base; none may be reported
  auto r = permutation_study(PrePrompt{{4, 4, 5}}, ev, 20, s);
  for (const auto& v : r.variants) EXPECT_NE(v, (PrePrompt{{4, 4, 5}}));
}

TEST(Removal, DropsOnePosition) {
  auto world = test::small_world(3);
  SyntheticEvaluator ev(world);
  PrePrompt base{{10, 20, 5, 7}};
  std::set<PrePrompt> allowed{PrePrompt{{20, 5, 7}}, PrePrompt{{10, 5, 7}}, PrePrompt{{10, 20, 7}},
                              PrePrompt{{10, 20, 5}}};
  Stream s(4, "remove");
  auto report = removal_study(base, ev, 3, 40, s);
  ASSERT_EQ(report.variants.size(), 40u);
  std::set<PrePrompt> seen;
  for (std::size_t i = 0; i < report.variants.size(); ++i) {
    EXPECT_TRUE(allowed.contains(report.variants[i]));
    seen.insert(report.variants[i]);
    EXPECT_EQ(report.deltas[i], Rational::of(world->eval_test(report.variants[i]).score()) -
                                    Rational::of(world->eval_test(base).score()));
  }
  EXPECT_EQ(seen.size(), 4u);
}

TEST(Removal, PairToSingletons) {
  auto world = test::small_world(3);
  SyntheticEvaluator ev(world);
  Stream s(5, "remove");
  auto report = removal_study(PrePrompt{{8, 9}}, ev, 1, 10, s);
  ASSERT_EQ(report.variants.size(), 10u);
  for (const auto& v : report.variants) EXPECT_TRUE(v == PrePrompt{{8}} || v == PrePrompt{{9}});
}

TEST(Removal, Rejections) {
  auto world = test::small_world(3);
  SyntheticEvaluator ev(world);
  Stream s(6, "remove");
  EXPECT_THROW(removal_study(PrePrompt{{1, 2, 3}}, ev, 3, 5, s), std::invalid_argument);
  EXPECT_THROW(removal_study(PrePrompt{{1, 2, 3}}, ev, 0, 5, s), std::invalid_argument);
}

TEST(Removal, UniformOverSubsequences) {
  auto world = test::small_world(3);
  SyntheticEvaluator ev(world);
  Stream s(7, "remove");
  auto report = removal_study(PrePrompt{{0, 1, 2, 3, 4}}, ev, 2, 5000, s);
  std::map<PrePrompt, int> hits;
  for (const auto& v : report.variants) {
    ASSERT_EQ(v.size(), 2u);
    EXPECT_LT(v[0], v[1]);  // order preserved
    ++hits[v];
  }
  ASSERT_EQ(hits.size(), 10u);
  for (const auto& [v, h] : hits) EXPECT_NEAR(h / 5000.0, 0.1, 4 * std::sqrt(0.09 / 5000));
}

TEST(StudyReport, JsonAndCsv) {
  auto world = test::small_world(4);
  SyntheticEvaluator ev(world);
  Stream s(8, "remove");
  auto report = removal_study(PrePrompt{{1, 2, 3, 4}}, ev, 2, 6, s);
  auto j = nlohmann::json::parse(report.to_json());
  EXPECT_EQ(j["schema"], "eppo.study/1");
  EXPECT_EQ(j["kind"], "remove");
  EXPECT_EQ(j["variants"].size(), 6u);
  EXPECT_TRUE(j["summary"].contains("median"));
  auto csv = report.deltas_csv();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_EQ(csv.rfind("kind,variant,delta,delta_value\n", 0), 0u);
}

TEST(Fuse, Examples) {
  PrePrompt a{{1, 2}}, b{{3, 4}};
  Score hi{7, 10}, lo{5, 10};
  EXPECT_EQ(fuse(a, b, hi, lo, FuseStrategy::best_first), (PrePrompt{{1, 2, 3, 4}}));
  EXPECT_EQ(fuse(a, b, hi, lo, FuseStrategy::alternate), (PrePrompt{{1, 3, 2, 4}}));
  EXPECT_EQ(fuse(a, b, hi, lo, FuseStrategy::best_last), (PrePrompt{{3, 4, 1, 2}}));
  EXPECT_EQ(fuse(a, b, lo, hi, FuseStrategy::best_first), (PrePrompt{{3, 4, 1, 2}}));
  // ties favour the first argument; 1/2 and 2/4 are the same score
  EXPECT_EQ(fuse(a, b, Score{1, 2}, Score{2, 4}, FuseStrategy::best_first), (PrePrompt{{1, 2, 3, 4}}));
  EXPECT_EQ(fuse(PrePrompt{{1, 2, 3}}, PrePrompt{{9}}, lo, hi, FuseStrategy::alternate),
            (PrePrompt{{9, 1, 2, 3}}));
  EXPECT_EQ(fuse(PrePrompt{{1, 2, 3}}, PrePrompt{{9}}, hi, lo, FuseStrategy::alternate),
            (PrePrompt{{1, 9, 2, 3}}));
}

TEST(Fuse, StrategyNames) {
  EXPECT_EQ(parse_fuse_strategy("best_first"), FuseStrategy::best_first);
  EXPECT_EQ(parse_fuse_strategy("best_last"), FuseStrategy::best_last);
  EXPECT_EQ(parse_fuse_strategy("alternate"), FuseStrategy::alternate);
  EXPECT_FALSE(parse_fuse_strategy("interleave"));
}

TEST(Fuse, PreservesMultisetAndLength) {
  Stream s(9, "fuse");
  for (int trial = 0; trial < 1000; ++trial) {
    PrePrompt a, b;
    auto na = 1 + s.below(8), nb = 1 + s.below(8);
    for (std::size_t i = 0; i < na; ++i) a.indices.push_back(static_cast<std::uint32_t>(s.below(6)));
    for (std::size_t i = 0; i < nb; ++i) b.indices.push_back(static_cast<std::uint32_t>(s.below(6)));
    Score sa{static_cast<std::uint32_t>(s.below(4)), 3}, sb{static_cast<std::uint32_t>(s.below(4)), 3};
    auto all = a.indices;
    all.insert(all.end(), b.indices.begin(), b.indices.end());
    for (auto strategy : {FuseStrategy::best_first, FuseStrategy::best_last, FuseStrategy::alternate}) {
      auto f = fuse(a, b, sa, sb, strategy);
      ASSERT_EQ(f.size(), na + nb);
      ASSERT_TRUE(same_multiset(f.indices, all));
    }
  }
}

TEST(PathProbability, TemperatureFlattens) {
  EXPECT_DOUBLE_EQ(path_probability(0.7, 0.0), 0.7);
  EXPECT_DOUBLE_EQ(path_probability(1.0, 3.0), 1.0);
  EXPECT_DOUBLE_EQ(path_probability(0.0, 3.0), 0.0);
  EXPECT_NEAR(path_probability(0.5, 2.0), 0.5, 1e-15);
  // logit halves at tau = 1
  double p = path_probability(0.8, 1.0);
  EXPECT_NEAR(std::log(p / (1 - p)), 0.5 * std::log(4.0), 1e-12);
  EXPECT_THROW(path_probability(0.5, -1.0), std::invalid_argument);
}

TEST(SelfConsistency, SinglePathAtZeroTemperatureIsPlainEvaluation) {
  auto world = test::small_world(11);
  PrePrompt pre{{2, 4, 6}};
  Stream s(10, "sc");
  for (auto split : {Split::train, Split::test}) {
    auto r = world->eval(pre, split);
    EXPECT_DOUBLE_EQ(self_consistency(*world, pre, 1, 0.0, s, split),
                     static_cast<double>(r.correct) / r.total);
  }
}

TEST(SelfConsistency, CertainQuestionsStayCorrect) {
  auto world = flat_world(1.0 - 1e-17, 100);  // accuracy rounds to 1
  Stream s(11, "sc");
  for (std::size_t n : {1, 3, 7}) EXPECT_DOUBLE_EQ(self_consistency(world, PrePrompt{{1, 2}}, n, 0.5, s), 1.0);
}

TEST(SelfConsistency, Rejections) {
  auto world = test::small_world(12);
  Stream s(12, "sc");
  EXPECT_THROW(self_consistency(*world, PrePrompt{{1}}, 4, 0.0, s), std::invalid_argument);
  EXPECT_THROW(self_consistency(*world, PrePrompt{{1}}, 0, 0.0, s), std::invalid_argument);
  EXPECT_THROW(self_consistency(*world, PrePrompt{{1}}, 3, -0.1, s), std::invalid_argument);
}

TEST(SelfConsistency, Deterministic) {
  auto world = test::small_world(13);
  Stream a(14, "sc"), b(14, "sc"), c(15, "sc");
  double x = self_consistency(*world, PrePrompt{{1, 5}}, 5, 0.4, a);
  EXPECT_EQ(x, self_consistency(*world, PrePrompt{{1, 5}}, 5, 0.4, b));
  EXPECT_NE(x, self_consistency(*world, PrePrompt{{1, 5}}, 5, 0.4, c));
}

TEST(SelfConsistency, MatchesBinomialMajority) {
  // 200000 questions x 5 votes: 10^6 majority draws at per-path 0.6
  auto world = flat_world(0.6, 200000);
  Stream s(16, "sc");
  EXPECT_NEAR(majority_oracle(0.6, 5), 0.68256, 1e-12);
  EXPECT_NEAR(self_consistency(world, PrePrompt{{0, 1}}, 5, 0.0, s, Split::test, 5), 0.68256, 0.002);
}

TEST(SelfConsistency, NonDecreasingInPathsAboveOneHalf) {
  auto world = flat_world(0.65, 20000);
  const double p = path_probability(0.65, 0.3);
  double prev_oracle = 0.0;
  for (std::size_t n = 1; n <= 21; n += 2) {
    double oracle = majority_oracle(p, n);
    EXPECT_GE(oracle, prev_oracle);
    prev_oracle = oracle;
    Stream s(17 + n, "sc");
    double sc = self_consistency(world, PrePrompt{{3, 4}}, n, 0.3, s);
    EXPECT_NEAR(sc, oracle, 4 * std::sqrt(oracle * (1 - oracle) / 20000) + 1e-9) << n;
  }
}

TEST(SelfConsistency, MajorityBeatsSinglePathAwayFromOneHalf) {
  for (double acc : {0.7, 0.8, 0.9}) {
    auto world = flat_world(acc, 5000, 3);
    Stream s(40, "sc");
    double single = self_consistency(world, PrePrompt{{1, 2}}, 1, 0.0, s);
    double vote = self_consistency(world, PrePrompt{{1, 2}}, 7, 0.0, s);
    EXPECT_GT(vote, single) << acc;
  }
  // below one half the vote amplifies the error instead
  auto world = flat_world(0.3, 5000, 3);
  Stream s(41, "sc");
  EXPECT_LT(self_consistency(world, PrePrompt{{1, 2}}, 7, 0.0, s),
            self_consistency(world, PrePrompt{{1, 2}}, 1, 0.0, s));
}

TEST(Transfer, SameWorldIsTestEvaluation) {
  auto world = test::small_world(20);
  SyntheticEvaluator ev(world);
  PrePrompt pre{{1, 2, 3}};
  EXPECT_EQ(transfer_eval(pre, ev), world->eval_test(pre));
}

TEST(Transfer, IndependentWorldAndRangeCheck) {
  auto other = std::make_shared<World>(make_world(77, 30, 50, 80, 3, 0.1));
  SyntheticEvaluator ev(other);
  auto r = transfer_eval(PrePrompt{{0, 29, 5}}, ev);
  EXPECT_EQ(r.total, 80u);
  EXPECT_LE(r.correct, r.total);
  auto small = std::make_shared<World>(make_world(78, 10, 50, 80, 3, 0.1));
  SyntheticEvaluator small_ev(small);
  EXPECT_THROW(transfer_eval(PrePrompt{{0, 29, 5}}, small_ev), std::invalid_argument);
}

}  // namespace
}  // namespace eppo
