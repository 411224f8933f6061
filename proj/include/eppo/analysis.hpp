#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eppo/core.hpp"
#include "eppo/evaluators.hpp"

namespace eppo {

/// Base pre-prompt against a family of variants, with exact deltas.
struct StudyReport {
  std::string kind;
  PrePrompt base;
  Score base_score;
  std::vector<PrePrompt> variants;
  std::vector<Score> variant_scores;
  std::vector<Rational> deltas;  // variant - base
  Rational min;
  Rational median;
  Rational max;

  [[nodiscard]] std::string to_json() const;
  /// variant,delta,delta_value rows for box plots.
  [[nodiscard]] std::string deltas_csv() const;
};

/// n_perm uniform reorderings of `pre`, each differing from it.
StudyReport permutation_study(const PrePrompt& pre, Evaluator& evaluator, std::size_t n_perm,
                              Stream& stream, Split split = Split::test);

/// n_samples random order-preserving subsequences of length k_target.
StudyReport removal_study(const PrePrompt& pre, Evaluator& evaluator, std::size_t k_target,
                          std::size_t n_samples, Stream& stream, Split split = Split::test);

enum class FuseStrategy { best_first, best_last, alternate };

std::optional<FuseStrategy> parse_fuse_strategy(std::string_view name);

/// Concatenates two pre-prompts. The higher-scoring one counts as better;
/// on equal scores p1 does.
PrePrompt fuse(const PrePrompt& p1, const PrePrompt& p2, Score score1, Score score2,
               FuseStrategy strategy);

/// Per-path correctness under sampling temperature tau:
/// logistic(logit(acc) / (1 + tau)).
double path_probability(double accuracy, double tau);

/// Majority vote over n_paths sampled answers per question, averaged over
/// the split and `trials` independent votes per question. n_paths must be odd.
double self_consistency(const World& world, const PrePrompt& pre, std::size_t n_paths, double tau,
                        const Stream& stream, Split split = Split::test, std::size_t trials = 1);

/// Test-split evaluation of a saved pre-prompt under another evaluator.
EvalReport transfer_eval(const PrePrompt& pre, Evaluator& evaluator);

}  // namespace eppo
