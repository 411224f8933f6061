#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eppo/core.hpp"
#include "eppo/evaluators.hpp"
#include "eppo/optimizers.hpp"

namespace eppo {

struct CompareOutcome {
  std::size_t winner = 1;  // 1-based
  std::vector<Score> scores;  // for logging; never shown to the optimizer
};

/// Index of a maximal score; ties go to the highest index, so a (1+1)
/// offspring that is not worse replaces the incumbent.
std::size_t pick_winner(const std::vector<Score>& scores);

/// Scores every candidate on the training split, then picks the winner.
CompareOutcome compare(const AskBatch& batch, Evaluator& evaluator);

/// Maximal train score; ties resolved by earliest step, then batch slot.
/// Throws std::invalid_argument on an empty archive.
const ArchiveEntry& recommend(const Archive& archive);

/// b * log2(kappa).
double info_bits(std::size_t budget, std::size_t kappa);

struct StepRecord {
  std::size_t step = 0;
  const AskBatch* batch = nullptr;
  const CompareOutcome* outcome = nullptr;
  /// Winner handed to tell(); differs from outcome->winner only under a
  /// feedback override.
  std::size_t feedback = 1;
};

struct RunOptions {
  /// Replaces the Compare result before it reaches the optimizer. Used to
  /// enumerate feedback sequences.
  std::function<std::size_t(std::size_t step, const CompareOutcome&)> feedback_override;
  std::function<void(const StepRecord&)> on_step;
  /// Re-score distinct archive members before recommending (noisy evaluators).
  bool reevaluate_recommendation = false;
};

struct RunResult {
  std::optional<PrePrompt> recommendation;  // absent only if no step completed
  std::optional<Score> recommendation_train;
  Archive archive;
  std::vector<std::size_t> feedback_trace;
  double bits_used = 0.0;
  std::size_t kappa = 0;
  bool completed = false;
  std::string error;  // evaluator failure message when !completed
};

/// Budget-many ask / archive / compare / tell rounds, then recommend.
/// Evaluator failures stop the loop; the result then holds the archive of
/// completed steps and `completed == false`.
RunResult run(const RunConfig& config, Optimizer& optimizer, Evaluator& evaluator,
              const RunOptions& options = {});

/// Builds the optimizer named in `config` with the "optimizer" stream of its seed.
RunResult run(const RunConfig& config, Evaluator& evaluator, const RunOptions& options = {});

}  // namespace eppo
