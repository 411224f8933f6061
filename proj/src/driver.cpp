#include "eppo/driver.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace eppo {

std::size_t pick_winner(const std::vector<Score>& scores) {
  if (scores.empty()) throw std::invalid_argument("compare needs at least one candidate");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (compare_scores(scores[i], scores[best]) >= 0) best = i;
  return best + 1;
}

CompareOutcome compare(const AskBatch& batch, Evaluator& evaluator) {
  auto reports = evaluator.evaluate_many(batch.candidates, Split::train);
  CompareOutcome outcome;
  outcome.scores.reserve(reports.size());
  for (const auto& r : reports) outcome.scores.push_back(r.score());
  outcome.winner = pick_winner(outcome.scores);
  return outcome;
}

const ArchiveEntry& recommend(const Archive& archive) {
  if (archive.empty()) throw std::invalid_argument("cannot recommend from an empty archive");
  const auto& entries = archive.entries();
  const ArchiveEntry* best = &entries.front();
  for (const auto& e : entries) {
    auto order = compare_scores(e.train_score, best->train_score);
    if (order > 0) {
      best = &e;
    } else if (order == 0 && (e.step < best->step ||
                              (e.step == best->step && e.position < best->position))) {
      best = &e;
    }
  }
  return *best;
}

double info_bits(std::size_t budget, std::size_t kappa) {
  if (budget < 1 || kappa < 1) throw std::invalid_argument("info_bits needs b >= 1 and kappa >= 1");
  return static_cast<double>(budget) * std::log2(static_cast<double>(kappa));
}

namespace {

std::pair<PrePrompt, Score> reevaluated_best(const Archive& archive, Evaluator& evaluator) {
  std::map<PrePrompt, Score> fresh;
  std::optional<std::pair<PrePrompt, Score>> best;
  for (const auto& e : archive.entries()) {
    if (fresh.contains(e.candidate)) continue;
    auto s = evaluator.evaluate(e.candidate, Split::train).score();
    fresh.emplace(e.candidate, s);
    if (!best || compare_scores(s, best->second) > 0) best = {e.candidate, s};
  }
  return *best;
}

}  // namespace

RunResult run(const RunConfig& config, Optimizer& optimizer, Evaluator& evaluator,
              const RunOptions& options) {
  config.check();
  if (optimizer.space().cardinality != evaluator.cardinality())
    throw ConfigError("optimizer cardinality " + std::to_string(optimizer.space().cardinality) +
                      " does not match evaluator cardinality " +
                      std::to_string(evaluator.cardinality()));

  RunResult result;
  result.kappa = optimizer.kappa();
  const auto kappa = optimizer.kappa();

  try {
    for (std::size_t step = 1; step <= config.budget; ++step) {
      AskBatch batch = optimizer.ask();
      if (batch.size() != kappa) throw std::logic_error("optimizer returned a batch of wrong size");

      CompareOutcome outcome = compare(batch, evaluator);

      std::size_t feedback = outcome.winner;
      if (options.feedback_override) {
        feedback = options.feedback_override(step, outcome);
        if (feedback < 1 || feedback > kappa)
          throw std::out_of_range("feedback override outside [1, kappa]");
      }

      for (std::size_t i = 0; i < batch.size(); ++i)
        result.archive.append({step, i, batch[i], outcome.scores[i], i + 1 == feedback});

      if (options.on_step) options.on_step({step, &batch, &outcome, feedback});

      optimizer.tell(feedback, batch);
      result.feedback_trace.push_back(feedback);
    }
    result.completed = true;
  } catch (const EvaluatorError& e) {
    result.error = e.what();
  } catch (const ChannelClosed& e) {
    result.error = e.what();
  }

  result.bits_used =
      result.feedback_trace.empty() ? 0.0 : info_bits(result.feedback_trace.size(), kappa);

  if (!result.archive.empty()) {
    if (options.reevaluate_recommendation && result.completed) {
      auto [pre, score] = reevaluated_best(result.archive, evaluator);
      result.recommendation = std::move(pre);
      result.recommendation_train = score;
    } else {
      const auto& best = recommend(result.archive);
      result.recommendation = best.candidate;
      result.recommendation_train = best.train_score;
    }
  }
  return result;
}

RunResult run(const RunConfig& config, Evaluator& evaluator, const RunOptions& options) {
  config.check();
  auto optimizer = make_optimizer(config.algorithm, config.space,
                                  derive_stream(config.seed, "optimizer"), config.warm_start);
  return run(config, *optimizer, evaluator, options);
}

}  // namespace eppo
