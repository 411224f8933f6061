#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eppo/channel.hpp"
#include "eppo/core.hpp"

namespace eppo {

enum class Split { train, test };

std::string_view split_name(Split split);

struct EvalReport {
  std::uint32_t correct = 0;
  std::uint32_t total = 0;
  std::vector<std::uint8_t> per_question;  // optional; empty when not reported

  [[nodiscard]] Score score() const { return {correct, total}; }
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

class EvaluatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class EvaluatorTimeout : public EvaluatorError {
 public:
  using EvaluatorError::EvaluatorError;
};
class MalformedResponse : public EvaluatorError {
 public:
  using EvaluatorError::EvaluatorError;
};
class ScoreOutOfRange : public EvaluatorError {
 public:
  using EvaluatorError::EvaluatorError;
};

/// Scores a pre-prompt on a split. Implementations must tolerate concurrent
/// calls.
class Evaluator {
 public:
  virtual ~Evaluator() = default;

  /// Size of the demonstration set this evaluator indexes into.
  [[nodiscard]] virtual std::size_t cardinality() const = 0;
  virtual EvalReport evaluate(const PrePrompt& pre, Split split) = 0;
  /// Results in input order. The default evaluates one at a time.
  virtual std::vector<EvalReport> evaluate_many(std::span<const PrePrompt> pres, Split split);
};

// ---------------------------------------------------------------------------
// Synthetic world

/// Question j: base ability b_j, need vector q_j >= 0 (rank r), threshold u_j.
/// Demo i: skill vector z_i. A pre-prompt P answers j correctly iff
///   u_j < logistic(b_j + sum_{i in set(P)} z_i . q_j - gamma * duplicates(P)).
struct WorldParams {
  std::size_t n_demos = 100;
  std::size_t n_train = 800;
  std::size_t n_test = 2000;
  std::size_t rank = 4;
  double gamma = 0.1;
  double base_mean = 0.0;
  double base_sd = 1.0;
  double skill_mean = 0.0;
  double skill_sd = 0.05;
  double need_scale = 1.0;  // q_jk = need_scale * |N(0,1)|
  std::uint64_t partition = 0;  // which block of question ids forms train/test

  void check() const;
};

class World {
 public:
  World(std::uint64_t seed, WorldParams params);
  /// Explicit demo skills (n_demos rows of rank values).
  World(std::uint64_t seed, WorldParams params, std::vector<std::vector<double>> skills);

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] const WorldParams& params() const { return params_; }
  [[nodiscard]] std::size_t n_demos() const { return params_.n_demos; }
  [[nodiscard]] SearchSpace space(std::size_t shots) const { return {shots, params_.n_demos}; }

  /// Same demos and question law, a disjoint block of question ids.
  [[nodiscard]] World repartitioned(std::uint64_t partition) const;

  [[nodiscard]] std::uint64_t first_train_id() const;
  [[nodiscard]] std::uint64_t first_test_id() const;
  static constexpr std::uint64_t kFreshIdBase = std::uint64_t{1} << 48;

  [[nodiscard]] double accuracy(const PrePrompt& pre, std::uint64_t question_id) const;
  [[nodiscard]] std::vector<double> accuracies(const PrePrompt& pre, Split split) const;
  /// Per-question thresholds u_j of a split.
  [[nodiscard]] std::span<const double> thresholds(Split split) const;

  [[nodiscard]] EvalReport eval_train(const PrePrompt& pre) const;
  [[nodiscard]] EvalReport eval_test(const PrePrompt& pre) const;
  [[nodiscard]] EvalReport eval(const PrePrompt& pre, Split split) const;
  /// Mean accuracy over m fresh questions (ids above every partition), i.e.
  /// a Monte Carlo estimate of the expected exact match. Distinct `batch`
  /// values use disjoint question ids.
  [[nodiscard]] double eval_true(const PrePrompt& pre, std::size_t m, std::uint64_t batch = 0) const;

  [[nodiscard]] std::span<const double> skill(std::size_t demo) const;

 private:
  struct Questions {
    std::vector<double> base;
    std::vector<double> threshold;
    std::vector<double> need;  // row-major, rank per question
  };

  void build_questions();
  void fill_question(std::uint64_t id, double& base, double& threshold, double* need) const;
  [[nodiscard]] std::vector<double> summed_skill(const PrePrompt& pre, double& penalty) const;
  [[nodiscard]] EvalReport eval_block(const PrePrompt& pre, const Questions& qs) const;
  void check_preprompt(const PrePrompt& pre) const;

  std::uint64_t seed_;
  WorldParams params_;
  std::vector<double> skills_;  // row-major, n_demos x rank
  Questions train_;
  Questions test_;
};

World make_world(std::uint64_t seed, std::size_t n_demos, std::size_t n_train, std::size_t n_test,
                 std::size_t rank, double gamma);

class SyntheticEvaluator final : public Evaluator {
 public:
  explicit SyntheticEvaluator(std::shared_ptr<const World> world) : world_(std::move(world)) {}

  std::size_t cardinality() const override { return world_->n_demos(); }
  EvalReport evaluate(const PrePrompt& pre, Split split) override { return world_->eval(pre, split); }

  [[nodiscard]] const World& world() const { return *world_; }

 private:
  std::shared_ptr<const World> world_;
};

// ---------------------------------------------------------------------------
// Memoization

/// Keys on the ordered index tuple and split. Each key reaches the inner
/// evaluator at most once, even under concurrent lookups.
class CachedEvaluator final : public Evaluator {
 public:
  explicit CachedEvaluator(std::shared_ptr<Evaluator> inner) : inner_(std::move(inner)) {}

  std::size_t cardinality() const override { return inner_->cardinality(); }
  EvalReport evaluate(const PrePrompt& pre, Split split) override;
  std::vector<EvalReport> evaluate_many(std::span<const PrePrompt> pres, Split split) override;

  [[nodiscard]] std::size_t inner_calls() const;
  [[nodiscard]] std::size_t size() const;

 private:
  struct Slot;
  using Key = std::pair<std::vector<DemoIndex>, Split>;

  std::shared_ptr<Evaluator> inner_;
  mutable std::mutex mutex_;
  std::map<Key, std::shared_ptr<Slot>> slots_;
  std::size_t inner_calls_ = 0;
};

// ---------------------------------------------------------------------------
// External evaluator over newline-delimited JSON

std::string encode_request(std::uint64_t id, const PrePrompt& pre, Split split);

struct DecodedResponse {
  std::uint64_t id;
  EvalReport report;
};

/// Throws MalformedResponse or ScoreOutOfRange.
DecodedResponse decode_response(std::string_view line);

class ExternalEvaluator final : public Evaluator {
 public:
  ExternalEvaluator(std::unique_ptr<LineChannel> channel, std::size_t cardinality,
                    std::chrono::milliseconds timeout);

  std::size_t cardinality() const override { return cardinality_; }
  EvalReport evaluate(const PrePrompt& pre, Split split) override;
  /// Sends every request before reading; responses may come back in any order.
  std::vector<EvalReport> evaluate_many(std::span<const PrePrompt> pres, Split split) override;

 private:
  std::unique_ptr<LineChannel> channel_;
  std::size_t cardinality_;
  std::chrono::milliseconds timeout_;
  std::mutex mutex_;
  std::uint64_t next_id_ = 1;
};

}  // namespace eppo
