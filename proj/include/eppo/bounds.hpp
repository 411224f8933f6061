#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "eppo/core.hpp"
#include "eppo/evaluators.hpp"

namespace eppo {

/// 2 exp(-2 T eps^2): chance that a fixed pre-prompt's mean over T
/// independent [0,1] scores deviates from its expectation by more than eps.
double hoeffding_delta(std::size_t T, double eps);

/// Union bound over m items, unclamped.
double bonferroni(double m, double delta);

/// kappa^b * delta, unclamped; +inf once it leaves double range.
double eppo_bound(std::size_t kappa, std::size_t budget, double delta);
/// ln(kappa^b * delta); -inf when delta == 0.
double log_eppo_bound(std::size_t kappa, std::size_t budget, double delta);

/// b * delta: random search can only return one of its b draws.
double rs_bound(std::size_t budget, double delta);

/// kappa^(b+1) * delta: uniform over every archived candidate.
double archive_bound(std::size_t kappa, std::size_t budget, double delta);

/// sqrt(-ln(kappa^-b delta / 2) / (2T)): the deviation achievable with
/// confidence delta for the recommendation. Throws std::domain_error when
/// the logarithm's argument exceeds 1.
double epsilon_bound(std::size_t kappa, std::size_t budget, double delta, std::size_t T);

struct ClampedProbability {
  double raw = 0.0;
  double clamped = 0.0;
  [[nodiscard]] bool vacuous() const { return raw >= 1.0; }
};

ClampedProbability clamp_probability(double raw);

struct BoundReport {
  std::size_t kappa = 2;
  std::size_t budget = 1;
  std::size_t T = 1;
  double eps = 0.0;
  double delta_target = 0.05;  // confidence used for eps_bound

  ClampedProbability delta_single;
  ClampedProbability delta_eppo;
  ClampedProbability delta_rs;
  ClampedProbability delta_unif_archive;
  std::optional<double> eps_bound;  // absent when undefined

  [[nodiscard]] std::string to_json() const;
  [[nodiscard]] std::string to_table() const;
};

BoundReport make_bound_report(std::size_t kappa, std::size_t budget, std::size_t T, double eps,
                              double delta_target = 0.05);

/// Deviation frequency of one fixed pre-prompt over independently drawn
/// training sets of size world.params().n_train.
struct HoeffdingCheck {
  std::size_t replicates = 0;
  std::size_t violations = 0;
  double rate = 0.0;
  double mc_stderr = 0.0;
  double bound = 0.0;
  double true_value = 0.0;
};

HoeffdingCheck hoeffding_validate(const World& world, const PrePrompt& pre, double eps,
                                  std::size_t replicates, std::size_t true_questions = 1'000'000);

/// Replicated (world, run) scenario: how often the recommendation's train
/// EM is more than eps from its expected EM, against the matching bound.
struct McScenario {
  WorldParams world;
  Algorithm algorithm = Algorithm::random_search;
  std::size_t shots = 8;
  std::size_t budget = 1;
  double eps = 0.1;
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  std::size_t true_questions = 20'000;
};

struct McResult {
  std::size_t replicates = 0;
  std::size_t violations = 0;
  double empirical_violation_rate = 0.0;
  double mc_stderr = 0.0;
  double delta_single = 0.0;
  ClampedProbability bound;
};

McResult mc_validate(const McScenario& scenario);

}  // namespace eppo
