#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "eppo/core.hpp"
#include "eppo/rng.hpp"

namespace eppo {

/// Candidates for one comparison. For (1+1)-style optimizers slot 0 is the
/// incumbent and the last slot the offspring.
struct AskBatch {
  std::vector<PrePrompt> candidates;

  [[nodiscard]] std::size_t size() const { return candidates.size(); }
  const PrePrompt& operator[](std::size_t i) const { return candidates[i]; }
  friend bool operator==(const AskBatch&, const AskBatch&) = default;
};

/// Ask-and-tell, comparison-based. tell() receives the 1-based index of the
/// winning candidate and the batch it refers to; nothing else.
class Optimizer {
 public:
  virtual ~Optimizer() = default;

  [[nodiscard]] virtual std::size_t kappa() const = 0;
  [[nodiscard]] virtual Algorithm algorithm() const = 0;
  [[nodiscard]] virtual const SearchSpace& space() const = 0;

  virtual AskBatch ask() = 0;
  virtual void tell(std::size_t best_index, const AskBatch& batch) = 0;

  [[nodiscard]] virtual std::size_t steps_told() const = 0;
  /// Current reference point, if the algorithm keeps one.
  [[nodiscard]] virtual std::optional<PrePrompt> incumbent() const { return std::nullopt; }
  /// Adaptive mutation probability, where the algorithm has one.
  [[nodiscard]] virtual std::optional<double> mutation_rate() const { return std::nullopt; }
};

std::unique_ptr<Optimizer> make_optimizer(Algorithm algorithm, const SearchSpace& space,
                                          Stream stream,
                                          std::optional<PrePrompt> warm_start = std::nullopt);

// Mutation operators. Every operator changes at least one coordinate, and a
// changed coordinate is drawn uniformly from the other cardinality-1 values.

PrePrompt mutate_fixed_rate(const PrePrompt& parent, double p, std::size_t cardinality,
                            Stream& stream);

/// p ~ Uniform(0, 1] per call.
PrePrompt mutate_portfolio(const PrePrompt& parent, std::size_t cardinality, Stream& stream);

inline constexpr double kFastGaBeta = 1.5;

/// P(k) for k = 1..s under the power law k^-beta.
std::vector<double> fastga_strength_distribution(std::size_t shots, double beta = kFastGaBeta);

/// Changes exactly k distinct coordinates, k drawn from the power law.
PrePrompt mutate_fastga(const PrePrompt& parent, std::size_t cardinality, Stream& stream);

/// max(1/s, c/(c+t)) with c = s/2.
double lengler_rate(std::size_t shots, std::size_t t);

PrePrompt mutate_lengler(const PrePrompt& parent, std::size_t t, std::size_t cardinality,
                         Stream& stream);

inline constexpr double kLogNormalTau = 0.22;

/// [1/s, max(1/2, 1/s)]
double lognormal_floor(std::size_t shots);
double lognormal_ceiling(std::size_t shots);

/// p * exp(tau * g), clamped. Exposed separately so the clamp can be tested
/// with a chosen g.
double lognormal_step(double p, double g, std::size_t shots);

struct LogNormalMutation {
  PrePrompt child;
  double rate;
};

LogNormalMutation mutate_lognormal(double p, const PrePrompt& parent, std::size_t cardinality,
                                   Stream& stream);

enum class CrossoverKind { one_point, two_point, uniform };

/// A[0..cut) ++ B[cut..s)
PrePrompt one_point_crossover(const PrePrompt& a, const PrePrompt& b, std::size_t cut);
/// A outside [first, second), B inside.
PrePrompt two_point_crossover(const PrePrompt& a, const PrePrompt& b, std::size_t first,
                              std::size_t second);
PrePrompt crossover(const PrePrompt& a, const PrePrompt& b, CrossoverKind kind, Stream& stream);

}  // namespace eppo
