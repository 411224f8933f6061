#include "eppo/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace eppo {

namespace {

DemoIndex resample_other(DemoIndex current, std::size_t cardinality, Stream& stream) {
  auto v = static_cast<DemoIndex>(stream.below(cardinality - 1));
  return v >= current ? v + 1 : v;
}

void check_cardinality(std::size_t cardinality) {
  if (cardinality < 2) throw std::invalid_argument("mutation needs cardinality >= 2");
}

}  // namespace

PrePrompt mutate_fixed_rate(const PrePrompt& parent, double p, std::size_t cardinality,
                            Stream& stream) {
  check_cardinality(cardinality);
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("mutation probability must be in (0, 1]");
  if (parent.size() == 0) throw std::invalid_argument("cannot mutate an empty pre-prompt");

  std::vector<char> mask(parent.size());
  bool any = false;
  while (!any) {
    for (auto& m : mask) {
      m = stream.bernoulli(p);
      any = any || m;
    }
  }
  PrePrompt child = parent;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) child[i] = resample_other(parent[i], cardinality, stream);
  return child;
}

PrePrompt mutate_portfolio(const PrePrompt& parent, std::size_t cardinality, Stream& stream) {
  double p = 1.0 - stream.uniform();
  return mutate_fixed_rate(parent, p, cardinality, stream);
}

std::vector<double> fastga_strength_distribution(std::size_t shots, double beta) {
  std::vector<double> probs(shots);
  for (std::size_t k = 1; k <= shots; ++k) probs[k - 1] = std::pow(static_cast<double>(k), -beta);
  double norm = std::accumulate(probs.begin(), probs.end(), 0.0);
  for (auto& p : probs) p /= norm;
  return probs;
}

PrePrompt mutate_fastga(const PrePrompt& parent, std::size_t cardinality, Stream& stream) {
  check_cardinality(cardinality);
  const std::size_t s = parent.size();
  if (s == 0) throw std::invalid_argument("cannot mutate an empty pre-prompt");

  auto probs = fastga_strength_distribution(s);
  double u = stream.uniform();
  std::size_t k = s;
  double acc = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    acc += probs[i];
    if (u < acc) {
      k = i + 1;
      break;
    }
  }

  std::vector<std::size_t> positions(s);
  std::iota(positions.begin(), positions.end(), 0);
  // partial Fisher-Yates: the first k slots become a uniform k-subset
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + stream.below(s - i);
    std::swap(positions[i], positions[j]);
  }
  PrePrompt child = parent;
  for (std::size_t i = 0; i < k; ++i)
    child[positions[i]] = resample_other(parent[positions[i]], cardinality, stream);
  return child;
}

double lengler_rate(std::size_t shots, std::size_t t) {
  const double s = static_cast<double>(shots);
  const double c = s / 2.0;
  return std::max(1.0 / s, c / (c + static_cast<double>(t)));
}

PrePrompt mutate_lengler(const PrePrompt& parent, std::size_t t, std::size_t cardinality,
                         Stream& stream) {
  return mutate_fixed_rate(parent, lengler_rate(parent.size(), t), cardinality, stream);
}

double lognormal_floor(std::size_t shots) { return 1.0 / static_cast<double>(shots); }

double lognormal_ceiling(std::size_t shots) { return std::max(0.5, lognormal_floor(shots)); }

double lognormal_step(double p, double g, std::size_t shots) {
  return std::clamp(p * std::exp(kLogNormalTau * g), lognormal_floor(shots),
                    lognormal_ceiling(shots));
}

LogNormalMutation mutate_lognormal(double p, const PrePrompt& parent, std::size_t cardinality,
                                   Stream& stream) {
  double rate = lognormal_step(p, stream.normal(), parent.size());
  return {mutate_fixed_rate(parent, rate, cardinality, stream), rate};
}

PrePrompt one_point_crossover(const PrePrompt& a, const PrePrompt& b, std::size_t cut) {
  if (a.size() != b.size()) throw std::invalid_argument("crossover parents differ in length");
  if (cut > a.size()) throw std::invalid_argument("crossover cut out of range");
  PrePrompt child = a;
  std::copy(b.indices.begin() + static_cast<std::ptrdiff_t>(cut), b.indices.end(),
            child.indices.begin() + static_cast<std::ptrdiff_t>(cut));
  return child;
}

PrePrompt two_point_crossover(const PrePrompt& a, const PrePrompt& b, std::size_t first,
                              std::size_t second) {
  if (a.size() != b.size()) throw std::invalid_argument("crossover parents differ in length");
  if (first > second || second > a.size()) throw std::invalid_argument("crossover cuts out of range");
  PrePrompt child = a;
  std::copy(b.indices.begin() + static_cast<std::ptrdiff_t>(first),
            b.indices.begin() + static_cast<std::ptrdiff_t>(second),
            child.indices.begin() + static_cast<std::ptrdiff_t>(first));
  return child;
}

PrePrompt crossover(const PrePrompt& a, const PrePrompt& b, CrossoverKind kind, Stream& stream) {
  if (a.size() != b.size()) throw std::invalid_argument("crossover parents differ in length");
  const std::size_t s = a.size();
  if (kind == CrossoverKind::two_point && s < 3) kind = CrossoverKind::one_point;
  if (kind == CrossoverKind::one_point && s < 2) kind = CrossoverKind::uniform;

  switch (kind) {
    case CrossoverKind::one_point:
      return one_point_crossover(a, b, 1 + stream.below(s - 1));
    case CrossoverKind::two_point: {
      // two distinct cuts from {1, ..., s-1}
      std::size_t x = 1 + stream.below(s - 1);
      std::size_t y = 1 + stream.below(s - 2);
      if (y >= x) ++y;
      return two_point_crossover(a, b, std::min(x, y), std::max(x, y));
    }
    case CrossoverKind::uniform: {
      PrePrompt child = a;
      for (std::size_t i = 0; i < s; ++i)
        if (stream.bernoulli(0.5)) child[i] = b[i];
      return child;
    }
  }
  return a;
}

namespace {

void check_tell(std::size_t best_index, const AskBatch& batch, std::size_t kappa,
                const std::optional<AskBatch>& pending) {
  if (best_index < 1 || best_index > kappa)
    throw std::out_of_range("best_index " + std::to_string(best_index) + " outside [1, " +
                            std::to_string(kappa) + "]");
  if (!pending) throw std::logic_error("tell without a preceding ask");
  if (batch != *pending) throw std::logic_error("tell batch does not match the last ask");
}

class RandomSearch final : public Optimizer {
 public:
  RandomSearch(const SearchSpace& space, Stream stream, std::optional<PrePrompt> warm_start)
      : space_(space), stream_(stream), warm_start_(std::move(warm_start)) {}

  std::size_t kappa() const override { return 1; }
  Algorithm algorithm() const override { return Algorithm::random_search; }
  const SearchSpace& space() const override { return space_; }
  std::size_t steps_told() const override { return told_; }

  AskBatch ask() override {
    if (pending_) throw std::logic_error("ask called twice without tell");
    AskBatch batch;
    if (warm_start_) {
      batch.candidates.push_back(*warm_start_);
      warm_start_.reset();
    } else {
      batch.candidates.push_back(uniform_preprompt(space_, stream_));
    }
    pending_ = batch;
    return batch;
  }

  void tell(std::size_t best_index, const AskBatch& batch) override {
    check_tell(best_index, batch, 1, pending_);
    pending_.reset();
    ++told_;
  }

 private:
  SearchSpace space_;
  Stream stream_;
  std::optional<PrePrompt> warm_start_;
  std::optional<AskBatch> pending_;
  std::size_t told_ = 0;
};

/// (1+1) evolution strategies over categorical variables; kappa = 2.
class OnePlusOne final : public Optimizer {
 public:
  OnePlusOne(Algorithm algorithm, const SearchSpace& space, Stream stream,
             std::optional<PrePrompt> warm_start)
      : algorithm_(algorithm),
        space_(space),
        stream_(stream),
        incumbent_(std::move(warm_start)),
        rate_(lognormal_floor(space.shots)) {}

  std::size_t kappa() const override { return 2; }
  Algorithm algorithm() const override { return algorithm_; }
  const SearchSpace& space() const override { return space_; }
  std::size_t steps_told() const override { return told_; }
  std::optional<PrePrompt> incumbent() const override { return incumbent_; }

  std::optional<double> mutation_rate() const override {
    switch (algorithm_) {
      case Algorithm::disc_1p1:
        return 1.0 / static_cast<double>(space_.shots);
      case Algorithm::lengler_1p1:
      case Algorithm::recomb_lengler:
        return lengler_rate(space_.shots, told_);
      case Algorithm::lognormal_1p1:
        return rate_;
      default:
        return std::nullopt;
    }
  }

  AskBatch ask() override {
    if (pending_) throw std::logic_error("ask called twice without tell");
    if (!incumbent_) incumbent_ = uniform_preprompt(space_, stream_);
    if (history_.empty()) history_.push_back(*incumbent_);

    PrePrompt mutant = offspring();
    history_.push_back(mutant);
    AskBatch batch{{*incumbent_, std::move(mutant)}};
    pending_ = batch;
    return batch;
  }

  void tell(std::size_t best_index, const AskBatch& batch) override {
    check_tell(best_index, batch, 2, pending_);
    incumbent_ = batch[best_index - 1];
    if (algorithm_ == Algorithm::lognormal_1p1 && best_index == 2) rate_ = pending_rate_;
    pending_.reset();
    ++told_;
  }

 private:
  PrePrompt offspring() {
    const auto card = space_.cardinality;
    const auto& parent = *incumbent_;
    switch (algorithm_) {
      case Algorithm::disc_1p1:
        return mutate_fixed_rate(parent, 1.0 / static_cast<double>(space_.shots), card, stream_);
      case Algorithm::portfolio:
        return mutate_portfolio(parent, card, stream_);
      case Algorithm::double_fastga:
        return mutate_fastga(parent, card, stream_);
      case Algorithm::lengler_1p1:
        return mutate_lengler(parent, told_, card, stream_);
      case Algorithm::lognormal_1p1: {
        auto m = mutate_lognormal(rate_, parent, card, stream_);
        pending_rate_ = m.rate;
        return std::move(m.child);
      }
      case Algorithm::recomb_lengler: {
        if (stream_.bernoulli(0.5)) {
          const auto& partner = history_[stream_.below(history_.size())];
          PrePrompt child = crossover(parent, partner, CrossoverKind::uniform, stream_);
          if (child != parent) return child;
        }
        return mutate_lengler(parent, told_, card, stream_);
      }
      case Algorithm::random_search:
        break;
    }
    throw std::logic_error("not a (1+1) algorithm");
  }

  Algorithm algorithm_;
  SearchSpace space_;
  Stream stream_;
  std::optional<PrePrompt> incumbent_;
  std::optional<AskBatch> pending_;
  std::vector<PrePrompt> history_;  // every point this optimizer has proposed
  double rate_;
  double pending_rate_ = 0.0;
  std::size_t told_ = 0;
};

}  // namespace

std::unique_ptr<Optimizer> make_optimizer(Algorithm algorithm, const SearchSpace& space,
                                          Stream stream, std::optional<PrePrompt> warm_start) {
  if (warm_start) {
    if (auto v = validate(*warm_start, space)) throw ConfigError("warm start: " + v->message);
  }
  if (algorithm == Algorithm::random_search)
    return std::make_unique<RandomSearch>(space, stream, std::move(warm_start));
  return std::make_unique<OnePlusOne>(algorithm, space, stream, std::move(warm_start));
}

}  // namespace eppo
