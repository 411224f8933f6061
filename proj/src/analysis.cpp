#include "eppo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace eppo {

namespace {

StudyReport finish_study(std::string kind, const PrePrompt& base, Evaluator& evaluator, Split split,
                         std::vector<PrePrompt> variants) {
  StudyReport report;
  report.kind = std::move(kind);
  report.base = base;
  report.base_score = evaluator.evaluate(base, split).score();
  auto reports = evaluator.evaluate_many(variants, split);
  report.variants = std::move(variants);
  const auto base_value = Rational::of(report.base_score);
  for (const auto& r : reports) {
    report.variant_scores.push_back(r.score());
    report.deltas.push_back(Rational::of(r.score()) - base_value);
  }
  if (!report.deltas.empty()) {
    auto sorted = report.deltas;
    std::sort(sorted.begin(), sorted.end());
    report.min = sorted.front();
    report.max = sorted.back();
    const auto n = sorted.size();
    report.median = n % 2 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2;
  }
  return report;
}

nlohmann::ordered_json rational_json(const Rational& r) {
  nlohmann::ordered_json j;
  j["num"] = r.num;
  j["den"] = r.den;
  j["value"] = r.value();
  return j;
}

nlohmann::ordered_json score_json(const Score& s) {
  nlohmann::ordered_json j;
  j["correct"] = s.correct;
  j["total"] = s.total;
  return j;
}

}  // namespace

std::string StudyReport::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = "eppo.study/1";
  j["kind"] = kind;
  j["base"] = base.indices;
  j["base_score"] = score_json(base_score);
  auto& vs = j["variants"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < variants.size(); ++i) {
    nlohmann::ordered_json v;
    v["indices"] = variants[i].indices;
    v["score"] = score_json(variant_scores[i]);
    v["delta"] = rational_json(deltas[i]);
    vs.push_back(std::move(v));
  }
  j["summary"] = {{"min", rational_json(min)},
                  {"median", rational_json(median)},
                  {"max", rational_json(max)}};
  return j.dump(2);
}

std::string StudyReport::deltas_csv() const {
  std::string out = "kind,variant,delta,delta_value\n";
  char buf[64];
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g", deltas[i].value());
    out += kind + "," + std::to_string(i) + "," + to_string(deltas[i]) + "," + buf + "\n";
  }
  return out;
}

StudyReport permutation_study(const PrePrompt& pre, Evaluator& evaluator, std::size_t n_perm,
                              Stream& stream, Split split) {
  if (pre.size() < 2) throw std::invalid_argument("permutation study needs at least two shots");
  if (std::all_of(pre.indices.begin(), pre.indices.end(), [&](auto v) { return v == pre[0]; }))
    throw std::invalid_argument("every reordering of a constant pre-prompt is itself");

  std::vector<PrePrompt> variants;
  variants.reserve(n_perm);
  while (variants.size() < n_perm) {
    PrePrompt v = pre;
    stream.shuffle(std::span(v.indices));
    if (v != pre) variants.push_back(std::move(v));
  }
  return finish_study("permute", pre, evaluator, split, std::move(variants));
}

StudyReport removal_study(const PrePrompt& pre, Evaluator& evaluator, std::size_t k_target,
                          std::size_t n_samples, Stream& stream, Split split) {
  if (k_target < 1 || k_target >= pre.size())
    throw std::invalid_argument("removal study needs 1 <= k_target < " + std::to_string(pre.size()));

  std::vector<PrePrompt> variants;
  variants.reserve(n_samples);
  std::vector<std::size_t> positions(pre.size());
  for (std::size_t n = 0; n < n_samples; ++n) {
    std::iota(positions.begin(), positions.end(), 0);
    for (std::size_t i = 0; i < k_target; ++i) {
      std::size_t j = i + stream.below(positions.size() - i);
      std::swap(positions[i], positions[j]);
    }
    std::sort(positions.begin(), positions.begin() + static_cast<std::ptrdiff_t>(k_target));
    PrePrompt v;
    for (std::size_t i = 0; i < k_target; ++i) v.indices.push_back(pre[positions[i]]);
    variants.push_back(std::move(v));
  }
  return finish_study("remove", pre, evaluator, split, std::move(variants));
}

std::optional<FuseStrategy> parse_fuse_strategy(std::string_view name) {
  if (name == "best_first") return FuseStrategy::best_first;
  if (name == "best_last") return FuseStrategy::best_last;
  if (name == "alternate") return FuseStrategy::alternate;
  return std::nullopt;
}

PrePrompt fuse(const PrePrompt& p1, const PrePrompt& p2, Score score1, Score score2,
               FuseStrategy strategy) {
  const bool first_better = compare_scores(score1, score2) >= 0;
  const PrePrompt& better = first_better ? p1 : p2;
  const PrePrompt& worse = first_better ? p2 : p1;

  PrePrompt out;
  out.indices.reserve(p1.size() + p2.size());
  auto append = [&](const PrePrompt& p) {
    out.indices.insert(out.indices.end(), p.indices.begin(), p.indices.end());
  };
  switch (strategy) {
    case FuseStrategy::best_first:
      append(better);
      append(worse);
      break;
    case FuseStrategy::best_last:
      append(worse);
      append(better);
      break;
    case FuseStrategy::alternate:
      for (std::size_t i = 0; i < std::max(better.size(), worse.size()); ++i) {
        if (i < better.size()) out.indices.push_back(better[i]);
        if (i < worse.size()) out.indices.push_back(worse[i]);
      }
      break;
  }
  return out;
}

double path_probability(double accuracy, double tau) {
  if (tau < 0.0) throw std::invalid_argument("temperature must be >= 0");
  if (accuracy <= 0.0) return 0.0;
  if (accuracy >= 1.0) return 1.0;
  if (tau == 0.0) return accuracy;
  double logit = std::log(accuracy / (1.0 - accuracy));
  return 1.0 / (1.0 + std::exp(-logit / (1.0 + tau)));
}

double self_consistency(const World& world, const PrePrompt& pre, std::size_t n_paths, double tau,
                        const Stream& stream, Split split, std::size_t trials) {
  if (n_paths == 0 || n_paths % 2 == 0)
    throw std::invalid_argument("self-consistency needs an odd number of paths");
  if (tau < 0.0) throw std::invalid_argument("temperature must be >= 0");
  if (trials == 0) throw std::invalid_argument("self-consistency needs trials >= 1");

  auto acc = world.accuracies(pre, split);
  auto thresholds = world.thresholds(split);
  if (acc.empty()) throw std::invalid_argument("self-consistency over an empty split");

  std::size_t wins = 0;
  for (std::size_t j = 0; j < acc.size(); ++j) {
    const double p = path_probability(acc[j], tau);
    Stream s = stream.child(j);
    for (std::size_t t = 0; t < trials; ++t) {
      std::size_t ok = 0;
      for (std::size_t k = 0; k < n_paths; ++k) {
        // The first path of the first vote reuses the question's own
        // threshold, so one greedy path reproduces plain evaluation.
        double u = (t == 0 && k == 0) ? thresholds[j] : s.uniform();
        ok += u < p;
      }
      wins += 2 * ok > n_paths;
    }
  }
  return static_cast<double>(wins) / static_cast<double>(acc.size() * trials);
}

EvalReport transfer_eval(const PrePrompt& pre, Evaluator& evaluator) {
  for (std::size_t i = 0; i < pre.size(); ++i)
    if (pre[i] >= evaluator.cardinality())
      throw std::invalid_argument("index " + std::to_string(pre[i]) + " at position " +
                                  std::to_string(i) + " outside target demonstration set of " +
                                  std::to_string(evaluator.cardinality()));
  return evaluator.evaluate(pre, Split::test);
}

}  // namespace eppo
