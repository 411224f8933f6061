#include "eppo/bounds.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "eppo/driver.hpp"
#include "eppo/parallel.hpp"
#include "eppo/stats.hpp"

namespace eppo {

double hoeffding_delta(std::size_t T, double eps) {
  if (T < 1) throw std::invalid_argument("hoeffding_delta needs T >= 1");
  if (!(eps >= 0.0)) throw std::invalid_argument("hoeffding_delta needs eps >= 0");
  return 2.0 * std::exp(-2.0 * static_cast<double>(T) * eps * eps);
}

double bonferroni(double m, double delta) {
  if (m < 1.0) throw std::invalid_argument("bonferroni needs m >= 1");
  if (delta < 0.0) throw std::invalid_argument("bonferroni needs delta >= 0");
  return m * delta;
}

namespace {

void check_bound_args(std::size_t kappa, std::size_t budget, double delta) {
  if (kappa < 1) throw std::invalid_argument("bound needs kappa >= 1");
  if (budget < 1) throw std::invalid_argument("bound needs b >= 1");
  if (!(delta >= 0.0)) throw std::invalid_argument("bound needs delta >= 0");
}

/// kappa^e by squaring in extended precision; exact for powers of two.
long double integer_power(std::size_t kappa, std::size_t e) {
  long double base = static_cast<long double>(kappa);
  long double acc = 1.0L;
  while (e) {
    if (e & 1) acc *= base;
    base *= base;
    e >>= 1;
  }
  return acc;
}

double power_times(std::size_t kappa, std::size_t e, double delta) {
  if (delta == 0.0) return 0.0;
  long double direct = integer_power(kappa, e) * static_cast<long double>(delta);
  if (std::isfinite(direct) && direct <= std::numeric_limits<double>::max())
    return static_cast<double>(direct);
  return std::numeric_limits<double>::infinity();
}

}  // namespace

double eppo_bound(std::size_t kappa, std::size_t budget, double delta) {
  check_bound_args(kappa, budget, delta);
  return power_times(kappa, budget, delta);
}

double log_eppo_bound(std::size_t kappa, std::size_t budget, double delta) {
  check_bound_args(kappa, budget, delta);
  if (delta == 0.0) return -std::numeric_limits<double>::infinity();
  return static_cast<double>(budget) * std::log(static_cast<double>(kappa)) + std::log(delta);
}

double rs_bound(std::size_t budget, double delta) {
  check_bound_args(1, budget, delta);
  return static_cast<double>(budget) * delta;
}

double archive_bound(std::size_t kappa, std::size_t budget, double delta) {
  check_bound_args(kappa, budget, delta);
  return power_times(kappa, budget + 1, delta);
}

double epsilon_bound(std::size_t kappa, std::size_t budget, double delta, std::size_t T) {
  check_bound_args(kappa, budget, delta);
  if (!(delta > 0.0)) throw std::invalid_argument("epsilon_bound needs delta > 0");
  if (T < 1) throw std::invalid_argument("epsilon_bound needs T >= 1");
  // ln(kappa^-b * delta / 2), kept in the log domain
  double log_arg = std::log(delta) - std::log(2.0) -
                   static_cast<double>(budget) * std::log(static_cast<double>(kappa));
  if (log_arg > 0.0) throw std::domain_error("epsilon_bound undefined: kappa^-b delta / 2 > 1");
  return std::sqrt(-log_arg / (2.0 * static_cast<double>(T)));
}

ClampedProbability clamp_probability(double raw) {
  return {raw, std::isnan(raw) ? 1.0 : std::min(1.0, std::max(0.0, raw))};
}

BoundReport make_bound_report(std::size_t kappa, std::size_t budget, std::size_t T, double eps,
                              double delta_target) {
  BoundReport r;
  r.kappa = kappa;
  r.budget = budget;
  r.T = T;
  r.eps = eps;
  r.delta_target = delta_target;
  double d = hoeffding_delta(T, eps);
  r.delta_single = clamp_probability(d);
  r.delta_eppo = clamp_probability(eppo_bound(kappa, budget, d));
  r.delta_rs = clamp_probability(rs_bound(budget, d));
  r.delta_unif_archive = clamp_probability(archive_bound(kappa, budget, d));
  try {
    r.eps_bound = epsilon_bound(kappa, budget, delta_target, T);
  } catch (const std::domain_error&) {
    r.eps_bound.reset();
  }
  return r;
}

namespace {

nlohmann::ordered_json prob_json(const ClampedProbability& p) {
  nlohmann::ordered_json j;
  if (std::isfinite(p.raw))
    j["raw"] = p.raw;
  else
    j["raw"] = "inf";
  j["clamped"] = p.clamped;
  j["vacuous"] = p.vacuous();
  return j;
}

}  // namespace

std::string BoundReport::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = "eppo.bounds/1";
  j["kappa"] = kappa;
  j["budget"] = budget;
  j["T"] = T;
  j["eps"] = eps;
  j["delta_target"] = delta_target;
  j["delta_single"] = prob_json(delta_single);
  j["delta_eppo"] = prob_json(delta_eppo);
  j["delta_rs"] = prob_json(delta_rs);
  j["delta_unif_archive"] = prob_json(delta_unif_archive);
  if (eps_bound)
    j["eps_bound"] = *eps_bound;
  else
    j["eps_bound"] = nullptr;
  return j.dump(2);
}

std::string BoundReport::to_table() const {
  std::ostringstream out;
  out << std::left;
  auto row = [&](const std::string& name, const std::string& value) {
    out << std::setw(20) << name << value << '\n';
  };
  auto prob = [](const ClampedProbability& p) {
    std::ostringstream s;
    s << std::setprecision(6) << p.raw << "  (clamped " << p.clamped << ")";
    if (p.vacuous()) s << "  vacuous";
    return s.str();
  };
  row("kappa", std::to_string(kappa));
  row("budget", std::to_string(budget));
  row("T", std::to_string(T));
  {
    std::ostringstream s;
    s << eps;
    row("eps", s.str());
  }
  row("delta_single", prob(delta_single));
  row("delta_eppo", prob(delta_eppo));
  row("delta_rs", prob(delta_rs));
  row("delta_unif_archive", prob(delta_unif_archive));
  {
    std::ostringstream s;
    if (eps_bound)
      s << std::setprecision(6) << *eps_bound << "  (at delta " << delta_target << ")";
    else
      s << "undefined";
    row("eps_bound", s.str());
  }
  return out.str();
}

HoeffdingCheck hoeffding_validate(const World& world, const PrePrompt& pre, double eps,
                                  std::size_t replicates, std::size_t true_questions) {
  if (replicates == 0) throw std::invalid_argument("hoeffding_validate needs replicates >= 1");
  HoeffdingCheck out;
  out.replicates = replicates;
  out.true_value = world.eval_true(pre, true_questions);
  out.bound = hoeffding_delta(world.params().n_train, eps);

  std::vector<char> violated(replicates, 0);
  parallel_for(replicates, [&](std::size_t r) {
    World fresh = world.repartitioned(world.params().partition + 1 + r);
    double train = fresh.eval_train(pre).score().value();
    violated[r] = std::abs(train - out.true_value) > eps;
  });
  for (char v : violated) out.violations += static_cast<std::size_t>(v);
  out.rate = static_cast<double>(out.violations) / static_cast<double>(replicates);
  out.mc_stderr = stats::binomial_stderr(out.rate, replicates);
  return out;
}

McResult mc_validate(const McScenario& scenario) {
  if (scenario.replicates == 0) throw std::invalid_argument("mc_validate needs replicates >= 1");
  const std::size_t T = scenario.world.n_train;
  McResult out;
  out.replicates = scenario.replicates;
  out.delta_single = hoeffding_delta(T, scenario.eps);

  const std::size_t kappa = scenario.algorithm == Algorithm::random_search ? 1 : 2;
  double raw = scenario.algorithm == Algorithm::random_search
                   ? rs_bound(scenario.budget, out.delta_single)
                   : eppo_bound(kappa, scenario.budget, out.delta_single);
  out.bound = clamp_probability(raw);

  Stream world_seeds = derive_stream(scenario.seed, "mc/world");
  Stream run_seeds = derive_stream(scenario.seed, "mc/run");
  std::vector<char> violated(scenario.replicates, 0);
  parallel_for(scenario.replicates, [&](std::size_t r) {
    World world(world_seeds.child(r).next(), scenario.world);
    SyntheticEvaluator evaluator(std::make_shared<const World>(world));
    RunConfig config;
    config.seed = run_seeds.child(r).next();
    config.budget = scenario.budget;
    config.algorithm = scenario.algorithm;
    config.space = world.space(scenario.shots);
    auto result = run(config, evaluator);
    if (!result.completed) throw EvaluatorError(result.error);
    double train = result.recommendation_train->value();
    double truth = world.eval_true(*result.recommendation, scenario.true_questions);
    violated[r] = std::abs(train - truth) > scenario.eps;
  });
  for (char v : violated) out.violations += static_cast<std::size_t>(v);
  out.empirical_violation_rate =
      static_cast<double>(out.violations) / static_cast<double>(scenario.replicates);
  out.mc_stderr = stats::binomial_stderr(out.empirical_violation_rate, scenario.replicates);
  return out;
}

}  // namespace eppo
