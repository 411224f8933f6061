#include "eppo/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include "eppo/parallel.hpp"

namespace eppo {

WorldParams default_world_params() {
  WorldParams p;
  p.n_demos = 100;
  p.n_train = 800;
  p.n_test = 2000;
  p.rank = 4;
  p.gamma = 0.1;
  p.base_mean = 0.0;
  p.base_sd = 1.0;
  p.skill_mean = 0.0;
  p.skill_sd = 0.05;
  p.need_scale = 1.0;
  return p;
}

namespace {

using json = nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("key '") + key + "' has the wrong type");
  }
}

template <typename T>
T require(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) throw ConfigError(where + " is missing '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("key '") + key + "' has the wrong type");
  }
}

void check_schema(const json& j, const char* expected) {
  auto it = j.find("schema");
  if (it == j.end()) return;
  if (!it->is_string() || it->get<std::string>() != expected)
    throw ConfigError(std::string("expected schema '") + expected + "'");
}

Algorithm algorithm_from(const std::string& tag) {
  auto a = parse_algorithm(tag);
  if (!a) throw ConfigError("unknown algorithm '" + tag + "'");
  return *a;
}

std::string format_fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

nlohmann::ordered_json score_json(const Score& s) {
  nlohmann::ordered_json j;
  j["correct"] = s.correct;
  j["total"] = s.total;
  return j;
}

}  // namespace

WorldParams world_params_from_json(const json& j) {
  reject_unknown(j,
                 {"n_demos", "n_train", "n_test", "rank", "gamma", "base_mean", "base_sd",
                  "skill_mean", "skill_sd", "need_scale", "partition"},
                 "world");
  WorldParams d = default_world_params();
  WorldParams p;
  p.n_demos = get_or<std::size_t>(j, "n_demos", d.n_demos);
  p.n_train = get_or<std::size_t>(j, "n_train", d.n_train);
  p.n_test = get_or<std::size_t>(j, "n_test", d.n_test);
  p.rank = get_or<std::size_t>(j, "rank", d.rank);
  p.gamma = get_or<double>(j, "gamma", d.gamma);
  p.base_mean = get_or<double>(j, "base_mean", d.base_mean);
  p.base_sd = get_or<double>(j, "base_sd", d.base_sd);
  p.skill_mean = get_or<double>(j, "skill_mean", d.skill_mean);
  p.skill_sd = get_or<double>(j, "skill_sd", d.skill_sd);
  p.need_scale = get_or<double>(j, "need_scale", d.need_scale);
  p.partition = get_or<std::uint64_t>(j, "partition", d.partition);
  p.check();
  return p;
}

nlohmann::ordered_json world_params_to_json(const WorldParams& p) {
  nlohmann::ordered_json j;
  j["n_demos"] = p.n_demos;
  j["n_train"] = p.n_train;
  j["n_test"] = p.n_test;
  j["rank"] = p.rank;
  j["gamma"] = p.gamma;
  j["base_mean"] = p.base_mean;
  j["base_sd"] = p.base_sd;
  j["skill_mean"] = p.skill_mean;
  j["skill_sd"] = p.skill_sd;
  j["need_scale"] = p.need_scale;
  j["partition"] = p.partition;
  return j;
}

EvaluatorSpec evaluator_spec_from_json(const json& j) {
  reject_unknown(j,
                 {"kind", "world_seed", "world", "command", "host", "port", "cardinality",
                  "timeout_ms"},
                 "evaluator");
  EvaluatorSpec spec;
  auto kind = get_or<std::string>(j, "kind", "synthetic");
  if (kind == "synthetic") {
    spec.kind = EvaluatorSpec::Kind::synthetic;
    if (j.contains("world_seed")) spec.world_seed = require<std::uint64_t>(j, "world_seed", "evaluator");
    if (j.contains("world")) spec.world = world_params_from_json(j.at("world"));
    spec.cardinality = spec.world.n_demos;
    return spec;
  }
  if (kind == "subprocess") {
    spec.kind = EvaluatorSpec::Kind::subprocess;
    spec.command = require<std::vector<std::string>>(j, "command", "evaluator");
    if (spec.command.empty()) throw ConfigError("evaluator command is empty");
  } else if (kind == "tcp") {
    spec.kind = EvaluatorSpec::Kind::tcp;
    spec.host = get_or<std::string>(j, "host", spec.host);
    spec.port = require<int>(j, "port", "evaluator");
  } else {
    throw ConfigError("unknown evaluator kind '" + kind + "'");
  }
  spec.cardinality = require<std::size_t>(j, "cardinality", "evaluator");
  if (spec.cardinality < 2) throw ConfigError("evaluator cardinality must be >= 2");
  spec.timeout = std::chrono::milliseconds(get_or<std::int64_t>(j, "timeout_ms", 60'000));
  return spec;
}

ExperimentSpec parse_experiment(const json& j) {
  reject_unknown(j,
                 {"schema", "scenario", "seed", "budget", "algorithm", "shots", "warm_start",
                  "evaluator", "replicates", "test_curve", "cache", "reevaluate_recommendation"},
                 "run config");
  check_schema(j, kRunSchema);
  ExperimentSpec spec;
  spec.scenario = get_or<std::string>(j, "scenario", "run");
  spec.run.seed = get_or<std::uint64_t>(j, "seed", 0);
  spec.run.budget = require<std::size_t>(j, "budget", "run config");
  spec.run.algorithm = algorithm_from(require<std::string>(j, "algorithm", "run config"));
  spec.evaluator = j.contains("evaluator") ? evaluator_spec_from_json(j.at("evaluator")) : EvaluatorSpec{};
  auto shots = require<std::size_t>(j, "shots", "run config");
  if (shots < 1) throw ConfigError("shots must be >= 1");
  spec.run.space = SearchSpace(shots, spec.evaluator.cardinality);
  if (j.contains("warm_start") && !j.at("warm_start").is_null())
    spec.run.warm_start = PrePrompt{require<std::vector<DemoIndex>>(j, "warm_start", "run config")};
  spec.replicates = get_or<std::size_t>(j, "replicates", 1);
  if (spec.replicates < 1) throw ConfigError("replicates must be >= 1");
  if (j.contains("test_curve")) spec.test_curve = get_or<bool>(j, "test_curve", false);
  spec.cache = get_or<bool>(j, "cache", true);
  spec.reevaluate_recommendation = get_or<bool>(j, "reevaluate_recommendation", false);
  spec.run.check();
  return spec;
}

EvaluatorHandle open_evaluator(const EvaluatorSpec& spec, std::uint64_t run_seed, bool cache) {
  EvaluatorHandle handle;
  switch (spec.kind) {
    case EvaluatorSpec::Kind::synthetic: {
      handle.world = std::make_shared<const World>(spec.world_seed.value_or(run_seed), spec.world);
      handle.evaluator = std::make_shared<SyntheticEvaluator>(handle.world);
      break;
    }
    case EvaluatorSpec::Kind::subprocess:
      handle.evaluator = std::make_shared<ExternalEvaluator>(spawn_subprocess(spec.command),
                                                             spec.cardinality, spec.timeout);
      break;
    case EvaluatorSpec::Kind::tcp:
      try {
        handle.evaluator = std::make_shared<ExternalEvaluator>(connect_tcp(spec.host, spec.port),
                                                               spec.cardinality, spec.timeout);
      } catch (const std::runtime_error& e) {
        throw EvaluatorError(e.what());
      }
      break;
  }
  if (cache) handle.evaluator = std::make_shared<CachedEvaluator>(handle.evaluator);
  return handle;
}

RunArtifacts execute_run(const ExperimentSpec& spec) {
  auto handle = open_evaluator(spec.evaluator, spec.run.seed, spec.cache);
  auto& evaluator = *handle.evaluator;
  const bool curve = spec.curve_enabled();

  RunArtifacts art;
  std::string curve_csv = "step,best_train_em,test_em\n";
  std::optional<ArchiveEntry> running;  // same rule as recommend(), kept incrementally

  RunOptions options;
  options.reevaluate_recommendation = spec.reevaluate_recommendation;
  options.on_step = [&](const StepRecord& rec) {
    nlohmann::ordered_json line;
    line["step"] = rec.step;
    auto& cands = line["candidates"] = nlohmann::ordered_json::array();
    for (const auto& c : rec.batch->candidates) cands.push_back(c.indices);
    auto& scores = line["scores"] = nlohmann::ordered_json::array();
    for (const auto& s : rec.outcome->scores) scores.push_back({s.correct, s.total});
    line["winner"] = rec.feedback;
    art.progress_jsonl += line.dump() + "\n";

    for (std::size_t i = 0; i < rec.batch->size(); ++i) {
      const auto& s = rec.outcome->scores[i];
      if (!running || compare_scores(s, running->train_score) > 0)
        running = ArchiveEntry{rec.step, i, (*rec.batch)[i], s, false};
    }
    curve_csv += std::to_string(rec.step) + "," + format_fixed(running->train_score.value()) + ",";
    if (curve) curve_csv += format_fixed(evaluator.evaluate(running->candidate, Split::test).score().value());
    curve_csv += "\n";
  };

  art.result = run(spec.run, evaluator, options);
  art.archive_jsonl = art.result.archive.to_jsonl();
  art.curve_csv = std::move(curve_csv);
  if (art.result.recommendation && art.result.completed && (curve || handle.world))
    art.recommendation_test = evaluator.evaluate(*art.result.recommendation, Split::test).score();

  nlohmann::ordered_json r;
  r["schema"] = kRunResultSchema;
  r["scenario"] = spec.scenario;
  r["algorithm"] = algorithm_tag(spec.run.algorithm);
  r["seed"] = spec.run.seed;
  r["budget"] = spec.run.budget;
  r["kappa"] = art.result.kappa;
  r["shots"] = spec.run.space.shots;
  r["cardinality"] = spec.run.space.cardinality;
  if (handle.world) {
    r["world_seed"] = handle.world->seed();
    r["world"] = world_params_to_json(handle.world->params());
  }
  r["completed"] = art.result.completed;
  if (!art.result.completed) r["error"] = art.result.error;
  if (art.result.recommendation) {
    r["recommendation"] = art.result.recommendation->indices;
    r["recommendation_train"] = score_json(*art.result.recommendation_train);
  } else {
    r["recommendation"] = nullptr;
  }
  if (art.recommendation_test) r["recommendation_test"] = score_json(*art.recommendation_test);
  r["bits_used"] = art.result.bits_used;
  r["feedback_trace"] = art.result.feedback_trace;
  r["archive"] = "archive.jsonl";
  r["archive_entries"] = art.result.archive.size();
  art.result_json = r.dump(2) + "\n";
  return art;
}

BenchSuite parse_bench_suite(const json& j) {
  reject_unknown(j, {"schema", "algorithms", "shots", "budgets", "replicates", "seed", "world"},
                 "bench suite");
  check_schema(j, kBenchSchema);
  BenchSuite suite;
  for (const auto& tag : require<std::vector<std::string>>(j, "algorithms", "bench suite"))
    suite.algorithms.push_back(algorithm_from(tag));
  suite.shots = require<std::vector<std::size_t>>(j, "shots", "bench suite");
  suite.budgets = require<std::vector<std::size_t>>(j, "budgets", "bench suite");
  suite.replicates = get_or<std::size_t>(j, "replicates", 20);
  suite.seed = get_or<std::uint64_t>(j, "seed", 0);
  if (j.contains("world")) suite.world = world_params_from_json(j.at("world"));
  if (suite.algorithms.empty() || suite.shots.empty() || suite.budgets.empty())
    throw ConfigError("bench suite is empty");
  if (suite.replicates < 1) throw ConfigError("replicates must be >= 1");
  for (auto s : suite.shots)
    if (s < 1) throw ConfigError("shots must be >= 1");
  for (auto b : suite.budgets)
    if (b < 1) throw ConfigError("budgets must be >= 1");
  return suite;
}

std::vector<double> BenchCell::train_values() const {
  std::vector<double> v;
  for (const auto& o : outcomes) v.push_back(o.train);
  return v;
}

std::vector<double> BenchCell::test_values() const {
  std::vector<double> v;
  for (const auto& o : outcomes) v.push_back(o.test);
  return v;
}

std::vector<double> BenchCell::gap_values() const {
  std::vector<double> v;
  for (const auto& o : outcomes) v.push_back(o.gap());
  return v;
}

const BenchCell& BenchTable::at(Algorithm algorithm, std::size_t shots, std::size_t budget) const {
  for (const auto& c : cells)
    if (c.algorithm == algorithm && c.shots == shots && c.budget == budget) return c;
  throw std::out_of_range("no bench cell for " + std::string(algorithm_tag(algorithm)));
}

std::string BenchTable::to_csv() const {
  std::string out =
      "algorithm,shots,budget,replicates,train_q1,train_median,train_q3,test_q1,test_median,"
      "test_q3,gap_q1,gap_median,gap_q3,budget_flag\n";
  for (const auto& c : cells) {
    out += std::string(algorithm_tag(c.algorithm)) + "," + std::to_string(c.shots) + "," +
           std::to_string(c.budget) + "," + std::to_string(c.outcomes.size());
    for (const auto* q : {&c.train, &c.test, &c.gap})
      out += "," + format_fixed(q->q1) + "," + format_fixed(q->median) + "," + format_fixed(q->q3);
    out += "," + c.budget_flag + "\n";
  }
  return out;
}

std::string BenchTable::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = kBenchResultSchema;
  auto& rows = j["cells"] = nlohmann::ordered_json::array();
  auto quart = [](const stats::Quartiles& q) {
    return nlohmann::ordered_json{{"q1", q.q1}, {"median", q.median}, {"q3", q.q3}};
  };
  for (const auto& c : cells) {
    nlohmann::ordered_json row;
    row["algorithm"] = algorithm_tag(c.algorithm);
    row["shots"] = c.shots;
    row["budget"] = c.budget;
    row["replicates"] = c.outcomes.size();
    row["train"] = quart(c.train);
    row["test"] = quart(c.test);
    row["gap"] = quart(c.gap);
    row["budget_flag"] = c.budget_flag;
    rows.push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

BenchTable run_bench(const BenchSuite& suite) {
  BenchTable table;
  for (auto a : suite.algorithms)
    for (auto s : suite.shots)
      for (auto b : suite.budgets) {
        BenchCell cell{a, s, b, {}, {}, {}, {}, {}};
        cell.outcomes.resize(suite.replicates);
        table.cells.push_back(std::move(cell));
      }

  Stream world_seeds = derive_stream(suite.seed, "bench/world");
  Stream run_seeds = derive_stream(suite.seed, "bench/run");
  parallel_for(suite.replicates, [&](std::size_t r) {
    auto world = std::make_shared<const World>(world_seeds.child(r).next(), suite.world);
    auto evaluator = std::make_shared<CachedEvaluator>(std::make_shared<SyntheticEvaluator>(world));
    const std::uint64_t run_seed = run_seeds.child(r).next();
    for (auto& cell : table.cells) {
      RunConfig config;
      config.seed = run_seed;
      config.budget = cell.budget;
      config.algorithm = cell.algorithm;
      config.space = world->space(cell.shots);
      auto result = run(config, *evaluator);
      if (!result.completed) throw EvaluatorError(result.error);
      cell.outcomes[r] = {result.recommendation_train->value(),
                          world->eval_test(*result.recommendation).score().value()};
    }
  });

  const std::size_t base_budget = *std::min_element(suite.budgets.begin(), suite.budgets.end());
  for (auto& cell : table.cells) {
    cell.train = stats::quartiles(cell.train_values());
    cell.test = stats::quartiles(cell.test_values());
    cell.gap = stats::quartiles(cell.gap_values());
  }
  for (auto& cell : table.cells) {
    if (cell.budget == base_budget) continue;
    const auto& base = table.at(cell.algorithm, cell.shots, base_budget);
    cell.budget_flag = cell.test.median > base.test.median   ? "+"
                       : cell.test.median < base.test.median ? "-"
                                                             : "=";
  }
  return table;
}

}  // namespace eppo
