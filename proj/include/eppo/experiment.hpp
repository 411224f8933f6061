#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "eppo/core.hpp"
#include "eppo/driver.hpp"
#include "eppo/evaluators.hpp"
#include "eppo/stats.hpp"

namespace eppo {

inline constexpr const char* kRunSchema = "eppo.run/1";
inline constexpr const char* kRunResultSchema = "eppo.run_result/1";
inline constexpr const char* kBenchSchema = "eppo.bench/1";
inline constexpr const char* kBenchResultSchema = "eppo.bench_result/1";

/// Default synthetic world for experiments (|D| = 100, rank 4).
WorldParams default_world_params();

WorldParams world_params_from_json(const nlohmann::json& j);
nlohmann::ordered_json world_params_to_json(const WorldParams& p);

struct EvaluatorSpec {
  enum class Kind { synthetic, subprocess, tcp };
  Kind kind = Kind::synthetic;
  std::optional<std::uint64_t> world_seed;  // defaults to the run seed
  WorldParams world = default_world_params();
  std::vector<std::string> command;
  std::string host = "127.0.0.1";
  int port = 0;
  std::size_t cardinality = 0;
  std::chrono::milliseconds timeout{60'000};
};

EvaluatorSpec evaluator_spec_from_json(const nlohmann::json& j);

struct ExperimentSpec {
  std::string scenario = "run";
  RunConfig run;
  EvaluatorSpec evaluator;
  std::size_t replicates = 1;
  std::string out_dir = ".";
  std::optional<bool> test_curve;  // default: on for synthetic, off otherwise
  bool cache = true;
  bool reevaluate_recommendation = false;

  [[nodiscard]] bool curve_enabled() const {
    return test_curve.value_or(evaluator.kind == EvaluatorSpec::Kind::synthetic);
  }
};

/// Throws ConfigError on unknown keys, bad types, or unresolvable values.
ExperimentSpec parse_experiment(const nlohmann::json& j);

/// A live evaluator plus the world behind it when synthetic.
struct EvaluatorHandle {
  std::shared_ptr<Evaluator> evaluator;
  std::shared_ptr<const World> world;  // null for external evaluators
};

EvaluatorHandle open_evaluator(const EvaluatorSpec& spec, std::uint64_t run_seed, bool cache);

struct RunArtifacts {
  RunResult result;
  std::optional<Score> recommendation_test;
  std::string archive_jsonl;
  std::string progress_jsonl;
  std::string curve_csv;
  std::string result_json;
};

/// Executes one run and renders every artifact in memory.
RunArtifacts execute_run(const ExperimentSpec& spec);

struct BenchSuite {
  std::vector<Algorithm> algorithms;
  std::vector<std::size_t> shots;
  std::vector<std::size_t> budgets;
  std::size_t replicates = 20;
  std::uint64_t seed = 0;
  WorldParams world = default_world_params();
};

BenchSuite parse_bench_suite(const nlohmann::json& j);

struct ReplicateOutcome {
  double train = 0.0;
  double test = 0.0;
  [[nodiscard]] double gap() const { return train - test; }
};

struct BenchCell {
  Algorithm algorithm;
  std::size_t shots;
  std::size_t budget;
  std::vector<ReplicateOutcome> outcomes;  // by replicate
  stats::Quartiles train;
  stats::Quartiles test;
  stats::Quartiles gap;
  /// Median test EM against the smallest budget of the same
  /// (algorithm, shots): "+", "-", "=", or "" on the baseline row.
  std::string budget_flag;

  [[nodiscard]] std::vector<double> train_values() const;
  [[nodiscard]] std::vector<double> test_values() const;
  [[nodiscard]] std::vector<double> gap_values() const;
};

struct BenchTable {
  std::vector<BenchCell> cells;

  [[nodiscard]] const BenchCell& at(Algorithm algorithm, std::size_t shots, std::size_t budget) const;
  [[nodiscard]] std::string to_csv() const;
  [[nodiscard]] std::string to_json() const;
};

/// Replicate r shares one world across every cell, so cells are paired.
BenchTable run_bench(const BenchSuite& suite);

}  // namespace eppo
