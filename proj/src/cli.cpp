#include "eppo/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "eppo/analysis.hpp"
#include "eppo/bounds.hpp"
#include "eppo/experiment.hpp"
#include "eppo/subsampling.hpp"

namespace eppo {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << content;
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

PrePrompt read_preprompt(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) return parse_preprompt(line);
  throw ConfigError("'" + path + "' holds no pre-prompt");
}

Score parse_score(const std::string& text) {
  auto slash = text.find('/');
  try {
    if (slash == std::string::npos) throw std::invalid_argument(text);
    Score s{static_cast<std::uint32_t>(std::stoul(text.substr(0, slash))),
            static_cast<std::uint32_t>(std::stoul(text.substr(slash + 1)))};
    if (s.total == 0 || s.correct > s.total) throw std::invalid_argument(text);
    return s;
  } catch (const std::logic_error&) {
    throw ConfigError("score must look like correct/total, got '" + text + "'");
  }
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  throw ConfigError("split must be train or test");
}

/// Emits to <out> when given, otherwise to the console stream.
void emit(const GlobalOptions& g, std::ostream& out, const std::string& content) {
  if (g.out.empty())
    out << content;
  else
    write_file(g.out, content);
}

// ---------------------------------------------------------------------------

int cmd_run(const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  if (g.config.empty()) throw ConfigError("run needs --config");
  auto spec = parse_experiment(read_json(g.config));
  if (g.seed) spec.run.seed = *g.seed;
  spec.out_dir = g.out.empty() ? "." : g.out;

  auto art = execute_run(spec);
  fs::path dir(spec.out_dir);
  fs::create_directories(dir);
  write_file(dir / "archive.jsonl", art.archive_jsonl);
  write_file(dir / "progress.jsonl", art.progress_jsonl);
  write_file(dir / "curve.csv", art.curve_csv);
  write_file(dir / "result.json", art.result_json);

  if (!art.result.completed) {
    err << "evaluator failure after " << art.result.feedback_trace.size() << " steps: "
        << art.result.error << "\n";
    return kExitEvaluatorError;
  }
  out << "recommendation: " << format_preprompt(*art.result.recommendation) << "\n";
  out << "train EM: " << art.result.recommendation_train->value();
  if (art.recommendation_test) out << "  test EM: " << art.recommendation_test->value();
  out << "\nbits used: " << art.result.bits_used << "\n";
  return kExitOk;
}

int cmd_bench(const GlobalOptions& g, std::ostream& out) {
  if (g.config.empty()) throw ConfigError("bench needs --config");
  auto suite = parse_bench_suite(read_json(g.config));
  if (g.seed) suite.seed = *g.seed;
  auto table = run_bench(suite);
  fs::path dir(g.out.empty() ? "." : g.out);
  write_file(dir / "bench.csv", table.to_csv());
  write_file(dir / "bench.json", table.to_json());
  out << table.to_csv();
  return kExitOk;
}

struct BoundsArgs {
  std::size_t kappa = 2;
  std::size_t budget = 100;
  std::size_t T = 500;
  double eps = 0.05;
  double delta = 0.05;
  std::string format = "json";
};

int cmd_bounds(const GlobalOptions& g, const BoundsArgs& a, std::ostream& out) {
  if (a.kappa < 1 || a.budget < 1 || a.T < 1 || a.eps < 0.0 || !(a.delta > 0.0))
    throw ConfigError("bounds needs kappa, budget, T >= 1, eps >= 0 and delta > 0");
  auto report = make_bound_report(a.kappa, a.budget, a.T, a.eps, a.delta);
  emit(g, out, a.format == "table" ? report.to_table() : report.to_json() + "\n");
  return kExitOk;
}

struct AnalyzeArgs {
  std::string preprompt;
  std::string a, b;
  std::string strategy = "best_first";
  std::string score_a, score_b;
  std::size_t n_perm = 10;
  std::size_t k_target = 1;
  std::size_t samples = 10;
  std::size_t paths = 5;
  double tau = 0.6;
  std::size_t trials = 1;
  std::string split = "test";
};

/// Evaluator and seed from the "evaluator" / "seed" keys of a config file;
/// other keys (a full run config, say) are ignored.
struct AnalysisContext {
  EvaluatorHandle handle;
  std::uint64_t seed = 0;
};

AnalysisContext analysis_context(const GlobalOptions& g) {
  if (g.config.empty()) throw ConfigError("analysis needs --config naming an evaluator");
  auto j = read_json(g.config);
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  AnalysisContext ctx;
  ctx.seed = g.seed.value_or(j.value("seed", std::uint64_t{0}));
  auto spec = j.contains("evaluator") ? evaluator_spec_from_json(j.at("evaluator")) : EvaluatorSpec{};
  ctx.handle = open_evaluator(spec, ctx.seed, true);
  return ctx;
}

void emit_study(const GlobalOptions& g, std::ostream& out, const StudyReport& report) {
  if (g.out.empty()) {
    out << report.to_json() << "\n";
    return;
  }
  fs::path dir(g.out);
  write_file(dir / "study.json", report.to_json() + "\n");
  write_file(dir / "deltas.csv", report.deltas_csv());
}

int cmd_analyze(const std::string& verb, const GlobalOptions& g, const AnalyzeArgs& a,
                std::ostream& out) {
  if (verb == "fuse") {
    auto p1 = read_preprompt(a.a);
    auto p2 = read_preprompt(a.b);
    auto strategy = parse_fuse_strategy(a.strategy);
    if (!strategy) throw ConfigError("unknown fuse strategy '" + a.strategy + "'");
    Score s1, s2;
    if (!a.score_a.empty() && !a.score_b.empty()) {
      s1 = parse_score(a.score_a);
      s2 = parse_score(a.score_b);
    } else {
      auto ctx = analysis_context(g);
      s1 = ctx.handle.evaluator->evaluate(p1, Split::train).score();
      s2 = ctx.handle.evaluator->evaluate(p2, Split::train).score();
    }
    emit(g, out, format_preprompt(fuse(p1, p2, s1, s2, *strategy)) + "\n");
    return kExitOk;
  }

  auto pre = read_preprompt(a.preprompt);
  auto ctx = analysis_context(g);
  const Split split = parse_split(a.split);

  if (verb == "permute") {
    Stream stream = derive_stream(ctx.seed, "analysis/permute");
    emit_study(g, out, permutation_study(pre, *ctx.handle.evaluator, a.n_perm, stream, split));
  } else if (verb == "remove") {
    Stream stream = derive_stream(ctx.seed, "analysis/remove");
    emit_study(g, out,
               removal_study(pre, *ctx.handle.evaluator, a.k_target, a.samples, stream, split));
  } else if (verb == "sc") {
    if (!ctx.handle.world) throw ConfigError("self-consistency needs a synthetic evaluator");
    Stream stream = derive_stream(ctx.seed, "analysis/sc");
    nlohmann::ordered_json j;
    j["schema"] = "eppo.sc/1";
    j["preprompt"] = pre.indices;
    j["split"] = split_name(split);
    j["n_paths"] = a.paths;
    j["tau"] = a.tau;
    j["trials"] = a.trials;
    j["sc_rate"] = self_consistency(*ctx.handle.world, pre, a.paths, a.tau, stream, split, a.trials);
    j["single_path_em"] = ctx.handle.world->eval(pre, split).score().value();
    emit(g, out, j.dump(2) + "\n");
  } else if (verb == "transfer") {
    auto report = transfer_eval(pre, *ctx.handle.evaluator);
    nlohmann::ordered_json j;
    j["schema"] = "eppo.eval/1";
    j["preprompt"] = pre.indices;
    j["split"] = "test";
    j["correct"] = report.correct;
    j["total"] = report.total;
    j["em"] = report.score().value();
    emit(g, out, j.dump(2) + "\n");
  }
  return kExitOk;
}

struct SubsampleArgs {
  std::string mode = "layered";
  std::string input;
  std::size_t k = 0;
  unsigned n = 10;
};

int cmd_subsample(const GlobalOptions& g, const SubsampleArgs& a, std::ostream& out) {
  auto items = parse_items_jsonl(read_file(a.input));
  Stream stream = derive_stream(g.seed.value_or(0), "subsample/" + a.mode);
  std::vector<std::string> ids;
  if (a.mode == "layered")
    ids = layered_subsample(items, a.k, stream);
  else if (a.mode == "uncertainty")
    ids = uncertainty_subsample(items, a.k, a.n, stream);
  else
    throw ConfigError("unknown subsample mode '" + a.mode + "'");
  std::string text;
  for (const auto& id : ids) text += id + "\n";
  emit(g, out, text);
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Comparison-based few-shot pre-prompt optimization", "eppo"};
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Seed override");
  app.add_option("--out", g.out, "Output directory or file");
  app.add_option("--config", g.config, "JSON configuration");

  auto* run = app.add_subcommand("run", "Optimize one pre-prompt and log the run");
  auto* bench = app.add_subcommand("bench", "Algorithms x shots x budgets over seeded replicates");

  BoundsArgs ba;
  auto* bounds = app.add_subcommand("bounds", "Generalization bound calculator");
  bounds->add_option("--kappa", ba.kappa, "Candidates per comparison");
  bounds->add_option("--budget", ba.budget, "Number of comparisons b");
  bounds->add_option("--T", ba.T, "Training-set size");
  bounds->add_option("--eps", ba.eps, "Deviation threshold");
  bounds->add_option("--delta", ba.delta, "Confidence for the precision bound");
  bounds->add_option("--format", ba.format)->check(CLI::IsMember({"json", "table"}));

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "Post-hoc studies of a pre-prompt");
  analyze->require_subcommand(1);
  auto* permute = analyze->add_subcommand("permute", "Reordering robustness");
  permute->add_option("--preprompt", aa.preprompt)->required();
  permute->add_option("--n", aa.n_perm);
  permute->add_option("--split", aa.split);
  auto* remove = analyze->add_subcommand("remove", "Random example removal");
  remove->add_option("--preprompt", aa.preprompt)->required();
  remove->add_option("--k", aa.k_target, "Shots kept")->required();
  remove->add_option("--samples", aa.samples);
  remove->add_option("--split", aa.split);
  auto* fuse_cmd = analyze->add_subcommand("fuse", "Concatenate two pre-prompts");
  fuse_cmd->add_option("--a", aa.a)->required();
  fuse_cmd->add_option("--b", aa.b)->required();
  fuse_cmd->add_option("--strategy", aa.strategy)
      ->check(CLI::IsMember({"best_first", "best_last", "alternate"}));
  fuse_cmd->add_option("--score-a", aa.score_a, "correct/total");
  fuse_cmd->add_option("--score-b", aa.score_b, "correct/total");
  auto* sc = analyze->add_subcommand("sc", "Self-consistency majority vote");
  sc->add_option("--preprompt", aa.preprompt)->required();
  sc->add_option("--paths", aa.paths);
  sc->add_option("--tau", aa.tau);
  sc->add_option("--trials", aa.trials);
  sc->add_option("--split", aa.split);
  auto* transfer = analyze->add_subcommand("transfer", "Evaluate under another evaluator");
  transfer->add_option("--preprompt", aa.preprompt)->required();

  SubsampleArgs sa;
  auto* subsample = app.add_subcommand("subsample", "Layered or uncertainty sub-sampling");
  subsample->add_option("--mode", sa.mode)->check(CLI::IsMember({"layered", "uncertainty"}));
  subsample->add_option("--input", sa.input, "Items JSONL")->required();
  subsample->add_option("--k", sa.k)->required();
  subsample->add_option("--n", sa.n, "Answers sampled per item");

  for (auto* sub : {run, bench, bounds, analyze, subsample}) sub->fallthrough();
  for (auto* sub : analyze->get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (*run) return cmd_run(g, out, err);
    if (*bench) return cmd_bench(g, out);
    if (*bounds) return cmd_bounds(g, ba, out);
    if (*subsample) return cmd_subsample(g, sa, out);
    if (*analyze) {
      for (auto* sub : analyze->get_subcommands())
        return cmd_analyze(sub->get_name(), g, aa, out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const SubsampleError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const EvaluatorError& e) {
    err << "evaluator error: " << e.what() << "\n";
    return kExitEvaluatorError;
  } catch (const ChannelClosed& e) {
    err << "evaluator error: " << e.what() << "\n";
    return kExitEvaluatorError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace eppo
