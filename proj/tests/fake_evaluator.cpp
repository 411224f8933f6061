// Stand-in for a real evaluator process: answers NDJSON requests on stdin
// from a synthetic world, with switchable misbehaviour.

#include <chrono>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eppo/evaluators.hpp"

namespace {

using json = nlohmann::json;

struct Request {
  std::uint64_t id;
  eppo::PrePrompt pre;
  eppo::Split split;
};

Request parse_request(const std::string& line) {
  auto j = json::parse(line);
  Request r;
  r.id = j.at("id").get<std::uint64_t>();
  r.pre.indices = j.at("preprompt").get<std::vector<eppo::DemoIndex>>();
  r.split = j.at("split").get<std::string>() == "test" ? eppo::Split::test : eppo::Split::train;
  return r;
}

void reply(const json& j) { std::cout << j.dump() << "\n" << std::flush; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fake evaluator"};
  std::string mode = "normal";
  std::uint64_t seed = 0;
  eppo::WorldParams params;
  params.n_train = 200;
  params.n_test = 300;
  std::size_t batch = 2;
  int delay_ms = 500;
  bool per_question = false;
  app.add_option("--mode", mode)
      ->check(CLI::IsMember({"normal", "reverse", "malformed", "overcount", "hang", "order",
                             "close", "slow_first", "bad_bit", "unknown_id"}));
  app.add_option("--seed", seed);
  app.add_option("--demos", params.n_demos);
  app.add_option("--batch", batch, "requests buffered before a reversed reply");
  app.add_option("--delay-ms", delay_ms);
  app.add_flag("--per-question", per_question);
  CLI11_PARSE(app, argc, argv);

  const eppo::World world(seed, params);
  auto answer = [&](const Request& r) {
    json j;
    j["id"] = r.id;
    if (mode == "order") {
      // deliberately order-sensitive: position-weighted index sum
      std::uint64_t acc = 0;
      for (std::size_t i = 0; i < r.pre.size(); ++i) acc += (i + 1) * r.pre[i];
      j["correct"] = acc % 101;
      j["total"] = 101;
      return j;
    }
    auto report = world.eval(r.pre, r.split);
    j["correct"] = report.correct;
    j["total"] = report.total;
    if (per_question) j["per_question"] = report.per_question;
    j["note"] = "unknown fields are ignored";
    return j;
  };

  std::vector<Request> pending;
  std::string line;
  bool first = true;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    Request r = parse_request(line);
    if (mode == "hang") continue;
    if (mode == "close") return 0;
    if (mode == "malformed") {
      std::cout << "{not json\n" << std::flush;
      continue;
    }
    if (mode == "overcount") {
      reply({{"id", r.id}, {"correct", 11}, {"total", 10}});
      continue;
    }
    if (mode == "bad_bit") {
      reply({{"id", r.id}, {"correct", 1}, {"total", 2}, {"per_question", {2, 0}}});
      continue;
    }
    if (mode == "unknown_id") {
      reply({{"id", r.id + 1000}, {"correct", 1}, {"total", 2}});
      continue;
    }
    if (mode == "slow_first" && first) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
    }
    first = false;
    if (mode == "reverse") {
      pending.push_back(std::move(r));
      if (pending.size() == batch) {
        for (auto it = pending.rbegin(); it != pending.rend(); ++it) reply(answer(*it));
        pending.clear();
      }
      continue;
    }
    reply(answer(r));
  }
  return 0;
}
