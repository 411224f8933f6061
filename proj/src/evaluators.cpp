#include "eppo/evaluators.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

#include <json.hpp>

namespace eppo {

std::string_view split_name(Split split) { return split == Split::train ? "train" : "test"; }

std::vector<EvalReport> Evaluator::evaluate_many(std::span<const PrePrompt> pres, Split split) {
  std::vector<EvalReport> out;
  out.reserve(pres.size());
  for (const auto& p : pres) out.push_back(evaluate(p, split));
  return out;
}

// ---------------------------------------------------------------------------
// World

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void WorldParams::check() const {
  if (n_demos < 2) throw ConfigError("world needs n_demos >= 2");
  if (n_train < 1) throw ConfigError("world needs n_train >= 1");
  if (rank < 1) throw ConfigError("world needs rank >= 1");
  if (gamma < 0.0) throw ConfigError("world needs gamma >= 0");
  if (base_sd < 0.0 || skill_sd < 0.0 || need_scale < 0.0)
    throw ConfigError("world scale parameters must be non-negative");
  auto block = n_train + n_test;
  if ((partition + 1) > World::kFreshIdBase / block)
    throw ConfigError("world partition index too large");
}

World::World(std::uint64_t seed, WorldParams params) : seed_(seed), params_(params) {
  params_.check();
  Stream demos = derive_stream(seed, "world/demos");
  skills_.resize(params_.n_demos * params_.rank);
  for (std::size_t i = 0; i < params_.n_demos; ++i) {
    Stream s = demos.child(i);
    for (std::size_t k = 0; k < params_.rank; ++k)
      skills_[i * params_.rank + k] = params_.skill_mean + params_.skill_sd * s.normal();
  }
  build_questions();
}

World::World(std::uint64_t seed, WorldParams params, std::vector<std::vector<double>> skills)
    : seed_(seed), params_(params) {
  params_.check();
  if (skills.size() != params_.n_demos) throw ConfigError("skills must have n_demos rows");
  for (const auto& row : skills) {
    if (row.size() != params_.rank) throw ConfigError("skill rows must have rank entries");
    skills_.insert(skills_.end(), row.begin(), row.end());
  }
  build_questions();
}

World World::repartitioned(std::uint64_t partition) const {
  World copy = *this;
  copy.params_.partition = partition;
  copy.params_.check();
  copy.build_questions();
  return copy;
}

std::uint64_t World::first_train_id() const {
  return params_.partition * (params_.n_train + params_.n_test);
}

std::uint64_t World::first_test_id() const { return first_train_id() + params_.n_train; }

void World::fill_question(std::uint64_t id, double& base, double& threshold, double* need) const {
  Stream s = derive_stream(seed_, "world/questions").child(id);
  base = params_.base_mean + params_.base_sd * s.normal();
  threshold = s.uniform();
  for (std::size_t k = 0; k < params_.rank; ++k) need[k] = params_.need_scale * std::abs(s.normal());
}

void World::build_questions() {
  auto fill = [this](Questions& qs, std::uint64_t first, std::size_t count) {
    qs.base.resize(count);
    qs.threshold.resize(count);
    qs.need.resize(count * params_.rank);
    for (std::size_t j = 0; j < count; ++j)
      fill_question(first + j, qs.base[j], qs.threshold[j], &qs.need[j * params_.rank]);
  };
  fill(train_, first_train_id(), params_.n_train);
  fill(test_, first_test_id(), params_.n_test);
}

void World::check_preprompt(const PrePrompt& pre) const {
  for (std::size_t i = 0; i < pre.size(); ++i)
    if (pre[i] >= params_.n_demos)
      throw std::invalid_argument("demo index " + std::to_string(pre[i]) + " at position " +
                                  std::to_string(i) + " outside world with " +
                                  std::to_string(params_.n_demos) + " demos");
}

std::span<const double> World::skill(std::size_t demo) const {
  return {skills_.data() + demo * params_.rank, params_.rank};
}

std::vector<double> World::summed_skill(const PrePrompt& pre, double& penalty) const {
  check_preprompt(pre);
  auto distinct = pre.indices;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  // Sum in sorted order so the result is bit-identical for every permutation.
  std::vector<double> total(params_.rank, 0.0);
  for (auto i : distinct)
    for (std::size_t k = 0; k < params_.rank; ++k) total[k] += skills_[i * params_.rank + k];
  penalty = params_.gamma * static_cast<double>(pre.size() - distinct.size());
  return total;
}

double World::accuracy(const PrePrompt& pre, std::uint64_t question_id) const {
  double penalty = 0.0;
  auto total = summed_skill(pre, penalty);
  double base = 0.0, threshold = 0.0;
  std::vector<double> need(params_.rank);
  fill_question(question_id, base, threshold, need.data());
  double logit = base - penalty;
  for (std::size_t k = 0; k < params_.rank; ++k) logit += total[k] * need[k];
  return logistic(logit);
}

std::vector<double> World::accuracies(const PrePrompt& pre, Split split) const {
  const auto& qs = split == Split::train ? train_ : test_;
  double penalty = 0.0;
  auto total = summed_skill(pre, penalty);
  std::vector<double> out(qs.base.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    double logit = qs.base[j] - penalty;
    for (std::size_t k = 0; k < params_.rank; ++k) logit += total[k] * qs.need[j * params_.rank + k];
    out[j] = logistic(logit);
  }
  return out;
}

std::span<const double> World::thresholds(Split split) const {
  return split == Split::train ? train_.threshold : test_.threshold;
}

EvalReport World::eval_block(const PrePrompt& pre, const Questions& qs) const {
  double penalty = 0.0;
  auto total = summed_skill(pre, penalty);
  EvalReport report;
  report.total = static_cast<std::uint32_t>(qs.base.size());
  report.per_question.resize(qs.base.size());
  for (std::size_t j = 0; j < qs.base.size(); ++j) {
    double logit = qs.base[j] - penalty;
    for (std::size_t k = 0; k < params_.rank; ++k) logit += total[k] * qs.need[j * params_.rank + k];
    bool ok = qs.threshold[j] < logistic(logit);
    report.per_question[j] = ok;
    report.correct += ok;
  }
  return report;
}

EvalReport World::eval_train(const PrePrompt& pre) const { return eval_block(pre, train_); }
EvalReport World::eval_test(const PrePrompt& pre) const { return eval_block(pre, test_); }

EvalReport World::eval(const PrePrompt& pre, Split split) const {
  return split == Split::train ? eval_train(pre) : eval_test(pre);
}

double World::eval_true(const PrePrompt& pre, std::size_t m, std::uint64_t batch) const {
  if (m == 0) throw std::invalid_argument("eval_true needs m >= 1");
  double penalty = 0.0;
  auto total = summed_skill(pre, penalty);
  std::vector<double> need(params_.rank);
  const std::uint64_t first = kFreshIdBase + batch * m;
  double sum = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double base = 0.0, threshold = 0.0;
    fill_question(first + j, base, threshold, need.data());
    double logit = base - penalty;
    for (std::size_t k = 0; k < params_.rank; ++k) logit += total[k] * need[k];
    sum += logistic(logit);
  }
  return sum / static_cast<double>(m);
}

World make_world(std::uint64_t seed, std::size_t n_demos, std::size_t n_train, std::size_t n_test,
                 std::size_t rank, double gamma) {
  WorldParams p;
  p.n_demos = n_demos;
  p.n_train = n_train;
  p.n_test = n_test;
  p.rank = rank;
  p.gamma = gamma;
  return World(seed, p);
}

// ---------------------------------------------------------------------------
// Cache

struct CachedEvaluator::Slot {
  std::shared_future<EvalReport> result;
};

EvalReport CachedEvaluator::evaluate(const PrePrompt& pre, Split split) {
  Key key{pre.indices, split};
  std::shared_ptr<Slot> slot;
  std::promise<EvalReport> promise;
  bool owner = false;
  {
    std::lock_guard lock(mutex_);
    auto it = slots_.find(key);
    if (it == slots_.end()) {
      slot = std::make_shared<Slot>();
      slot->result = promise.get_future().share();
      slots_.emplace(key, slot);
      ++inner_calls_;
      owner = true;
    } else {
      slot = it->second;
    }
  }
  if (owner) {
    try {
      promise.set_value(inner_->evaluate(pre, split));
    } catch (...) {
      // Failures are not memoized: drop the slot so a later call retries.
      {
        std::lock_guard lock(mutex_);
        slots_.erase(key);
      }
      promise.set_exception(std::current_exception());
    }
  }
  return slot->result.get();
}

std::vector<EvalReport> CachedEvaluator::evaluate_many(std::span<const PrePrompt> pres,
                                                       Split split) {
  std::vector<std::shared_ptr<Slot>> slots(pres.size());
  std::vector<std::promise<EvalReport>> promises;
  std::vector<std::size_t> owned;  // positions this call must compute
  std::vector<PrePrompt> misses;
  promises.reserve(pres.size());
  {
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < pres.size(); ++i) {
      Key key{pres[i].indices, split};
      if (auto it = slots_.find(key); it != slots_.end()) {
        slots[i] = it->second;
        continue;
      }
      auto slot = std::make_shared<Slot>();
      promises.emplace_back();
      slot->result = promises.back().get_future().share();
      slots_.emplace(std::move(key), slot);
      slots[i] = slot;
      owned.push_back(i);
      misses.push_back(pres[i]);
      ++inner_calls_;
    }
  }
  if (!misses.empty()) {
    try {
      auto reports = inner_->evaluate_many(misses, split);
      if (reports.size() != misses.size()) throw EvaluatorError("inner evaluator lost results");
      for (std::size_t k = 0; k < owned.size(); ++k) promises[k].set_value(std::move(reports[k]));
    } catch (...) {
      {
        std::lock_guard lock(mutex_);
        for (auto i : owned) slots_.erase(Key{pres[i].indices, split});
      }
      for (auto& p : promises) p.set_exception(std::current_exception());
    }
  }
  std::vector<EvalReport> out;
  out.reserve(pres.size());
  for (auto& s : slots) out.push_back(s->result.get());
  return out;
}

std::size_t CachedEvaluator::inner_calls() const {
  std::lock_guard lock(mutex_);
  return inner_calls_;
}

std::size_t CachedEvaluator::size() const {
  std::lock_guard lock(mutex_);
  return slots_.size();
}

// ---------------------------------------------------------------------------
// External protocol

std::string encode_request(std::uint64_t id, const PrePrompt& pre, Split split) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["preprompt"] = pre.indices;
  j["split"] = split_name(split);
  return j.dump();
}

namespace {

std::uint32_t count_field(const nlohmann::json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw MalformedResponse(std::string("response missing '") + name + "'");
  if (!it->is_number_integer())
    throw MalformedResponse(std::string("response field '") + name + "' is not an integer");
  if (it->is_number_unsigned()) {
    auto v = it->get<std::uint64_t>();
    if (v > std::numeric_limits<std::uint32_t>::max())
      throw ScoreOutOfRange(std::string("response field '") + name + "' exceeds 32 bits");
    return static_cast<std::uint32_t>(v);
  }
  auto v = it->get<std::int64_t>();
  if (v < 0) throw ScoreOutOfRange(std::string("response field '") + name + "' is negative");
  if (v > std::numeric_limits<std::uint32_t>::max())
    throw ScoreOutOfRange(std::string("response field '") + name + "' exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

DecodedResponse decode_response(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedResponse(std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw MalformedResponse("response is not a JSON object");
  auto id_it = j.find("id");
  if (id_it == j.end() || !id_it->is_number_unsigned())
    throw MalformedResponse("response missing unsigned 'id'");

  DecodedResponse out;
  out.id = id_it->get<std::uint64_t>();
  out.report.correct = count_field(j, "correct");
  out.report.total = count_field(j, "total");
  if (out.report.total == 0) throw ScoreOutOfRange("response total is zero");
  if (out.report.correct > out.report.total)
    throw MalformedResponse("response has correct > total");

  if (auto pq = j.find("per_question"); pq != j.end() && !pq->is_null()) {
    if (!pq->is_array()) throw MalformedResponse("per_question is not an array");
    if (pq->size() != out.report.total)
      throw MalformedResponse("per_question length differs from total");
    std::uint32_t ones = 0;
    out.report.per_question.reserve(pq->size());
    for (const auto& bit : *pq) {
      if (!bit.is_number_integer()) throw MalformedResponse("per_question entry is not an integer");
      auto v = bit.get<std::int64_t>();
      if (v != 0 && v != 1) throw ScoreOutOfRange("per_question entry outside {0, 1}");
      out.report.per_question.push_back(static_cast<std::uint8_t>(v));
      ones += static_cast<std::uint32_t>(v);
    }
    if (ones != out.report.correct)
      throw MalformedResponse("per_question does not sum to correct");
  }
  return out;
}

ExternalEvaluator::ExternalEvaluator(std::unique_ptr<LineChannel> channel, std::size_t cardinality,
                                     std::chrono::milliseconds timeout)
    : channel_(std::move(channel)), cardinality_(cardinality), timeout_(timeout) {}

EvalReport ExternalEvaluator::evaluate(const PrePrompt& pre, Split split) {
  return std::move(evaluate_many(std::span(&pre, 1), split).front());
}

std::vector<EvalReport> ExternalEvaluator::evaluate_many(std::span<const PrePrompt> pres,
                                                         Split split) {
  std::lock_guard lock(mutex_);
  for (const auto& p : pres)
    if (auto v = validate(p, SearchSpace{p.size() == 0 ? 1 : p.size(), cardinality_}))
      throw std::invalid_argument("pre-prompt invalid for external evaluator: " + v->message);

  std::map<std::uint64_t, std::size_t> waiting;  // request id -> position
  const std::uint64_t first_id = next_id_;
  try {
    for (std::size_t i = 0; i < pres.size(); ++i) {
      auto id = next_id_++;
      channel_->send_line(encode_request(id, pres[i], split));
      waiting.emplace(id, i);
    }
  } catch (const ChannelClosed& e) {
    throw EvaluatorError(e.what());
  }

  std::vector<EvalReport> out(pres.size());
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  while (!waiting.empty()) {
    std::optional<std::string> line;
    try {
      line = channel_->receive_line(deadline);
    } catch (const ChannelClosed& e) {
      throw EvaluatorError(e.what());
    }
    if (!line)
      throw EvaluatorTimeout("no response for request " + std::to_string(waiting.begin()->first) +
                             " within " + std::to_string(timeout_.count()) + " ms");
    if (line->empty()) continue;
    auto resp = decode_response(*line);
    if (auto w = waiting.find(resp.id); w != waiting.end()) {
      out[w->second] = std::move(resp.report);
      waiting.erase(w);
    } else if (resp.id >= first_id) {
      throw MalformedResponse("unexpected response id " + std::to_string(resp.id));
    }
    // ids below first_id answer requests that already timed out; drop them
  }
  return out;
}

}  // namespace eppo
