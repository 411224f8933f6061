#include "eppo/subsampling.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace eppo {

std::vector<LabeledItem> parse_items_jsonl(std::string_view text) {
  std::vector<LabeledItem> items;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      LabeledItem item;
      const auto& id = j.at("id");
      item.id = id.is_string() ? id.get<std::string>() : id.dump();
      if (auto c = j.find("category"); c != j.end() && !c->is_null())
        item.category = c->is_string() ? c->get<std::string>() : c->dump();
      if (auto c = j.find("correct_count"); c != j.end() && !c->is_null())
        item.correct_count = c->get<unsigned>();
      if (auto n = j.find("n"); n != j.end() && !n->is_null()) item.n = n->get<unsigned>();
      items.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      throw SubsampleError("item line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return items;
}

namespace {

/// Uniform `count`-subset of `pool`, without replacement.
void draw_without_replacement(std::vector<std::size_t> pool, std::size_t count, Stream& stream,
                              std::vector<std::size_t>& out) {
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + stream.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
}

std::vector<std::string> ids_in_input_order(const std::vector<LabeledItem>& items,
                                            std::vector<std::size_t> chosen) {
  std::sort(chosen.begin(), chosen.end());
  std::vector<std::string> out;
  out.reserve(chosen.size());
  for (auto i : chosen) out.push_back(items[i].id);
  return out;
}

}  // namespace

std::vector<std::string> layered_subsample(const std::vector<LabeledItem>& items, std::size_t k,
                                           Stream& stream) {
  if (k > items.size())
    throw SubsampleError("k = " + std::to_string(k) + " exceeds " + std::to_string(items.size()) +
                         " items");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].category) throw SubsampleError("item '" + items[i].id + "' has no category");
    groups[*items[i].category].push_back(i);
  }
  if (groups.empty()) return {};

  std::vector<std::string> names;
  for (const auto& [name, _] : groups) names.push_back(name);
  stream.shuffle(std::span(names));

  const std::size_t base = k / names.size();
  std::size_t extra = k % names.size();
  std::vector<std::size_t> quotas(names.size(), base);
  for (std::size_t c = 0; c < names.size(); ++c) {
    const auto& pool = groups[names[c]];
    if (base > pool.size())
      throw SubsampleError("category '" + names[c] + "' has " + std::to_string(pool.size()) +
                           " items for a quota of " + std::to_string(base) + " (deficit " +
                           std::to_string(base - pool.size()) + ")");
  }
  // remainder slots go, in shuffled order, to categories that can absorb one
  for (std::size_t c = 0; c < names.size() && extra > 0; ++c)
    if (groups[names[c]].size() > base) {
      ++quotas[c];
      --extra;
    }
  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < names.size(); ++c)
    draw_without_replacement(groups[names[c]], quotas[c], stream, chosen);
  return ids_in_input_order(items, std::move(chosen));
}

std::size_t uncertainty_bucket(unsigned correct_count, unsigned n) {
  if (correct_count > n)
    throw SubsampleError("correct_count " + std::to_string(correct_count) + " exceeds n = " +
                         std::to_string(n));
  return correct_count;
}

std::vector<std::string> uncertainty_subsample(const std::vector<LabeledItem>& items, std::size_t k,
                                               unsigned n, Stream& stream) {
  if (k > items.size())
    throw SubsampleError("k = " + std::to_string(k) + " exceeds " + std::to_string(items.size()) +
                         " items");
  std::vector<std::vector<std::size_t>> buckets(static_cast<std::size_t>(n) + 1);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    if (!item.correct_count) throw SubsampleError("item '" + item.id + "' has no correct_count");
    if (item.n && *item.n != n)
      throw SubsampleError("item '" + item.id + "' sampled with n = " + std::to_string(*item.n) +
                           ", expected " + std::to_string(n));
    buckets[uncertainty_bucket(*item.correct_count, n)].push_back(i);
  }

  std::vector<std::size_t> quota(buckets.size(), 0);
  std::size_t remaining = k;
  while (remaining > 0) {
    std::vector<std::size_t> open;
    for (std::size_t b = 0; b < buckets.size(); ++b)
      if (quota[b] < buckets[b].size()) open.push_back(b);
    stream.shuffle(std::span(open));
    const std::size_t share = remaining / open.size();
    const std::size_t extra = remaining % open.size();
    for (std::size_t pos = 0; pos < open.size(); ++pos) {
      auto b = open[pos];
      std::size_t want = share + (pos < extra ? 1 : 0);
      std::size_t take = std::min(want, buckets[b].size() - quota[b]);
      quota[b] += take;
      remaining -= take;
    }
  }

  std::vector<std::size_t> chosen;
  for (std::size_t b = 0; b < buckets.size(); ++b)
    draw_without_replacement(buckets[b], quota[b], stream, chosen);
  return ids_in_input_order(items, std::move(chosen));
}

}  // namespace eppo
