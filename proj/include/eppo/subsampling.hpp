#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "eppo/rng.hpp"

namespace eppo {

struct LabeledItem {
  std::string id;
  std::optional<std::string> category;
  std::optional<unsigned> correct_count;  // out of n sampled answers
  std::optional<unsigned> n;
};

/// Parses one JSONL document: {"id", "category"?, "correct_count"?, "n"?}.
/// Numeric ids are kept in their decimal form.
std::vector<LabeledItem> parse_items_jsonl(std::string_view text);

class SubsampleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Category-balanced draw of k items. Per-category counts differ by at most
/// one; which categories receive the remainder is a seeded shuffle.
/// Throws SubsampleError when k exceeds the item count or a category holds
/// fewer items than its quota.
std::vector<std::string> layered_subsample(const std::vector<LabeledItem>& items, std::size_t k,
                                           Stream& stream);

/// Bracket of an item answered correctly correct_count times out of n.
std::size_t uncertainty_bucket(unsigned correct_count, unsigned n);

/// Equal quotas over the n+1 uncertainty brackets. Empty brackets get no
/// quota; a bracket too small for its quota passes the shortfall on, spread
/// evenly over brackets that still have items.
std::vector<std::string> uncertainty_subsample(const std::vector<LabeledItem>& items, std::size_t k,
                                               unsigned n, Stream& stream);

}  // namespace eppo
