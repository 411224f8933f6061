#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "eppo/rng.hpp"

namespace eppo {

/// {0, ..., cardinality-1}^shots. Demonstration indices are 0-based.
struct SearchSpace {
  std::size_t shots = 1;
  std::size_t cardinality = 2;

  SearchSpace() = default;
  SearchSpace(std::size_t shots, std::size_t cardinality);

  /// cardinality^shots, or nullopt when it does not fit in 64 bits.
  [[nodiscard]] std::optional<std::uint64_t> size() const;

  friend bool operator==(const SearchSpace&, const SearchSpace&) = default;
};

using DemoIndex = std::uint32_t;

/// Ordered list of demonstration indices; duplicates are kept as stored.
struct PrePrompt {
  std::vector<DemoIndex> indices;

  [[nodiscard]] std::size_t size() const { return indices.size(); }
  DemoIndex operator[](std::size_t i) const { return indices[i]; }
  DemoIndex& operator[](std::size_t i) { return indices[i]; }

  friend auto operator<=>(const PrePrompt&, const PrePrompt&) = default;
};

/// Names the first offending position, if any.
struct Violation {
  std::optional<std::size_t> position;
  std::string message;
};

std::optional<Violation> validate(const PrePrompt& pre, const SearchSpace& space);

PrePrompt uniform_preprompt(const SearchSpace& space, Stream& stream);

/// A line of space-separated decimal indices.
std::string format_preprompt(const PrePrompt& pre);
PrePrompt parse_preprompt(std::string_view line);

/// Exact count-of-correct over total.
struct Score {
  std::uint32_t correct = 0;
  std::uint32_t total = 0;

  [[nodiscard]] double value() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
  friend bool operator==(const Score&, const Score&) = default;
};

/// Compares correct/total exactly by cross-multiplication.
std::strong_ordering compare_scores(const Score& a, const Score& b);

/// Normalized fraction with positive denominator.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d);
  static Rational of(const Score& s) { return {s.correct, s.total}; }

  [[nodiscard]] double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator/(const Rational& a, std::int64_t d);
  friend bool operator==(const Rational&, const Rational&) = default;
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);
};

std::string to_string(const Rational& r);

struct ArchiveEntry {
  std::size_t step = 0;  // 1-based
  std::size_t position = 0;  // 0-based slot in the ask batch
  PrePrompt candidate;
  Score train_score;
  bool chosen = false;
};

class Archive {
 public:
  void append(ArchiveEntry entry) { entries_.push_back(std::move(entry)); }

  [[nodiscard]] const std::vector<ArchiveEntry>& entries() const { return entries_; }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] bool empty() const { return entries_.empty(); }

  /// JSONL with fields {step, indices, correct, total, chosen}.
  [[nodiscard]] std::string to_jsonl() const;
  static Archive from_jsonl(std::string_view text);

 private:
  std::vector<ArchiveEntry> entries_;
};

enum class Algorithm {
  random_search,
  disc_1p1,
  portfolio,
  double_fastga,
  lengler_1p1,
  lognormal_1p1,
  recomb_lengler,
};

std::optional<Algorithm> parse_algorithm(std::string_view tag);
std::string_view algorithm_tag(Algorithm algorithm);
const std::vector<Algorithm>& all_algorithms();

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t budget = 1;
  Algorithm algorithm = Algorithm::disc_1p1;
  SearchSpace space;
  std::optional<PrePrompt> warm_start;

  void check() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace eppo
