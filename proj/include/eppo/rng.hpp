#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>

namespace eppo {

/// Counter-based deterministic random stream.
///
/// Draw n of a stream is a pure hash of (key, n), so a stream can be copied,
/// forked into labelled children, and replayed without sharing state with
/// any other consumer. All distributions are implemented here rather than
/// through <random> so that sequences are identical across standard
/// libraries.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream() = default;
  Stream(std::uint64_t seed, std::string_view label);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next(); }
  std::uint64_t next();

  /// Independent sub-stream; does not advance this stream.
  [[nodiscard]] Stream child(std::string_view label) const;
  [[nodiscard]] Stream child(std::uint64_t index) const;

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  /// Uniform double in [0, 1).
  double uniform();
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal (Box-Muller, two draws per call).
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  [[nodiscard]] std::uint64_t key() const { return key_; }
  [[nodiscard]] std::uint64_t position() const { return counter_; }

 private:
  explicit Stream(std::uint64_t key) : key_(key) {}

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// One stream per concern, derived from the run seed by label.
inline Stream derive_stream(std::uint64_t seed, std::string_view label) { return {seed, label}; }

std::uint64_t mix64(std::uint64_t x);

}  // namespace eppo
