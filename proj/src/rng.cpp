#include "eppo/rng.hpp"

#include <cmath>
#include <numbers>

namespace eppo {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t hash_label(std::string_view label) {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

Stream::Stream(std::uint64_t seed, std::string_view label)
    : key_(mix64(mix64(seed + kGolden) ^ hash_label(label))) {}

std::uint64_t Stream::next() {
  std::uint64_t n = counter_++;
  return mix64(key_ ^ mix64(n * kGolden + 0x632BE59BD9B4E019ULL));
}

Stream Stream::child(std::string_view label) const {
  return Stream(mix64(key_ + kGolden) ^ hash_label(label));
}

Stream Stream::child(std::uint64_t index) const {
  return Stream(mix64(mix64(key_ ^ 0xD1B54A32D192ED03ULL) + index * kGolden));
}

std::uint64_t Stream::below(std::uint64_t bound) {
  // Rejection on the top of the range keeps the draw exactly uniform.
  const std::uint64_t limit = max() - (max() % bound + 1) % bound;
  std::uint64_t x;
  do {
    x = next();
  } while (x > limit);
  return x % bound;
}

double Stream::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Stream::normal() {
  double u1 = 1.0 - uniform();  // (0, 1]
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace eppo
