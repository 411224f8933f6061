#include "eppo/core.hpp"

#include <charconv>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace eppo {

SearchSpace::SearchSpace(std::size_t shots, std::size_t cardinality)
    : shots(shots), cardinality(cardinality) {
  if (shots < 1) throw ConfigError("search space needs at least one shot");
  if (cardinality < 2) throw ConfigError("search space needs cardinality >= 2");
}

std::optional<std::uint64_t> SearchSpace::size() const {
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < shots; ++i) {
    if (total > UINT64_MAX / cardinality) return std::nullopt;
    total *= cardinality;
  }
  return total;
}

std::optional<Violation> validate(const PrePrompt& pre, const SearchSpace& space) {
  if (pre.size() != space.shots) {
    std::ostringstream msg;
    msg << "length " << pre.size() << " != " << space.shots;
    return Violation{std::nullopt, msg.str()};
  }
  for (std::size_t i = 0; i < pre.size(); ++i) {
    if (pre[i] >= space.cardinality) {
      std::ostringstream msg;
      msg << "index " << pre[i] << " at position " << i << " outside [0, " << space.cardinality
          << ")";
      return Violation{i, msg.str()};
    }
  }
  return std::nullopt;
}

PrePrompt uniform_preprompt(const SearchSpace& space, Stream& stream) {
  PrePrompt pre;
  pre.indices.resize(space.shots);
  for (auto& v : pre.indices) v = static_cast<DemoIndex>(stream.below(space.cardinality));
  return pre;
}

std::string format_preprompt(const PrePrompt& pre) {
  std::string out;
  for (std::size_t i = 0; i < pre.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(pre[i]);
  }
  return out;
}

PrePrompt parse_preprompt(std::string_view line) {
  PrePrompt pre;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r' || line[i] == '\n'))
      ++i;
    if (i >= line.size()) break;
    DemoIndex v = 0;
    auto [ptr, ec] = std::from_chars(line.data() + i, line.data() + line.size(), v);
    if (ec != std::errc{} || ptr == line.data() + i)
      throw ConfigError("malformed pre-prompt line: '" + std::string(line) + "'");
    pre.indices.push_back(v);
    i = static_cast<std::size_t>(ptr - line.data());
    if (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r' && line[i] != '\n')
      throw ConfigError("malformed pre-prompt line: '" + std::string(line) + "'");
  }
  return pre;
}

std::strong_ordering compare_scores(const Score& a, const Score& b) {
  auto lhs = static_cast<std::uint64_t>(a.correct) * b.total;
  auto rhs = static_cast<std::uint64_t>(b.correct) * a.total;
  return lhs <=> rhs;
}

Rational::Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
  if (d == 0) throw std::invalid_argument("zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  auto g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
}

Rational operator+(const Rational& a, const Rational& b) {
  auto g = std::gcd(a.den, b.den);
  return {a.num * (b.den / g) + b.num * (a.den / g), a.den / g * b.den};
}

Rational operator-(const Rational& a, const Rational& b) { return a + Rational(-b.num, b.den); }

Rational operator/(const Rational& a, std::int64_t d) { return {a.num, a.den * d}; }

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
  return static_cast<__int128>(a.num) * b.den <=> static_cast<__int128>(b.num) * a.den;
}

std::string to_string(const Rational& r) {
  return std::to_string(r.num) + "/" + std::to_string(r.den);
}

std::string Archive::to_jsonl() const {
  std::string out;
  for (const auto& e : entries_) {
    nlohmann::ordered_json line;
    line["step"] = e.step;
    line["indices"] = e.candidate.indices;
    line["correct"] = e.train_score.correct;
    line["total"] = e.train_score.total;
    line["chosen"] = e.chosen;
    out += line.dump();
    out += '\n';
  }
  return out;
}

Archive Archive::from_jsonl(std::string_view text) {
  Archive archive;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t last_step = 0;
  std::size_t position = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      ArchiveEntry e;
      e.step = j.at("step").get<std::size_t>();
      e.candidate.indices = j.at("indices").get<std::vector<DemoIndex>>();
      e.train_score = {j.at("correct").get<std::uint32_t>(), j.at("total").get<std::uint32_t>()};
      e.chosen = j.at("chosen").get<bool>();
      position = (e.step == last_step) ? position + 1 : 0;
      last_step = e.step;
      e.position = position;
      archive.append(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw ConfigError(std::string("malformed archive line: ") + ex.what());
    }
  }
  return archive;
}

namespace {
struct TagEntry {
  Algorithm algorithm;
  std::string_view tag;
};
constexpr TagEntry kTags[] = {
    {Algorithm::random_search, "random_search"}, {Algorithm::disc_1p1, "disc_1p1"},
    {Algorithm::portfolio, "portfolio"},         {Algorithm::double_fastga, "double_fastga"},
    {Algorithm::lengler_1p1, "lengler_1p1"},     {Algorithm::lognormal_1p1, "lognormal_1p1"},
    {Algorithm::recomb_lengler, "recomb_lengler"},
};
}  // namespace

std::optional<Algorithm> parse_algorithm(std::string_view tag) {
  for (const auto& t : kTags)
    if (t.tag == tag) return t.algorithm;
  return std::nullopt;
}

std::string_view algorithm_tag(Algorithm algorithm) {
  for (const auto& t : kTags)
    if (t.algorithm == algorithm) return t.tag;
  return "unknown";
}

const std::vector<Algorithm>& all_algorithms() {
  static const std::vector<Algorithm> all = [] {
    std::vector<Algorithm> v;
    for (const auto& t : kTags) v.push_back(t.algorithm);
    return v;
  }();
  return all;
}

void RunConfig::check() const {
  if (budget < 1) throw ConfigError("budget must be >= 1");
  if (space.shots < 1) throw ConfigError("shots must be >= 1");
  if (space.cardinality < 2) throw ConfigError("cardinality must be >= 2");
  if (warm_start) {
    if (auto v = validate(*warm_start, space)) throw ConfigError("warm start: " + v->message);
  }
}

}  // namespace eppo
