#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace archevo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. Line and column are 1-based; 0 means unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class InvariantError : public Error {
 public:
  using Error::Error;
};

class CorruptionError : public Error {
 public:
  using Error::Error;
};

// Seeded random source. Bounded draws use rejection sampling on top of
// mt19937_64 so results do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for a named slot of a run.
  static Rng derive(std::uint64_t seed, std::string_view label);

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, n). n must be > 0.
  std::size_t uniform_index(std::size_t n);
  // Uniform in [0, 1).
  double uniform01();
  bool bernoulli(double p) { return uniform01() < p; }

  template <typename T>
  const T& pick(const std::vector<T>& items) {
    return items.at(uniform_index(items.size()));
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t x);
std::string to_hex(std::uint64_t value);

std::string trim(std::string_view text);
std::string to_lower(std::string_view text);
// Trim, collapse internal whitespace runs to one space, lowercase.
std::string normalize_name(std::string_view text);
// Collapse every whitespace run (including newlines) to one space and trim.
std::string collapse_whitespace(std::string_view text);
std::vector<std::string> split_lines(std::string_view text);
std::vector<std::string> split(std::string_view text, char sep);
bool starts_with_ci(std::string_view text, std::string_view prefix);
std::size_t word_count(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace archevo
