// Shared utilities: deterministic RNG derivation, hashing, small string and
// JSONL helpers used across the pipeline.
#pragma once

#include <cstdint>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pallm/errors.hpp"

namespace pallm {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Seed derivation. All randomness in the project is a pure function of the
// run seed plus structural indices (step, group, rollout, ...), so resumed
// runs replay the exact stream without serializing generator state.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t a) { return splitmix64(a); }

template <typename... Rest>
uint64_t mix_seed(uint64_t a, uint64_t b, Rest... rest) {
  return mix_seed(splitmix64(a ^ splitmix64(b)), rest...);
}

inline uint64_t hash_str(std::string_view s) {
  // FNV-1a, stable across builds (std::hash is not).
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

template <typename... Rest>
uint64_t mix_seed_str(uint64_t a, std::string_view s, Rest... rest) {
  return mix_seed(a, hash_str(s), rest...);
}

// Small deterministic generator. xoshiro-free: splitmix64 as the state
// transition is plenty for corpus synthesis and token sampling.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(splitmix64(seed ^ 0x5dee33a9cb1full)) {}

  uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return n ? next() % n : 0; }

  // Standard normal via Box-Muller (fresh pair each call, cache the spare).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 1e-300) u1 = u01();
    const double u2 = u01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925287 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// ---------------------------------------------------------------------------
// Strings
// ---------------------------------------------------------------------------

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

inline std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Whitespace-delimited word count (the length filter's notion of "word").
inline int word_count(std::string_view s) {
  int n = 0;
  bool in_word = false;
  for (char c : s) {
    const bool ws = std::isspace(static_cast<unsigned char>(c));
    if (!ws && !in_word) ++n;
    in_word = !ws;
  }
  return n;
}

inline bool contains_word(const std::string& haystack_lower, const std::string& needle_lower) {
  // Word-boundary match for single words, plain substring for phrases.
  if (needle_lower.find(' ') != std::string::npos)
    return haystack_lower.find(needle_lower) != std::string::npos;
  size_t pos = 0;
  while ((pos = haystack_lower.find(needle_lower, pos)) != std::string::npos) {
    const bool left_ok =
        pos == 0 || !std::isalpha(static_cast<unsigned char>(haystack_lower[pos - 1]));
    const size_t end = pos + needle_lower.size();
    const bool right_ok = end >= haystack_lower.size() ||
                          !std::isalpha(static_cast<unsigned char>(haystack_lower[end]));
    if (left_ok && right_ok) return true;
    pos += 1;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

// Append-style JSONL writer; keeps one line per record, no timestamps.
class JsonlWriter {
 public:
  JsonlWriter() = default;
  explicit JsonlWriter(const std::string& path, bool append = false) { open(path, append); }
  void open(const std::string& path, bool append = false) {
    out_.open(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
    if (!out_) throw IoError("cannot write file: " + path);
  }
  bool is_open() const { return out_.is_open(); }
  void write(const json& j) {
    out_ << j.dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

inline std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::vector<json> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError("invalid JSON at " + path + ":" + std::to_string(lineno));
    out.push_back(std::move(j));
  }
  return out;
}

inline uint64_t file_fingerprint(const std::string& path) {
  return hash_str(read_file(path));
}

}  // namespace pallm
