#pragma once
// Flat key = value experiment configuration: file parsing, MFIRL_*
// environment overrides, and a verbatim echo block so every run log carries
// its full provenance.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace mfirl::config {

struct KeyValues {
  std::map<std::string, std::string> values;
  std::vector<std::string> source_lines;  // original file text, line by line
  std::vector<std::pair<std::string, std::string>> applied_overrides;

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;  // throws when absent
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  void set(const std::string& key, const std::string& value);

  // Provenance block: the source lines exactly as read, then one line per
  // applied override, every line prefixed "# " so it can head a CSV log.
  std::string echo() const;
};

// Lines are `key = value` (spaces optional); blank lines and lines starting
// with # pass through to the echo. Anything else throws, naming the line.
KeyValues parse_text(const std::string& text);
KeyValues parse_file(const std::string& path);

// Applies MFIRL_<KEY>=value pairs from the process environment; the suffix is
// lowercased, so MFIRL_ITERATIONS overrides "iterations". Applied in sorted
// key order, recorded in applied_overrides.
void apply_env_overrides(KeyValues& kv);

std::vector<std::string> split_list(const std::string& csv);
std::vector<std::uint64_t> parse_seeds(const std::string& csv);  // throws on junk

}  // namespace mfirl::config
