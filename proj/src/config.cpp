#include "mfirl/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mfirl/mfg.hpp"

extern "C" char** environ;

namespace mfirl::config {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

bool KeyValues::has(const std::string& key) const { return values.count(key) > 0; }

std::string KeyValues::get(const std::string& key, const std::string& fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

std::string KeyValues::require(const std::string& key) const {
  const auto it = values.find(key);
  check(it != values.end(), "config: required key '" + key + "' is missing");
  return it->second;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  const auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    size_t used = 0;
    const double v = std::stod(it->second, &used);
    check(used == it->second.size(), "");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' has non-numeric value '" + it->second +
                                "'");
  }
}

int KeyValues::get_int(const std::string& key, int fallback) const {
  const auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    size_t used = 0;
    const int v = std::stoi(it->second, &used);
    check(used == it->second.size(), "");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' has non-integer value '" + it->second +
                                "'");
  }
}

void KeyValues::set(const std::string& key, const std::string& value) { values[key] = value; }

std::string KeyValues::echo() const {
  std::string out;
  for (const std::string& line : source_lines) out += "# " + line + "\n";
  for (const auto& [key, value] : applied_overrides)
    out += "# override: " + key + " = " + value + "\n";
  return out;
}

KeyValues parse_text(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno += 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    kv.source_lines.push_back(line);
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    check(eq != std::string::npos,
          "config: line " + std::to_string(lineno) + " is not 'key = value': " + t);
    const std::string key = trim(t.substr(0, eq));
    check(!key.empty(), "config: line " + std::to_string(lineno) + " has an empty key");
    kv.values[key] = trim(t.substr(eq + 1));
  }
  return kv;
}

KeyValues parse_file(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str());
}

void apply_env_overrides(KeyValues& kv) {
  std::vector<std::pair<std::string, std::string>> found;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    const std::string entry(*e);
    if (entry.rfind("MFIRL_", 0) != 0) continue;
    const size_t eq = entry.find('=');
    if (eq == std::string::npos || eq <= 6) continue;
    std::string key = entry.substr(6, eq - 6);
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    found.emplace_back(key, entry.substr(eq + 1));
  }
  std::sort(found.begin(), found.end());
  for (const auto& [key, value] : found) {
    kv.values[key] = value;
    kv.applied_overrides.emplace_back(key, value);
  }
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> out;
  for (const std::string& item : split_list(csv)) {
    try {
      size_t used = 0;
      out.push_back(std::stoull(item, &used));
      check(used == item.size(), "");
    } catch (const std::exception&) {
      throw std::invalid_argument("config: seed list entry '" + item + "' is not an integer");
    }
  }
  return out;
}

}  // namespace mfirl::config
