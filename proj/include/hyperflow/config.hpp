// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hyperflow/common.hpp"

namespace hyperflow {

// Plain-text config: `key = value` lines grouped under `[section]`
// headers, `#` comments. Sections may repeat (one [object] block per
// scene object), so this is a list, not a map.

struct ConfigSection {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;

  const std::string* find(const std::string& key) const {
    for (const auto& [k, v] : entries)
      if (k == key) return &v;
    return nullptr;
  }
  std::string get_string(const std::string& key) const {
    const std::string* v = find(key);
    if (!v) throw InputError("config: [" + name + "] missing key '" + key + "'");
    return *v;
  }
  std::string get_string(const std::string& key, const std::string& dflt) const {
    const std::string* v = find(key);
    return v ? *v : dflt;
  }
  double get_double(const std::string& key) const {
    return parse_double(name, key, get_string(key));
  }
  double get_double(const std::string& key, double dflt) const {
    const std::string* v = find(key);
    return v ? parse_double(name, key, *v) : dflt;
  }
  long get_int(const std::string& key) const {
    return long(get_double(key));
  }
  long get_int(const std::string& key, long dflt) const {
    const std::string* v = find(key);
    return v ? long(parse_double(name, key, *v)) : dflt;
  }

private:
  static double parse_double(const std::string& sec, const std::string& key,
                             const std::string& text) {
    try {
      std::size_t pos = 0;
      double v = std::stod(text, &pos);
      while (pos < text.size() && std::isspace(unsigned(text[pos]))) ++pos;
      if (pos != text.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw InputError("config: [" + sec + "] key '" + key +
                       "' is not a number: '" + text + "'");
    }
  }
};

struct Config {
  std::vector<ConfigSection> sections;

  const ConfigSection* find(const std::string& name) const {
    for (const auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }
  const ConfigSection& require(const std::string& name) const {
    const ConfigSection* s = find(name);
    if (!s) throw InputError("config: missing [" + name + "] section");
    return *s;
  }
  std::vector<const ConfigSection*> all(const std::string& name) const {
    std::vector<const ConfigSection*> out;
    for (const auto& s : sections)
      if (s.name == name) out.push_back(&s);
    return out;
  }
};

namespace detail {
inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}
}  // namespace detail

inline Config parse_config(std::istream& in) {
  Config cfg;
  cfg.sections.push_back({"", {}});  // top-level keys before any header
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw InputError("config: bad section header at line " +
                         std::to_string(lineno));
      cfg.sections.push_back({detail::trim(line.substr(1, line.size() - 2)), {}});
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError("config: expected key = value at line " +
                       std::to_string(lineno));
    std::string key = detail::trim(line.substr(0, eq));
    std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty())
      throw InputError("config: empty key at line " + std::to_string(lineno));
    cfg.sections.back().entries.emplace_back(key, val);
  }
  return cfg;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_config(in);
}

}  // namespace hyperflow
