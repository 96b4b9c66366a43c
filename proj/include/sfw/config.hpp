#pragma once

// Strict sectioned key=value config files. Every key must be consumed by the
// reader; leftovers are hard errors naming the key and line, so a typo in a
// parameter name can never silently fall back to a default.

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfw {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ConfigFile {
 public:
  static ConfigFile parse_string(const std::string& text, const std::string& origin = "<string>") {
    ConfigFile cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string stripped = trim(strip_comment(line));
      if (stripped.empty()) continue;
      if (stripped.front() == '[') {
        if (stripped.back() != ']' || stripped.size() < 3) {
          throw ConfigError(origin + ":" + std::to_string(line_no) + ": malformed section header '" +
                            stripped + "'");
        }
        section = trim(stripped.substr(1, stripped.size() - 2));
        continue;
      }
      const auto eq = stripped.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(origin + ":" + std::to_string(line_no) +
                          ": expected key = value, got '" + stripped + "'");
      }
      const std::string key = trim(stripped.substr(0, eq));
      const std::string value = trim(stripped.substr(eq + 1));
      if (key.empty()) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
      }
      if (section.empty()) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": key '" + key +
                          "' appears before any [section]");
      }
      auto& entry = cfg.entries_[section + "." + key];
      entry.value = value;
      entry.line = line_no;
      entry.consumed = false;
    }
    return cfg;
  }

  static ConfigFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
  }

  /// key=value override of the form "section.key=value"; applied as if it
  /// were the last line of its section.
  void apply_override(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || spec.find('.') == std::string::npos ||
        spec.find('.') > eq) {
      throw ConfigError("override must look like section.key=value, got '" + spec + "'");
    }
    const std::string key = trim(spec.substr(0, eq));
    auto& entry = entries_[key];
    entry.value = trim(spec.substr(eq + 1));
    entry.line = 0;
    entry.consumed = false;
  }

  bool has(const std::string& section, const std::string& key) const {
    return entries_.count(section + "." + key) > 0;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) {
    auto it = entries_.find(section + "." + key);
    if (it == entries_.end()) return fallback;
    it->second.consumed = true;
    return it->second.value;
  }

  double get_double(const std::string& section, const std::string& key, double fallback) {
    auto it = entries_.find(section + "." + key);
    if (it == entries_.end()) return fallback;
    it->second.consumed = true;
    return parse_double(it->second.value, section + "." + key, it->second.line);
  }

  int get_int(const std::string& section, const std::string& key, int fallback) {
    auto it = entries_.find(section + "." + key);
    if (it == entries_.end()) return fallback;
    it->second.consumed = true;
    size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(it->second.value, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != it->second.value.size() || it->second.value.empty()) {
      throw ConfigError(where(section + "." + key, it->second.line) + ": expected an integer, got '" +
                        it->second.value + "'");
    }
    return v;
  }

  bool get_bool(const std::string& section, const std::string& key, bool fallback) {
    auto it = entries_.find(section + "." + key);
    if (it == entries_.end()) return fallback;
    it->second.consumed = true;
    const std::string& v = it->second.value;
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(where(section + "." + key, it->second.line) +
                      ": expected true/false, got '" + v + "'");
  }

  /// Comma-separated doubles.
  std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                      std::vector<double> fallback) {
    auto it = entries_.find(section + "." + key);
    if (it == entries_.end()) return fallback;
    it->second.consumed = true;
    std::vector<double> out;
    for (const std::string& item : split(it->second.value, ',')) {
      out.push_back(parse_double(trim(item), section + "." + key, it->second.line));
    }
    return out;
  }

  /// Semicolon-separated groups of comma-separated doubles, e.g.
  /// "0.25,0.5 ; 0.5,0.25".
  std::vector<std::vector<double>> get_tuple_list(const std::string& section,
                                                  const std::string& key) {
    std::vector<std::vector<double>> out;
    auto it = entries_.find(section + "." + key);
    if (it == entries_.end()) return out;
    it->second.consumed = true;
    for (const std::string& group : split(it->second.value, ';')) {
      std::vector<double> tuple;
      for (const std::string& item : split(group, ',')) {
        tuple.push_back(parse_double(trim(item), section + "." + key, it->second.line));
      }
      out.push_back(std::move(tuple));
    }
    return out;
  }

  /// Throws if any key was never consumed, naming the first offender.
  void ensure_all_consumed() const {
    for (const auto& [key, entry] : entries_) {
      if (!entry.consumed) {
        throw ConfigError(where(key, entry.line) + ": unknown key '" + key + "'");
      }
    }
  }

  /// The surviving key=value pairs, for config echo in manifests.
  std::map<std::string, std::string> echo() const {
    std::map<std::string, std::string> out;
    for (const auto& [key, entry] : entries_) out[key] = entry.value;
    return out;
  }

 private:
  struct Entry {
    std::string value;
    int line = 0;
    bool consumed = false;
  };

  static std::string strip_comment(const std::string& s) {
    const auto pos = s.find('#');
    return pos == std::string::npos ? s : s.substr(0, pos);
  }

  static std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(item);
    return out;
  }

  std::string where(const std::string& key, int line) const {
    if (line == 0) return origin_ + " (override " + key + ")";
    return origin_ + ":" + std::to_string(line);
  }

  double parse_double(const std::string& text, const std::string& key, int line) const {
    size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != text.size() || text.empty()) {
      throw ConfigError(where(key, line) + ": expected a number, got '" + text + "'");
    }
    return v;
  }

  std::string origin_;
  std::map<std::string, Entry> entries_;
};

}  // namespace sfw
