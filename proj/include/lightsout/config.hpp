#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace lightsout {

// Flat key = value text. Section headers like [pipeline] are allowed for
// grouping but carry no meaning: lookup is by bare key, later entries win.
// Full-line comments start with # or ;.
class FlatConfig {
 public:
  static FlatConfig parse_text(const std::string& text, const std::string& origin = "<text>") {
    FlatConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#' || t[0] == ';') continue;
      if (t.front() == '[' && t.back() == ']') continue;
      const std::size_t eq = t.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                    ": expected key = value, got \"" + t + "\"");
      const std::string key = trim(t.substr(0, eq));
      if (key.empty())
        throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": empty key");
      cfg.kv_[key] = trim(t.substr(eq + 1));
    }
    return cfg;
  }

  static FlatConfig parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path);
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  const std::string& get(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw std::invalid_argument("config: missing key " + key);
    return it->second;
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  static std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  std::map<std::string, std::string> kv_;
};

}  // namespace lightsout
