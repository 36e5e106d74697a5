#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cplab {

// Flat key = value config files. Lines starting with '#' (after whitespace)
// and blank lines are skipped. Keys may be dotted (corpus.fps). Values are
// plain tokens or comma-separated lists. Example:
//
//   # desk-scale corpus
//   corpus.n_videos = 8
//   corpus.fps      = 10
//   ratios          = 0, 0.5, 1.0
class Config {
  public:
    Config() = default;

    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    // Typed getters. The no-default forms throw ConfigError when the key is
    // missing; all forms throw on a value that does not parse.
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    int64_t get_int(const std::string& key) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::string> get_string_list(const std::string& key) const;
    std::vector<std::string> get_string_list(const std::string& key, const std::vector<std::string>& fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    const std::map<std::string, std::string>& entries() const { return values_; }

  private:
    std::string origin_ = "<empty>";
    std::map<std::string, std::string> values_;
};

}  // namespace cplab
