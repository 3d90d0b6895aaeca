#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rkl {

// Flat key-value configuration. The file format is INI-like: `key = value`
// lines, optional `[section]` headers (cosmetic grouping only; keys are
// globally unique and looked up without any section prefix), and full-line
// comments starting with '#' or ';'. Overrides of the form `key=value`
// replace or add single entries.
class ConfigMap {
  public:
    static ConfigMap from_file(const std::string& path);
    static ConfigMap from_string(const std::string& text, const std::string& origin = "<string>");

    void apply_override(const std::string& assignment);

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<std::uint64_t> get_u64_list(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    // Canonical one-line rendering "k1=v1; k2=v2; ..." sorted by key; embedded
    // in every artifact as the resolved configuration.
    std::string echo_line() const;

    const std::map<std::string, std::string>& entries() const { return values_; }

  private:
    std::map<std::string, std::string> values_;
};

} // namespace rkl
