#include "rkl/config.hpp"

#include <fstream>
#include <sstream>

#include "rkl/errors.hpp"

namespace rkl {
namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

} // namespace

ConfigMap ConfigMap::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str(), path);
}

ConfigMap ConfigMap::from_string(const std::string& text, const std::string& origin) {
    ConfigMap cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": unterminated section");
            continue; // sections are cosmetic
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (cfg.values_.count(key))
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                              "' (keys are global across sections)");
        cfg.values_[key] = value;
    }
    return cfg;
}

void ConfigMap::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty())
        throw ConfigError("malformed override '" + assignment + "', expected key=value");
    values_[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

std::string ConfigMap::get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required config key '" + key + "'");
    return it->second;
}

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

namespace {

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
    }
}

long long parse_ll(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
    }
}

} // namespace

double ConfigMap::get_double(const std::string& key) const {
    return parse_double(key, get_string(key));
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

int ConfigMap::get_int(const std::string& key) const {
    return static_cast<int>(parse_ll(key, get_string(key)));
}

int ConfigMap::get_int(const std::string& key, int fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::uint64_t ConfigMap::get_u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const long long v = parse_ll(key, get_string(key));
    if (v < 0) throw ConfigError("config key '" + key + "' must be non-negative");
    return static_cast<std::uint64_t>(v);
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<double> ConfigMap::get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_commas(get_string(key))) out.push_back(parse_double(key, item));
    return out;
}

std::vector<std::uint64_t> ConfigMap::get_u64_list(const std::string& key) const {
    std::vector<std::uint64_t> out;
    for (const auto& item : split_commas(get_string(key))) {
        const long long v = parse_ll(key, item);
        if (v < 0) throw ConfigError("config key '" + key + "' entries must be non-negative");
        out.push_back(static_cast<std::uint64_t>(v));
    }
    return out;
}

std::vector<int> ConfigMap::get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (const auto& item : split_commas(get_string(key)))
        out.push_back(static_cast<int>(parse_ll(key, item)));
    return out;
}

std::string ConfigMap::echo_line() const {
    std::string out;
    for (const auto& [k, v] : values_) {
        if (!out.empty()) out += "; ";
        out += k + "=" + v;
    }
    return out;
}

} // namespace rkl
