#include "gbm/config.hpp"

#include "gbm/error.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace gbm {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

} // namespace

ConfigFile ConfigFile::parse(const std::string& text) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string stripped = trim(line);
        if (stripped.empty()) continue;
        std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw GbmError(ErrorCode::parse,
                           "line " + std::to_string(lineno) + " has no '='");
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw GbmError(ErrorCode::parse,
                           "line " + std::to_string(lineno) + " has an empty key");
        cfg.entries_[key] = value;
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw GbmError(ErrorCode::io, "cannot open " + path);
    std::ostringstream text;
    text << in.rdbuf();
    if (in.bad()) throw GbmError(ErrorCode::io, "cannot read " + path);
    return parse(text.str());
}

bool ConfigFile::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string ConfigFile::get_string(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end())
        throw GbmError(ErrorCode::config, "missing key '" + key + "'");
    return it->second;
}

std::string ConfigFile::get_string_or(const std::string& key,
                                      const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

std::int64_t ConfigFile::get_int(const std::string& key) const {
    std::string v = get_string(key);
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw GbmError(ErrorCode::parse, "key '" + key + "' is not an integer: " + v);
    return out;
}

std::int64_t ConfigFile::get_int_or(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

double ConfigFile::get_double(const std::string& key) const {
    std::string v = get_string(key);
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw GbmError(ErrorCode::parse, "key '" + key + "' is not a number: " + v);
    return out;
}

double ConfigFile::get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

bool ConfigFile::get_bool(const std::string& key) const {
    std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw GbmError(ErrorCode::parse, "key '" + key + "' is not a boolean: " + v);
}

bool ConfigFile::get_bool_or(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

} // namespace gbm
