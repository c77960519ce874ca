#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace gbm {

// Flat key = value configuration file. One pair per line; '#' starts a
// comment; blank lines are skipped; whitespace around keys and values is
// trimmed. Unknown keys are kept so callers can reject or ignore them.
class ConfigFile {
  public:
    ConfigFile() = default;

    // Parses text in the format above. Lines without '=' raise a parse error.
    static ConfigFile parse(const std::string& text);
    static ConfigFile load(const std::string& path);

    bool has(const std::string& key) const;

    // Typed getters. The _or forms return the fallback when the key is
    // absent; the plain forms raise a config error. Malformed values raise
    // a parse error naming the key.
    std::string get_string(const std::string& key) const;
    std::string get_string_or(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool_or(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

  private:
    std::map<std::string, std::string> entries_;
};

} // namespace gbm
