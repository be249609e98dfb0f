#pragma once

// Flat `key = value` run configuration.
//
// Lines are `key = value`; blank lines and lines starting with '#' are
// ignored. Every key must be known. Values set in a file or through --set
// override the built-in defaults; `ppo.*` keys left unset follow the
// per-environment defaults of env.kind.

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace helm::cli {

/// Bad key, bad value or unreadable config file. Maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Config {
public:
    /// Built-in defaults for every known key.
    Config();

    void load_file(const std::filesystem::path& path);
    /// Parses one `key=value` assignment.
    void assign(const std::string& assignment);
    void set(const std::string& key, const std::string& value);

    bool known(const std::string& key) const { return values_.count(key) != 0; }
    bool explicitly_set(const std::string& key) const { return explicit_.count(key) != 0; }

    const std::string& str(const std::string& key) const;
    double number(const std::string& key) const;
    long integer(const std::string& key) const;
    std::uint64_t seed() const;
    bool flag(const std::string& key) const;
    std::vector<double> numbers(const std::string& key) const;

    /// Fills unset ppo.* keys from env.kind and checks every value; throws
    /// ConfigError naming the first problem.
    void resolve();

    /// Every key with its resolved value, sorted, one `key = value` per line.
    std::string text() const;
    void write(const std::filesystem::path& path) const;

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, bool> explicit_;
};

}  // namespace helm::cli
