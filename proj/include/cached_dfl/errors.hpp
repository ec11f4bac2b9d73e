#pragma once

#include <stdexcept>
#include <string>

namespace cached_dfl {

/// Raised when a configuration or an operation argument violates its contract.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for file-system failures; the message always names the path.
class IoError : public std::runtime_error {
public:
    IoError(const std::string& path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(path) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace cached_dfl
