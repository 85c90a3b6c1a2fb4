#pragma once

#include <stdexcept>
#include <string>

namespace tvdiff {

/// Failure categories surfaced by the CLI as exit codes.
enum class ErrorCategory { config = 2, data = 3, numerical = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

    const char* category_name() const noexcept {
        switch (category_) {
            case ErrorCategory::config: return "config_error";
            case ErrorCategory::data: return "data_error";
            case ErrorCategory::numerical: return "numerical_error";
        }
        return "error";
    }

private:
    ErrorCategory category_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& what) : Error(ErrorCategory::numerical, what) {}
};

}  // namespace tvdiff
