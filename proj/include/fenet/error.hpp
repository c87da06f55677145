#pragma once

#include <stdexcept>
#include <string>

namespace fenet {

// Errors are grouped by what the caller can do about them. The CLI maps
// each group to its own exit code.
enum class error_kind { config, data, numerical };

class error : public std::runtime_error
{
public:
    error(error_kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    error_kind kind() const noexcept { return kind_; }

private:
    error_kind kind_;
};

// Invalid hyperparameters, configuration or arguments.
class config_error : public error
{
public:
    explicit config_error(const std::string& what)
        : error(error_kind::config, what) {}
};

// Malformed or incompatible data: grid mismatch, bad CSV schema, shape errors.
class data_error : public error
{
public:
    explicit data_error(const std::string& what)
        : error(error_kind::data, what) {}
};

// Singular systems, non-PSD kernels, root-finder failures, non-finite values.
class numerical_error : public error
{
public:
    explicit numerical_error(const std::string& what)
        : error(error_kind::numerical, what) {}
};

} // namespace fenet
