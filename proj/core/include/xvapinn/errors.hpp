#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xvapinn {

/// Violated precondition: wrong dimensions, malformed architecture, bad enum.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A non-finite value showed up in a computation. Carries where it happened
/// when the failing quantity is attached to a collocation region.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what, std::string region = {},
                          std::ptrdiff_t point_index = -1);

    const std::string& region() const noexcept { return region_; }
    std::ptrdiff_t point_index() const noexcept { return point_index_; }

private:
    std::string region_;
    std::ptrdiff_t point_index_;
};

/// Checkpoint / surface / config documents that do not match the expected layout.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Experiment configuration problems; the message starts with the field path.
class ValidationError : public std::runtime_error {
public:
    ValidationError(const std::string& field, const std::string& message);

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace xvapinn
