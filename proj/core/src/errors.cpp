#include "xvapinn/errors.hpp"

#include <utility>

namespace xvapinn {

namespace {

std::string numeric_message(const std::string& what, const std::string& region,
                            std::ptrdiff_t index) {
    if (region.empty()) return what;
    std::string msg = what + " (region '" + region + "'";
    if (index >= 0) msg += ", point " + std::to_string(index);
    return msg + ")";
}

}  // namespace

NumericError::NumericError(const std::string& what, std::string region,
                           std::ptrdiff_t point_index)
    : std::runtime_error(numeric_message(what, region, point_index)),
      region_(std::move(region)),
      point_index_(point_index) {}

ValidationError::ValidationError(const std::string& field, const std::string& message)
    : std::runtime_error(field + ": " + message), field_(field) {}

}  // namespace xvapinn
