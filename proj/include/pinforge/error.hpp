#pragma once

#include <stdexcept>
#include <string>

namespace pinforge {

/// Every recoverable failure in the toolkit surfaces as this type; the
/// message is a one-line diagnostic suitable for the CLI.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pinforge
