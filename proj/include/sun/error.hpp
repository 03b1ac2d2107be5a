#pragma once

#include <stdexcept>
#include <string>

namespace sun {

// Shape/contract violations inside the numeric core.
struct dimension_error : std::runtime_error {
    explicit dimension_error(const std::string& what) : std::runtime_error(what) {}
};

// Bad user input: corpus files, configs, out-of-grammar SQL.
struct data_error : std::runtime_error {
    explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

struct config_error : data_error {
    explicit config_error(const std::string& what) : data_error(what) {}
};

struct parse_error : data_error {
    parse_error(const std::string& what, std::size_t position)
        : data_error(what + " (at position " + std::to_string(position) + ")"), pos(position) {}
    std::size_t pos;
};

// Non-finite losses, failed gradient checks.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sun
