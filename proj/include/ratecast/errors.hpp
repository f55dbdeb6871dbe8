#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ratecast {

// Shape or size mismatch between operands.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Violated precondition on an otherwise well-formed call.
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Rejected configuration value.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Text that does not parse. Carries the character offset of the failure.
struct ParseError : std::runtime_error {
    std::size_t position;
    ParseError(const std::string& msg, std::size_t pos)
        : std::runtime_error(msg + " (at position " + std::to_string(pos) + ")"),
          position(pos) {}
};

// Planning cannot satisfy the divisibility constraints of a schedule.
struct PlanError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite state encountered during training or sampling.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem or serialization failure.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void check_dim(bool ok, const std::string& msg) {
    if (!ok) throw DimensionError(msg);
}

inline void check_contract(bool ok, const std::string& msg) {
    if (!ok) throw ContractError(msg);
}

inline void check_config(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

}  // namespace ratecast
