#pragma once

#include <stdexcept>
#include <string>

namespace etchr {

// Error taxonomy shared across the library. Every class maps to a CLI exit
// code: ValidationError/ParseError/ConfigError/IoError -> 1,
// TransportError/ProtocolError -> 2.

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Connection-level failure: unreachable endpoint, timeout, retries exhausted.
struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The endpoint answered but the payload violates the wire contract.
struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace etchr
