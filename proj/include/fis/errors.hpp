#pragma once

#include <stdexcept>
#include <string>

namespace fis {

// Violation of an internal precondition between modules (caller bug).
class contract_error : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Bad run configuration (rejected before any compute starts).
class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A diagnostics self-check failed; the message lists the offending indices.
class diagnostic_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fis
