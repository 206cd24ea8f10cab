#pragma once

#include <stdexcept>
#include <string>

namespace stabcert {

/// Raised when a coefficient model (or a parameter choice derived from it)
/// violates one of the admissibility conditions the certificate needs.
struct inadmissible_error : std::runtime_error {
    explicit inadmissible_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a certified-bound computation cannot proceed because one of
/// its hypotheses fails on the sampled horizon; the message names the clause.
struct hypothesis_violation : std::runtime_error {
    explicit hypothesis_violation(const std::string& what) : std::runtime_error(what) {}
};

/// Raised on malformed configuration documents (missing field, bad type,
/// unknown preset). Carries enough context to print a useful diagnostic.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace stabcert
