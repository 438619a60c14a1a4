#pragma once

#include <stdexcept>
#include <string>

namespace morsdp {

// Error taxonomy shared across the library. The CLI maps these onto exit
// codes: parse/validation/domain errors exit 2, budget errors exit 3,
// everything else (numeric failures, bad queries, internal bugs) exits 1.

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input document: JSON syntax, wrong value types, unknown keys.
struct ParseError : Error {
    using Error::Error;
};

// Well-formed input that violates a model invariant (row sums, cost bounds,
// arity mismatches, non-monotone utilities, ...).
struct ValidationError : Error {
    using Error::Error;
};

// Evaluation outside a function's domain (log of a non-positive value,
// conditioning on an impossible observation).
struct DomainError : Error {
    using Error::Error;
};

// A configured resource cap was exceeded (reachable-state or atom budgets).
// Never silently truncates; the message names the cap and the count reached.
struct BudgetError : Error {
    using Error::Error;
};

// Numeric failure: bracket gap refusing to contract, iteration limits,
// inconsistent filter supports.
struct NumericError : Error {
    using Error::Error;
};

// Malformed query against a solved policy (infeasible history transitions,
// horizon overruns).
struct QueryError : Error {
    using Error::Error;
};

}  // namespace morsdp
