#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>

namespace rain {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Query text could not be tokenized/parsed; `position` is a byte offset.
struct ParseError : Error {
    ParseError(std::string msg, std::size_t pos)
        : Error(msg + " (at position " + std::to_string(pos) + ")"), position(pos) {}
    std::size_t position;
};

/// Plan refers to unknown relations/attributes or is ill-typed.
struct ValidationError : Error {
    using Error::Error;
};

/// CSV / file-level problems.
struct DataError : Error {
    using Error::Error;
};

/// Runtime evaluation problems (missing view, unknown complaint target, ...).
struct EvalError : Error {
    using Error::Error;
};

/// An enumeration cap (threshold compilation, DNF expansion, exact expectation) was exceeded.
struct CapError : Error {
    using Error::Error;
};

struct CgError : Error {
    CgError(std::string msg, double achieved_residual)
        : Error(std::move(msg)), achieved(achieved_residual) {}
    double achieved;
};

struct IlpInfeasibleError : Error {
    using Error::Error;
};

struct IlpTimeoutError : Error {
    using Error::Error;
};

/// Complaint shape the ILP compiler cannot express.
struct UnsupportedError : Error {
    using Error::Error;
};

enum class ColumnKind { Integer, Real, Text, Boolean };

using Value = std::variant<std::int64_t, double, std::string, bool>;

/// Identifies one queried row across relations. Row ids are unique within a
/// relation, not across them, so the relation name is part of the key.
struct RowKey {
    std::string rel;
    std::int64_t row = 0;
    auto operator<=>(const RowKey&) const = default;
};

std::string kind_name(ColumnKind k);
double value_as_real(const Value& v);
std::string value_to_string(const Value& v);

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

/// Thread cap from RAIN_THREADS (>=1); defaults to hardware concurrency.
int thread_cap();

} // namespace rain
