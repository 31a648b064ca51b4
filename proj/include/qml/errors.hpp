#pragma once

#include <stdexcept>
#include <string>

namespace qml {

// Failure classes surfaced by the library. Each concrete exception pins an
// ErrorKind so callers (and the CLI exit-status mapping) can dispatch without
// dynamic_cast chains.
enum class ErrorKind {
    shape,              // dimension / factor-structure mismatch
    zero_vector,        // a ket that must be nonzero is numerically zero
    observable,         // basis fails validation (count, orthonormality)
    not_unitary,        // operator fails the unitarity check
    linearity,          // a consumed handle was used again
    impossible_outcome, // chosen outcome fails the admissibility screens
    no_admissible,      // every outcome of the observable is screened out
    not_product,        // split requested across a non-product judgement
    subject,            // bad subject tuple (overlap, duplicates, unknown id)
    seed,               // oracle: assumptions contradict or overlap
    replay,             // oracle: recorded outcome has zero Born probability
    parse,              // scenario text rejected with a diagnostic
    binding,            // unbound or ill-typed script parameter
    io,                 // file could not be read
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::shape: return "shape";
    case ErrorKind::zero_vector: return "zero-vector";
    case ErrorKind::observable: return "observable";
    case ErrorKind::not_unitary: return "not-unitary";
    case ErrorKind::linearity: return "linearity";
    case ErrorKind::impossible_outcome: return "impossible-outcome";
    case ErrorKind::no_admissible: return "no-admissible-outcome";
    case ErrorKind::not_product: return "not-a-product-state";
    case ErrorKind::subject: return "subject";
    case ErrorKind::seed: return "seed";
    case ErrorKind::replay: return "replay";
    case ErrorKind::parse: return "parse";
    case ErrorKind::binding: return "binding";
    case ErrorKind::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& w) : Error(ErrorKind::shape, w) {}
};

struct ZeroVectorError : Error {
    explicit ZeroVectorError(const std::string& w) : Error(ErrorKind::zero_vector, w) {}
};

struct ObservableError : Error {
    explicit ObservableError(const std::string& w) : Error(ErrorKind::observable, w) {}
};

struct NotUnitaryError : Error {
    explicit NotUnitaryError(const std::string& w) : Error(ErrorKind::not_unitary, w) {}
};

struct LinearityViolation : Error {
    explicit LinearityViolation(const std::string& w) : Error(ErrorKind::linearity, w) {}
};

struct ImpossibleOutcome : Error {
    explicit ImpossibleOutcome(const std::string& w) : Error(ErrorKind::impossible_outcome, w) {}
};

struct NoAdmissibleOutcome : Error {
    explicit NoAdmissibleOutcome(const std::string& w) : Error(ErrorKind::no_admissible, w) {}
};

struct NotAProductState : Error {
    explicit NotAProductState(const std::string& w) : Error(ErrorKind::not_product, w) {}
};

struct SubjectError : Error {
    explicit SubjectError(const std::string& w) : Error(ErrorKind::subject, w) {}
};

struct SeedError : Error {
    explicit SeedError(const std::string& w) : Error(ErrorKind::seed, w) {}
};

struct ReplayMismatch : Error {
    explicit ReplayMismatch(const std::string& w) : Error(ErrorKind::replay, w) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& w) : Error(ErrorKind::parse, w) {}
};

struct BindingError : Error {
    explicit BindingError(const std::string& w) : Error(ErrorKind::binding, w) {}
};

struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};

} // namespace qml
