#pragma once

#include <stdexcept>
#include <string>

namespace ensemblier {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file (bad header, wrong column count, unparsable field).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Structurally valid input that violates a contract (label range, non-finite
/// score, misaligned members, empty selection).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Split protocol cannot be applied (e.g. fewer samples than folds).
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Ensemble recipe resolves to no members.
class RecipeError : public Error {
public:
    using Error::Error;
};

/// A classifier identity is missing on one of the datasets of a protocol run.
class CoverageError : public Error {
public:
    using Error::Error;
};

/// Optimization produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Combinatorial budget exceeded (exhaustive search guard).
class BudgetError : public Error {
public:
    using Error::Error;
};

} // namespace ensemblier
