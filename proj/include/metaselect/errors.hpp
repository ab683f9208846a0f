#pragma once

#include <stdexcept>
#include <string>

namespace metaselect {

// Input problems: malformed files, schema mismatches, precondition
// violations on the data itself. The CLI maps these to exit code 3.
class DataError : public std::runtime_error {
public:
    enum class Kind {
        MissingColumn,
        NonNumericValue,
        NonPositiveVariance,
        MissingValue,
        MultiLevelCategorical,
        ZeroVariance,
        MarginalityViolation,
        IndexOutOfRange,
        Overflow,
        AllMissingColumn,
        EmptyGroup,
        InvalidArgument,
    };

    DataError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

// Failures of the numerical machinery (rank deficiency, too few degrees
// of freedom, ...). The CLI maps these to exit code 4.
class NumericalError : public std::runtime_error {
public:
    enum class Kind {
        DimensionMismatch,
        SingularDesign,
        InsufficientDF,
        ZeroStandardError,
        DegenerateCorrection,
        DegenerateVariance,
    };

    NumericalError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace metaselect
