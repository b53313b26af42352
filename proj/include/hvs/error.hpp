#ifndef HVS_ERROR_HPP
#define HVS_ERROR_HPP

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hvs {

enum class ErrorKind {
    NonProbability,
    NonIntegerSize,
    DegenerateSize,
    ZeroPrefix,
    OutOfRange,
    NumericalUnderflow,
    ProbabilityOverflow,
    DivideByZero,
    TooLarge,
    DimensionMismatch,
    ZeroJoint,
    TooSmall,
    Saturated,
    InfeasibleGrid,
    TooFewReplicates,
    InvalidInput,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::NonProbability: return "NonProbability";
        case ErrorKind::NonIntegerSize: return "NonIntegerSize";
        case ErrorKind::DegenerateSize: return "DegenerateSize";
        case ErrorKind::ZeroPrefix: return "ZeroPrefix";
        case ErrorKind::OutOfRange: return "OutOfRange";
        case ErrorKind::NumericalUnderflow: return "NumericalUnderflow";
        case ErrorKind::ProbabilityOverflow: return "ProbabilityOverflow";
        case ErrorKind::DivideByZero: return "DivideByZero";
        case ErrorKind::TooLarge: return "TooLarge";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::ZeroJoint: return "ZeroJoint";
        case ErrorKind::TooSmall: return "TooSmall";
        case ErrorKind::Saturated: return "Saturated";
        case ErrorKind::InfeasibleGrid: return "InfeasibleGrid";
        case ErrorKind::TooFewReplicates: return "TooFewReplicates";
        case ErrorKind::InvalidInput: return "InvalidInput";
    }
    return "Unknown";
}

/// Validation or numerical failure raised by the library.
///
/// `unit()` carries the zero-based caller-space index of the offending unit
/// when the failure can be pinned to one.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string detail, std::optional<std::size_t> unit = std::nullopt)
        : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
          kind_(kind),
          detail_(std::move(detail)),
          unit_(unit) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }
    std::optional<std::size_t> unit() const noexcept { return unit_; }

private:
    ErrorKind kind_;
    std::string detail_;
    std::optional<std::size_t> unit_;
};

}  // namespace hvs

#endif  // HVS_ERROR_HPP
