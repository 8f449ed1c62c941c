#pragma once

/**
 * @file core.hpp
 *
 * @brief Vocabulary types shared by every hsbench module: statistic families,
 * effect directions, sample designs and the library error type.
 */

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hsbench {

enum class Family { t, F, chi_square, r, z, U, binomial_prop };

enum class Relation { equals, less_than, greater_than };

enum class Direction { positive, negative, none };

/**
 * How the observations behind a statistic were collected. Conversions to
 * Cohen's d and the JZS Bayes factor both depend on it.
 */
enum class DesignKind { independent, paired, one_sample, correlation, contingency, binomial, anova };

/**
 * Sample sizes behind a statistic. `n2` is zero for single-sample designs.
 * For contingency and anova designs `n1` carries the total and `groups` the
 * number of cells along the grouping factor.
 */
struct SampleDesign {
    DesignKind kind = DesignKind::independent;
    double n1 = 0;
    double n2 = 0;
    int groups = 2;

    double total() const { return n1 + n2; }
};

enum class ErrorCode {
    unrecognized_statistic,
    unrecognized_p_value,
    schema_violation,
    missing_evidence,
    zero_variance,
    insufficient_data,
    degenerate_table,
    domain_error,
    unsupported_conversion,
    undefined_effect,
    unsupported_family,
    integration_failure,
    empty_input,
    too_few_participants,
    length_mismatch,
    binding_mismatch,
    coercion_failure,
    degenerate_input,
    io_failure,
};

inline std::string_view to_string(ErrorCode c) {
    switch (c) {
    case ErrorCode::unrecognized_statistic: return "UnrecognizedStatistic";
    case ErrorCode::unrecognized_p_value: return "UnrecognizedPValue";
    case ErrorCode::schema_violation: return "SchemaViolation";
    case ErrorCode::missing_evidence: return "MissingEvidence";
    case ErrorCode::zero_variance: return "ZeroVariance";
    case ErrorCode::insufficient_data: return "InsufficientData";
    case ErrorCode::degenerate_table: return "DegenerateTable";
    case ErrorCode::domain_error: return "DomainError";
    case ErrorCode::unsupported_conversion: return "UnsupportedConversion";
    case ErrorCode::undefined_effect: return "UndefinedEffect";
    case ErrorCode::unsupported_family: return "UnsupportedFamily";
    case ErrorCode::integration_failure: return "IntegrationFailure";
    case ErrorCode::empty_input: return "EmptyInput";
    case ErrorCode::too_few_participants: return "TooFewParticipants";
    case ErrorCode::length_mismatch: return "LengthMismatch";
    case ErrorCode::binding_mismatch: return "BindingMismatch";
    case ErrorCode::coercion_failure: return "CoercionFailure";
    case ErrorCode::degenerate_input: return "DegenerateInput";
    case ErrorCode::io_failure: return "IOFailure";
    }
    return "Unknown";
}

/**
 * Every recoverable failure in the library is reported with this exception.
 * `path()` names the offending JSON field for schema errors and is empty
 * otherwise.
 */
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string path = {})
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), path_(std::move(path)) {}

    ErrorCode code() const { return code_; }
    const std::string& path() const { return path_; }

private:
    ErrorCode code_;
    std::string path_;
};

inline std::string_view to_string(Family f) {
    switch (f) {
    case Family::t: return "t";
    case Family::F: return "F";
    case Family::chi_square: return "chi_square";
    case Family::r: return "r";
    case Family::z: return "z";
    case Family::U: return "U";
    case Family::binomial_prop: return "binomial_prop";
    }
    return "?";
}

inline std::optional<Family> family_from_string(std::string_view s) {
    if (s == "t") return Family::t;
    if (s == "F") return Family::F;
    if (s == "chi_square" || s == "chi2") return Family::chi_square;
    if (s == "r") return Family::r;
    if (s == "z") return Family::z;
    if (s == "U") return Family::U;
    if (s == "binomial_prop" || s == "binomial") return Family::binomial_prop;
    return std::nullopt;
}

inline std::string_view to_string(Relation r) {
    switch (r) {
    case Relation::equals: return "equals";
    case Relation::less_than: return "less_than";
    case Relation::greater_than: return "greater_than";
    }
    return "?";
}

inline std::string_view to_string(Direction d) {
    switch (d) {
    case Direction::positive: return "positive";
    case Direction::negative: return "negative";
    case Direction::none: return "none";
    }
    return "?";
}

inline std::optional<Direction> direction_from_string(std::string_view s) {
    if (s == "positive") return Direction::positive;
    if (s == "negative") return Direction::negative;
    if (s == "none") return Direction::none;
    return std::nullopt;
}

inline std::string_view to_string(DesignKind k) {
    switch (k) {
    case DesignKind::independent: return "independent";
    case DesignKind::paired: return "paired";
    case DesignKind::one_sample: return "one_sample";
    case DesignKind::correlation: return "correlation";
    case DesignKind::contingency: return "contingency";
    case DesignKind::binomial: return "binomial";
    case DesignKind::anova: return "anova";
    }
    return "?";
}

inline std::optional<DesignKind> design_from_string(std::string_view s) {
    if (s == "independent") return DesignKind::independent;
    if (s == "paired") return DesignKind::paired;
    if (s == "one_sample") return DesignKind::one_sample;
    if (s == "correlation") return DesignKind::correlation;
    if (s == "contingency") return DesignKind::contingency;
    if (s == "binomial") return DesignKind::binomial;
    if (s == "anova") return DesignKind::anova;
    return std::nullopt;
}

inline Direction direction_of(double signed_value) {
    if (signed_value > 0) return Direction::positive;
    if (signed_value < 0) return Direction::negative;
    return Direction::none;
}

inline double sign_of(Direction d) {
    switch (d) {
    case Direction::positive: return 1.0;
    case Direction::negative: return -1.0;
    case Direction::none: return 0.0;
    }
    return 0.0;
}

/// Signed families carry their direction in the statistic itself.
inline bool is_signed(Family f) {
    return f == Family::t || f == Family::r || f == Family::z;
}

} // namespace hsbench
