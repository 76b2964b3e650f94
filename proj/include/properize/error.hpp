#pragma once

#include <stdexcept>
#include <string>

namespace properize {

enum class ErrorCode {
    incompatible_rule,
    degenerate_forecast,
    weight_mass_zero,
    no_density,
    unbounded_support,
    quadrature_failure,
    budget_exceeded,
    invalid_shape,
    invalid_distribution,
    invalid_rule,
    no_bayes_act,
    parse_error,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace properize
