#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sqzcav {

enum class ErrorKind {
    invalid_argument,
    singular_cavity,
    nonphysical_reflectivity,
    zero_linewidth,
    low_finesse,
    nonphysical_transfer,
    invalid_covariance,
    fit_not_converged,
    unidentifiable,
    config,
    trace_format,
    io,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised when the fit Jacobian is rank deficient. `direction` is the
/// offending combination of floated parameters (unit vector, fit order).
class UnidentifiableError : public Error {
public:
    UnidentifiableError(const std::string& message, std::vector<std::string> names,
                        std::vector<double> direction)
        : Error(ErrorKind::unidentifiable, message),
          names_(std::move(names)),
          direction_(std::move(direction)) {}

    const std::vector<std::string>& parameter_names() const noexcept { return names_; }
    const std::vector<double>& direction() const noexcept { return direction_; }

private:
    std::vector<std::string> names_;
    std::vector<double> direction_;
};

}  // namespace sqzcav
