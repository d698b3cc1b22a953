#include "sqzcav/error.hpp"

namespace sqzcav {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid argument";
        case ErrorKind::singular_cavity: return "singular cavity";
        case ErrorKind::nonphysical_reflectivity: return "nonphysical reflectivity";
        case ErrorKind::zero_linewidth: return "zero linewidth";
        case ErrorKind::low_finesse: return "low finesse";
        case ErrorKind::nonphysical_transfer: return "nonphysical transfer";
        case ErrorKind::invalid_covariance: return "invalid covariance";
        case ErrorKind::fit_not_converged: return "fit not converged";
        case ErrorKind::unidentifiable: return "unidentifiable parameters";
        case ErrorKind::config: return "configuration error";
        case ErrorKind::trace_format: return "trace format error";
        case ErrorKind::io: return "i/o error";
    }
    return "unknown error";
}

}  // namespace sqzcav
