#include "sqzcav/cavity.hpp"

#include <cmath>
#include <sstream>

#include "sqzcav/error.hpp"

namespace sqzcav {
namespace {

constexpr double kSingularTol = 1e-12;
constexpr double kReflectivityTol = 1e-12;

[[noreturn]] void invalid(const std::string& what) {
    throw Error(ErrorKind::invalid_argument, "RingCavity: " + what);
}

}  // namespace

RingCavity::RingCavity(double r1_sq, double r2r3_sq, double fsr_hz, double carrier_hz,
                       std::optional<double> t1)
    : r1_sq_(r1_sq),
      r2r3_sq_(r2r3_sq),
      t1_(t1.value_or(1.0 - r1_sq)),
      fsr_hz_(fsr_hz),
      carrier_hz_(carrier_hz) {
    if (!(r1_sq_ > 0.0 && r1_sq_ <= 1.0)) invalid("R1 must lie in (0, 1]");
    if (!(r2r3_sq_ > 0.0 && r2r3_sq_ <= 1.0)) invalid("R2R3 must lie in (0, 1]");
    if (!(t1_ >= 0.0)) invalid("T1 must be non-negative");
    if (t1_ + r1_sq_ > 1.0 + 1e-15) invalid("T1 + R1 must not exceed 1");
    if (!(std::isfinite(fsr_hz_) && fsr_hz_ > 0.0)) invalid("fsr_hz must be finite and > 0");
    if (!(std::isfinite(carrier_hz_) && carrier_hz_ > 0.0)) {
        invalid("carrier_hz must be finite and > 0");
    }
}

RingCavity RingCavity::from_amplitudes(double sqrt_r1, double sqrt_r1r2r3, double fsr_hz,
                                       double carrier_hz, std::optional<double> t1) {
    if (!(sqrt_r1 > 0.0)) invalid("sqrt(R1) must be > 0");
    const double r1 = sqrt_r1 * sqrt_r1;
    return RingCavity(r1, sqrt_r1r2r3 * sqrt_r1r2r3 / r1, fsr_hz, carrier_hz, t1);
}

double RingCavity::sqrt_r1() const noexcept { return std::sqrt(r1_sq_); }

double RingCavity::round_trip_amplitude() const noexcept {
    return std::sqrt(r1_sq_ * r2r3_sq_);
}

double wrap_phase(double radians) noexcept {
    double wrapped = std::remainder(radians, 2.0 * kPi);  // [-pi, pi]
    if (wrapped <= -kPi) wrapped += 2.0 * kPi;
    return wrapped;
}

PhaseShifts phase_shifts(const RingCavity& cavity, double omega_d_hz, double omega_hz) {
    return {wrap_phase(2.0 * kPi * omega_d_hz / cavity.fsr_hz()),
            wrap_phase(2.0 * kPi * omega_hz / cavity.fsr_hz())};
}

std::complex<double> reflection_coefficient(const RingCavity& cavity, double omega_d_hz,
                                            double omega_hz) {
    // The total round-trip phase is wrapped once so shifting by an FSR is exact
    // up to the rounding of the frequency sum.
    const double phase = wrap_phase(2.0 * kPi * (omega_d_hz + omega_hz) / cavity.fsr_hz());
    const std::complex<double> round_trip = std::polar(1.0, -phase);
    const std::complex<double> denominator = 1.0 - cavity.round_trip_amplitude() * round_trip;
    if (std::abs(denominator) < kSingularTol) {
        std::ostringstream msg;
        msg << "reflection denominator vanishes at round-trip phase " << phase
            << " rad (R1 R2 R3 = 1 on resonance)";
        throw Error(ErrorKind::singular_cavity, msg.str());
    }
    const double sqrt_r2r3 = std::sqrt(cavity.r2r3_sq());
    return cavity.sqrt_r1() - cavity.t1() * sqrt_r2r3 * round_trip / denominator;
}

double loss_coupling(std::complex<double> r_c) {
    const double power = std::norm(r_c);
    if (power > 1.0 + kReflectivityTol) {
        std::ostringstream msg;
        msg << "|r_c|^2 = " << power << " exceeds unity";
        throw Error(ErrorKind::nonphysical_reflectivity, msg.str());
    }
    return std::sqrt(std::max(0.0, 1.0 - power));
}

double loss_coupling(const RingCavity& cavity, double omega_d_hz, double omega_hz) {
    return loss_coupling(reflection_coefficient(cavity, omega_d_hz, omega_hz));
}

Linewidth linewidth_from_product(double round_trip_amplitude, double fsr_hz) {
    const double s = round_trip_amplitude;
    if (!(s > 0.0 && s <= 1.0)) {
        throw Error(ErrorKind::invalid_argument, "round-trip amplitude must lie in (0, 1]");
    }
    if (s == 1.0) {
        throw Error(ErrorKind::zero_linewidth, "R1 R2 R3 = 1: lossless cavity has zero linewidth");
    }
    const double quarter_root = std::sqrt(s);  // (R1 R2 R3)^(1/4)
    const double argument = (1.0 - s) / (2.0 * quarter_root);
    if (argument > 1.0) {
        std::ostringstream msg;
        msg << "low-finesse regime: arcsine argument " << argument
            << " > 1, resonance never falls to half maximum";
        throw Error(ErrorKind::low_finesse, msg.str());
    }
    Linewidth lw{};
    lw.exact_hz = (2.0 / kPi) * fsr_hz * std::asin(argument);
    lw.approx_hz = (1.0 - s) / (kPi * quarter_root) * fsr_hz;
    lw.approx_valid = std::abs(lw.approx_hz - lw.exact_hz) <= 1e-3 * lw.exact_hz;
    return lw;
}

Linewidth linewidth(const RingCavity& cavity) {
    return linewidth_from_product(cavity.round_trip_amplitude(), cavity.fsr_hz());
}

double finesse_from_product(double round_trip_amplitude) {
    const double s = round_trip_amplitude;
    if (!(s > 0.0 && s <= 1.0)) {
        throw Error(ErrorKind::invalid_argument, "round-trip amplitude must lie in (0, 1]");
    }
    if (s == 1.0) {
        throw Error(ErrorKind::zero_linewidth, "R1 R2 R3 = 1: finesse is infinite");
    }
    return kPi * std::sqrt(s) / (1.0 - s);
}

double finesse(const RingCavity& cavity) {
    return finesse_from_product(cavity.round_trip_amplitude());
}

double quality_factor(const RingCavity& cavity) {
    const double gamma = linewidth(cavity).exact_hz;
    if (!(gamma > 0.0)) {
        throw Error(ErrorKind::zero_linewidth, "quality factor undefined for zero linewidth");
    }
    return cavity.carrier_hz() / gamma;
}

}  // namespace sqzcav
