#pragma once

#include <complex>
#include <optional>

namespace sqzcav {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// Three-mirror ring cavity. R2 and R3 only ever enter as their product,
/// with intra-cavity losses folded into it.
class RingCavity {
public:
    /// Throws Error(invalid_argument) if any invariant is violated.
    /// `t1` defaults to 1 - R1 (lossless input mirror).
    RingCavity(double r1_sq, double r2r3_sq, double fsr_hz, double carrier_hz,
               std::optional<double> t1 = std::nullopt);

    /// Builds from the amplitude pair that the reflection fit works in:
    /// sqrt(R1) and sqrt(R1 R2 R3).
    static RingCavity from_amplitudes(double sqrt_r1, double sqrt_r1r2r3, double fsr_hz,
                                      double carrier_hz, std::optional<double> t1 = std::nullopt);

    double r1_sq() const noexcept { return r1_sq_; }
    double r2r3_sq() const noexcept { return r2r3_sq_; }
    double t1() const noexcept { return t1_; }
    double fsr_hz() const noexcept { return fsr_hz_; }
    double carrier_hz() const noexcept { return carrier_hz_; }

    double sqrt_r1() const noexcept;
    /// sqrt(R1 R2 R3), the round-trip amplitude factor.
    double round_trip_amplitude() const noexcept;
    /// Input-mirror loss L1 = 1 - R1 - T1.
    double input_mirror_loss() const noexcept { return 1.0 - r1_sq_ - t1_; }
    double round_trip_length_m() const noexcept { return kSpeedOfLight / fsr_hz_; }

private:
    double r1_sq_;
    double r2r3_sq_;
    double t1_;
    double fsr_hz_;
    double carrier_hz_;
};

/// Carrier detuning (omega_0 - omega_c) / 2pi in hertz. Negative values put
/// the carrier below resonance, so upper sidebands fall inside the line.
struct Detuning {
    double omega_d_hz = 0.0;
};

struct PhaseShifts {
    double carrier;   // phi_c, wrapped to (-pi, pi]
    double sideband;  // phi_s, wrapped to (-pi, pi]
};

/// Wraps an angle to (-pi, pi].
double wrap_phase(double radians) noexcept;

PhaseShifts phase_shifts(const RingCavity& cavity, double omega_d_hz, double omega_hz);

/// r_c(omega_d + omega). Pass a signed `omega_hz` for the lower sideband.
/// Throws Error(singular_cavity) when the resonant denominator vanishes.
std::complex<double> reflection_coefficient(const RingCavity& cavity, double omega_d_hz,
                                            double omega_hz);

/// l_c = sqrt(1 - |r_c|^2). Throws Error(nonphysical_reflectivity) if |r_c| > 1.
double loss_coupling(std::complex<double> r_c);
double loss_coupling(const RingCavity& cavity, double omega_d_hz, double omega_hz);

struct Linewidth {
    double exact_hz;        // arcsine form
    double approx_hz;       // high-finesse form
    bool approx_valid;      // forms agree to 1e-3 relative
};

/// FWHM linewidth gamma/2pi from the round-trip amplitude and FSR.
Linewidth linewidth_from_product(double round_trip_amplitude, double fsr_hz);
Linewidth linewidth(const RingCavity& cavity);

double finesse_from_product(double round_trip_amplitude);
double finesse(const RingCavity& cavity);

double quality_factor(const RingCavity& cavity);

}  // namespace sqzcav
