#pragma once

#include <complex>
#include <cstdint>

#include "sqzcav/cavity.hpp"
#include "sqzcav/two_photon.hpp"

namespace sqzcav::oracle {

/// Second moments of a stationary field at the sideband pair +/-Omega,
/// normalized per 2*pi*delta:
///   n_upper     = <a^dag(+Omega) a(+Omega)>
///   n_lower     = <a^dag(-Omega) a(-Omega)>
///   correlation = <a(+Omega) a(-Omega)>
/// <a^dag(+Omega) a(-Omega)> vanishes for stationary fields and is not stored.
struct SidebandState {
    double n_upper = 0.0;
    double n_lower = 0.0;
    std::complex<double> correlation{};

    static SidebandState vacuum() { return {}; }
    /// Symmetric state with real correlation reproducing (v1, v2).
    static SidebandState from_quadratures(double v1, double v2);

    /// Symmetrized quadrature spectra of a1 = a(+) + a^dag(-), a2 = -i(a(+) - a^dag(-)).
    QuadraturePair quadratures() const noexcept;

    /// Throws Error(invalid_argument) for negative occupations or a
    /// correlation exceeding the Gaussian bound.
    void validate() const;
};

/// Pushes the moments through cavity-coupled reflection, prompt reflection of
/// the mismatched mode, both vacuum ports and the detection efficiencies.
/// Returns the moments of the detected field.
SidebandState propagate_sidebands(const RingCavity& cavity, Detuning detuning,
                                  const DetectionModel& detection, const SidebandState& input,
                                  double omega_hz);

struct MonteCarloEstimate {
    double v1;
    double v2;
    double stderr1;
    double stderr2;
};

inline constexpr std::size_t kMinMonteCarloSamples = 1000;

/// Samples Wigner-distributed sideband amplitudes, applies the reflection and
/// explicit beamsplitter vacuum admixtures, and estimates the quadrature
/// variances. Deterministic for a fixed seed.
MonteCarloEstimate monte_carlo_variances(const RingCavity& cavity, Detuning detuning,
                                         const InputSqueezingModel& squeezing,
                                         const DetectionModel& detection, double omega_hz,
                                         std::size_t n_samples, std::uint64_t seed);

}  // namespace sqzcav::oracle
