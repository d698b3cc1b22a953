#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "sqzcav/cavity.hpp"
#include "sqzcav/two_photon.hpp"

namespace sqzcav {

/// Narrow Gaussian instrument artifact added to both quadratures.
struct Spur {
    double center_hz = 13.3e6;
    double height_linear = 0.5;
    double width_hz = 50e3;  // FWHM
};

struct MeasurementConfig {
    double rbw_hz = 100e3;
    double n_averages = 100.0;  // effective number of averages
    std::optional<Spur> spur;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Boxcar average over points within +/- rbw/2 of each frequency. Truncated
/// windows at the ends.
QuadratureSpectrum rbw_smooth(const QuadratureSpectrum& spectrum, double rbw_hz);

/// Mean used by the synthesizer and by the estimator: model spectrum, spur,
/// then RBW smoothing. No noise.
QuadratureSpectrum expected_trace(const RingCavity& cavity, Detuning detuning,
                                  const InputSqueezingModel& squeezing,
                                  const DetectionModel& detection, const MeasurementConfig& config,
                                  std::span<const double> freqs_hz);

/// Noisy analyzer trace: Gaussian scatter with std sqrt(2) V / sqrt(N),
/// drawn per grid index so the result is order independent.
QuadratureSpectrum synthesize_trace(const RingCavity& cavity, Detuning detuning,
                                    const InputSqueezingModel& squeezing,
                                    const DetectionModel& detection,
                                    const MeasurementConfig& config,
                                    std::span<const double> freqs_hz);

/// Gaussian draw V + sigma z with sigma = sqrt(2) V / sqrt(n_averages) and z
/// indexed by grid point. Not clipped, so it can go negative for small N.
QuadratureSpectrum gaussian_measurement_draw(const QuadratureSpectrum& mean, double n_averages,
                                             std::uint64_t seed);

/// gaussian_measurement_draw clipped to stay above 1e-6 of the mean.
QuadratureSpectrum add_measurement_noise(const QuadratureSpectrum& mean, double n_averages,
                                         std::uint64_t seed);

std::vector<double> linear_grid(double start_hz, double stop_hz, std::size_t points);

}  // namespace sqzcav
