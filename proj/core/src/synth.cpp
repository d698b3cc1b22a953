#include "sqzcav/synth.hpp"

#include <algorithm>
#include <cmath>

#include "sqzcav/error.hpp"
#include "sqzcav/rng.hpp"

namespace sqzcav {
namespace {

std::vector<double> boxcar(const std::vector<double>& freqs, const std::vector<double>& values,
                           double half_width) {
    if (values.empty()) return {};
    std::vector<double> out(values.size());
    std::size_t lo = 0;
    std::size_t hi = 0;  // window is [lo, hi)
    for (std::size_t i = 0; i < values.size(); ++i) {
        while (hi < values.size() && freqs[hi] <= freqs[i] + half_width) ++hi;
        while (freqs[lo] < freqs[i] - half_width) ++lo;
        // summed afresh per window: a running sum drifts over long grids
        double sum = 0.0;
        for (std::size_t j = lo; j < hi; ++j) sum += values[j];
        out[i] = sum / static_cast<double>(hi - lo);
    }
    return out;
}

void add_spur(QuadratureSpectrum& s, const Spur& spur) {
    const double sigma = spur.width_hz / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double x = (s.freqs_hz[i] - spur.center_hz) / sigma;
        const double bump = spur.height_linear * std::exp(-0.5 * x * x);
        if (!s.v1.empty()) s.v1[i] += bump;
        if (!s.v2.empty()) s.v2[i] += bump;
    }
}

}  // namespace

void MeasurementConfig::validate() const {
    if (!(rbw_hz > 0.0 && std::isfinite(rbw_hz))) {
        throw Error(ErrorKind::invalid_argument, "MeasurementConfig: rbw_hz must be > 0");
    }
    if (!(n_averages >= 1.0)) {
        throw Error(ErrorKind::invalid_argument, "MeasurementConfig: n_averages must be >= 1");
    }
    if (spur) {
        if (!(spur->width_hz > 0.0)) {
            throw Error(ErrorKind::invalid_argument, "MeasurementConfig: spur width must be > 0");
        }
        if (!(spur->height_linear >= 0.0)) {
            throw Error(ErrorKind::invalid_argument, "MeasurementConfig: spur height must be >= 0");
        }
    }
}

QuadratureSpectrum rbw_smooth(const QuadratureSpectrum& spectrum, double rbw_hz) {
    QuadratureSpectrum out = spectrum;
    if (!(rbw_hz > 0.0)) return out;
    // Each point averages every grid point within +/- rbw/2 (window always
    // contains the point itself; a window narrower than the spacing is the identity).
    const double half = 0.5 * rbw_hz * (1.0 + 1e-12);
    out.v1 = boxcar(spectrum.freqs_hz, spectrum.v1, half);
    out.v2 = boxcar(spectrum.freqs_hz, spectrum.v2, half);
    return out;
}

QuadratureSpectrum expected_trace(const RingCavity& cavity, Detuning detuning,
                                  const InputSqueezingModel& squeezing,
                                  const DetectionModel& detection, const MeasurementConfig& config,
                                  std::span<const double> freqs_hz) {
    QuadratureSpectrum mean = spectrum(cavity, detuning, squeezing, detection, freqs_hz);
    if (config.spur) add_spur(mean, *config.spur);
    return rbw_smooth(mean, config.rbw_hz);
}

QuadratureSpectrum gaussian_measurement_draw(const QuadratureSpectrum& mean, double n_averages,
                                             std::uint64_t seed) {
    if (!(n_averages >= 1.0)) {
        throw Error(ErrorKind::invalid_argument, "measurement noise: n_averages must be >= 1");
    }
    QuadratureSpectrum out = mean;
    const double scale = std::sqrt(2.0) / std::sqrt(n_averages);
    auto perturb = [&](const std::vector<double>& v, std::vector<double>& noisy,
                       std::vector<double>& sigma, std::uint64_t stream) {
        if (v.empty()) return;
        const std::uint64_t key = rng::derive_seed(seed, stream);
        noisy.resize(v.size());
        sigma.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            sigma[i] = scale * v[i];
            noisy[i] = v[i] + sigma[i] * rng::counter_normal(key, i);
        }
    };
    perturb(mean.v1, out.v1, out.sigma1, 1);
    perturb(mean.v2, out.v2, out.sigma2, 2);
    return out;
}

QuadratureSpectrum add_measurement_noise(const QuadratureSpectrum& mean, double n_averages,
                                         std::uint64_t seed) {
    QuadratureSpectrum out = gaussian_measurement_draw(mean, n_averages, seed);
    auto clip = [](const std::vector<double>& m, std::vector<double>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(v[i], 1e-6 * m[i]);
    };
    clip(mean.v1, out.v1);
    clip(mean.v2, out.v2);
    return out;
}

QuadratureSpectrum synthesize_trace(const RingCavity& cavity, Detuning detuning,
                                    const InputSqueezingModel& squeezing,
                                    const DetectionModel& detection,
                                    const MeasurementConfig& config,
                                    std::span<const double> freqs_hz) {
    config.validate();
    const auto mean = expected_trace(cavity, detuning, squeezing, detection, config, freqs_hz);
    return add_measurement_noise(mean, config.n_averages, config.seed);
}

std::vector<double> linear_grid(double start_hz, double stop_hz, std::size_t points) {
    if (points == 0) throw Error(ErrorKind::invalid_argument, "linear_grid: need at least one point");
    if (points == 1) return {start_hz};
    if (!(stop_hz > start_hz)) throw Error(ErrorKind::invalid_argument, "linear_grid: stop <= start");
    std::vector<double> grid(points);
    const double step = (stop_hz - start_hz) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) grid[i] = start_hz + step * static_cast<double>(i);
    grid.back() = stop_hz;
    return grid;
}

}  // namespace sqzcav
