#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "sqzcav/cavity.hpp"

namespace sqzcav {

/// Amplitude (1) and phase (2) quadrature variances, vacuum = 1.
struct QuadraturePair {
    double v1 = 1.0;
    double v2 = 1.0;
};

/// Two-photon picture of the reflected cavity-coupled mode at one sideband
/// frequency.
struct TwoPhotonTransfer {
    double phi_minus = 0.0;
    double phi_plus = 0.0;   // kept in (-pi/2, pi/2]; a shift by pi is absorbed into phi_minus
    double a_plus = 1.0;
    double a_minus = 0.0;
    double l_plus = 0.0;
    double l_minus = 0.0;
    double r_m = 1.0;

    /// Propagation matrix M acting on (a1, a2) of the cavity-coupled mode.
    Eigen::Matrix2cd propagation_matrix() const;
    /// Loss matrix H acting on the cavity vacuum port.
    Eigen::Matrix2cd loss_matrix() const;
};

/// Builds the transfer from the two sideband reflection coefficients
/// r_c(omega_d + Omega) and r_c(omega_d - Omega).
TwoPhotonTransfer transfer_from_coefficients(std::complex<double> r_upper,
                                             std::complex<double> r_lower, double r_m);

TwoPhotonTransfer transfer_at(const RingCavity& cavity, Detuning detuning, double omega_hz);

/// Detection efficiencies for the cavity-coupled mode, the mode-mismatched
/// mode and the loss port. Renormalized so they sum to one.
class DetectionModel {
public:
    DetectionModel() = default;
    DetectionModel(double eta_c, double eta_m, double eta_l);

    /// eta_l = 1 - eta_c - eta_m.
    static DetectionModel from_coupled(double eta_c, double eta_m = 0.0);
    static DetectionModel ideal() { return DetectionModel(1.0, 0.0, 0.0); }

    double eta_c() const noexcept { return eta_c_; }
    double eta_m() const noexcept { return eta_m_; }
    double eta_l() const noexcept { return eta_l_; }

private:
    double eta_c_ = 1.0;
    double eta_m_ = 0.0;
    double eta_l_ = 0.0;
};

/// Reflected, detected quadrature variances for incident variances (v1_a, v2_a).
QuadraturePair reflect_variances(const TwoPhotonTransfer& transfer, const DetectionModel& detection,
                                 double v1_a, double v2_a);

namespace detail {
/// Per-mode form with separate cavity-coupled and mismatched inputs. The
/// production path feeds the same incident field to both.
QuadraturePair reflect_variances_by_mode(const TwoPhotonTransfer& transfer,
                                         const DetectionModel& detection,
                                         QuadraturePair coupled, QuadraturePair mismatched);
}  // namespace detail

struct SqueezingRow {
    double omega_hz;
    double v1;
    double v2;
};

/// Incident squeezed-vacuum spectrum V1^a(Omega), V2^a(Omega).
class InputSqueezingModel {
public:
    enum class Kind { constant, opo_lorentzian, tabulated };

    static InputSqueezingModel constant(double v1_a, double v2_a);
    /// Below-threshold OPO: V1,2 = 1 -/+ purity * 4x / ((1 +/- x)^2 + (Omega/linewidth)^2).
    static InputSqueezingModel opo_lorentzian(double pump_x, double opo_linewidth_hz,
                                              double escape_purity);
    /// Rows must be strictly ascending in frequency. Log-variances are
    /// interpolated linearly and clamped to the end rows outside the table.
    static InputSqueezingModel tabulated(std::vector<SqueezingRow> rows);

    Kind kind() const noexcept { return kind_; }
    QuadraturePair at(double omega_hz) const;

    double pump_x() const noexcept { return pump_x_; }
    double opo_linewidth_hz() const noexcept { return opo_linewidth_hz_; }
    double escape_purity() const noexcept { return escape_purity_; }
    QuadraturePair constant_value() const noexcept { return constant_; }
    const std::vector<SqueezingRow>& table() const noexcept { return table_; }

private:
    InputSqueezingModel() = default;

    Kind kind_ = Kind::constant;
    QuadraturePair constant_{};
    double pump_x_ = 0.0;
    double opo_linewidth_hz_ = 1.0;
    double escape_purity_ = 1.0;
    std::vector<SqueezingRow> table_;
};

/// Variances on an ascending frequency grid. Either quadrature may be left
/// empty when only one was measured; sigma arrays are optional.
struct QuadratureSpectrum {
    std::vector<double> freqs_hz;
    std::vector<double> v1;
    std::vector<double> v2;
    std::vector<double> sigma1;
    std::vector<double> sigma2;

    std::size_t size() const noexcept { return freqs_hz.size(); }
    bool has_sigmas() const noexcept;
    /// Throws Error(invalid_argument) describing the first violation.
    void validate() const;
};

/// Noiseless reflected spectrum. Throws with the grid index attached.
QuadratureSpectrum spectrum(const RingCavity& cavity, Detuning detuning,
                            const InputSqueezingModel& squeezing, const DetectionModel& detection,
                            std::span<const double> freqs_hz);

/// Same detection of the incident field with the cavity replaced by a
/// perfect mirror. This is the off-resonance baseline.
QuadratureSpectrum uncoupled_spectrum(const InputSqueezingModel& squeezing,
                                      const DetectionModel& detection,
                                      std::span<const double> freqs_hz);

struct FeatureSummary {
    double center_hz = 0.0;
    double fwhm_hz = 0.0;   // 0 if the half-maximum crossings are off-grid
    double peak_deviation = 0.0;
    int quadrature = 2;
};

/// Locates the cavity signature: the largest |V - V_uncoupled| in the chosen
/// quadrature and the full width at half of that deviation.
FeatureSummary locate_feature(const QuadratureSpectrum& model, const QuadratureSpectrum& baseline,
                              int quadrature = 2);

double squeezed_photon_number(double squeeze_r, std::complex<double> alpha, double theta);

struct SignalContrast {
    double s1;
    double s2;
    double v_matched;  // V^b at an impedance-matched, one-sideband-absorbing point
};

SignalContrast signal_contrast(double v1_a, double v2_a);

double to_db(double linear);
double from_db(double db) noexcept;

}  // namespace sqzcav
