#include "sqzcav/two_photon.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "sqzcav/error.hpp"

namespace sqzcav {
namespace {

constexpr double kPassivityTol = 1e-12;
constexpr double kHeisenbergTol = 1e-12;

[[noreturn]] void invalid(const std::string& what) {
    throw Error(ErrorKind::invalid_argument, what);
}

void check_heisenberg(QuadraturePair v, const char* where) {
    if (!(v.v1 > 0.0 && v.v2 > 0.0 && std::isfinite(v.v1) && std::isfinite(v.v2))) {
        invalid(std::string(where) + ": variances must be finite and > 0");
    }
    if (v.v1 * v.v2 < 1.0 - kHeisenbergTol) {
        std::ostringstream msg;
        msg << where << ": V1*V2 = " << v.v1 * v.v2 << " violates the uncertainty bound";
        invalid(msg.str());
    }
}

}  // namespace

Eigen::Matrix2cd TwoPhotonTransfer::propagation_matrix() const {
    using namespace std::complex_literals;
    Eigen::Matrix2cd rotation;
    rotation << std::cos(phi_plus), -std::sin(phi_plus), std::sin(phi_plus), std::cos(phi_plus);
    Eigen::Matrix2cd attenuation;
    attenuation << a_plus, 1i * a_minus, -1i * a_minus, a_plus;
    return std::polar(1.0, phi_minus) * rotation * attenuation;
}

Eigen::Matrix2cd TwoPhotonTransfer::loss_matrix() const {
    using namespace std::complex_literals;
    Eigen::Matrix2cd h;
    h << l_plus, 1i * l_minus, -1i * l_minus, l_plus;
    return h;
}

TwoPhotonTransfer transfer_from_coefficients(std::complex<double> r_upper,
                                             std::complex<double> r_lower, double r_m) {
    const double arg_upper = std::arg(r_upper);
    const double arg_lower = std::arg(r_lower);
    double phi_plus = 0.5 * (arg_upper + arg_lower);
    double phi_minus = 0.5 * (arg_upper - arg_lower);
    if (phi_plus > 0.5 * kPi) {
        phi_plus -= kPi;
        phi_minus += kPi;
    } else if (phi_plus <= -0.5 * kPi) {
        phi_plus += kPi;
        phi_minus -= kPi;
    }

    const double mag_upper = std::abs(r_upper);
    const double mag_lower = std::abs(r_lower);
    const double loss_upper = loss_coupling(r_upper);
    const double loss_lower = loss_coupling(r_lower);

    TwoPhotonTransfer t;
    t.phi_minus = wrap_phase(phi_minus);
    t.phi_plus = phi_plus;
    t.a_plus = 0.5 * (mag_upper + mag_lower);
    t.a_minus = 0.5 * (mag_upper - mag_lower);
    t.l_plus = 0.5 * (loss_upper + loss_lower);
    t.l_minus = 0.5 * (loss_upper - loss_lower);
    t.r_m = r_m;
    return t;
}

TwoPhotonTransfer transfer_at(const RingCavity& cavity, Detuning detuning, double omega_hz) {
    if (!(omega_hz >= 0.0)) invalid("transfer_at: sideband frequency must be >= 0");
    const auto upper = reflection_coefficient(cavity, detuning.omega_d_hz, omega_hz);
    const auto lower = reflection_coefficient(cavity, detuning.omega_d_hz, -omega_hz);
    return transfer_from_coefficients(upper, lower, cavity.sqrt_r1());
}

DetectionModel::DetectionModel(double eta_c, double eta_m, double eta_l) {
    for (double eta : {eta_c, eta_m, eta_l}) {
        if (!(eta >= 0.0 && eta <= 1.0)) invalid("DetectionModel: efficiencies must lie in [0, 1]");
    }
    const double total = eta_c + eta_m + eta_l;
    if (!(total > 0.0)) invalid("DetectionModel: efficiencies must not all vanish");
    eta_c_ = eta_c / total;
    eta_m_ = eta_m / total;
    eta_l_ = eta_l / total;
}

DetectionModel DetectionModel::from_coupled(double eta_c, double eta_m) {
    if (eta_c + eta_m > 1.0 + 1e-15) invalid("DetectionModel: eta_c + eta_m must not exceed 1");
    return DetectionModel(eta_c, eta_m, std::max(0.0, 1.0 - eta_c - eta_m));
}

QuadraturePair reflect_variances(const TwoPhotonTransfer& transfer, const DetectionModel& detection,
                                 double v1_a, double v2_a) {
    if (!(v1_a > 0.0 && v2_a > 0.0)) invalid("reflect_variances: input variances must be > 0");

    const double c2 = std::cos(transfer.phi_plus) * std::cos(transfer.phi_plus);
    const double s2 = std::sin(transfer.phi_plus) * std::sin(transfer.phi_plus);
    const double ap2 = transfer.a_plus * transfer.a_plus;
    const double am2 = transfer.a_minus * transfer.a_minus;
    const double prompt = detection.eta_m() * transfer.r_m * transfer.r_m;

    const double fill = 1.0 - detection.eta_c() * (ap2 + am2) - prompt;
    if (fill < -kPassivityTol) {
        std::ostringstream msg;
        msg << "reflect_variances: vacuum fill coefficient " << fill << " < 0 (passivity violated)";
        throw Error(ErrorKind::nonphysical_transfer, msg.str());
    }

    // eta_c * rot^2(phi+) * [[A+^2, A-^2], [A-^2, A+^2]] + eta_m r_m^2 * 1
    const double m11 = detection.eta_c() * (c2 * ap2 + s2 * am2) + prompt;
    const double m12 = detection.eta_c() * (c2 * am2 + s2 * ap2);
    const double m21 = detection.eta_c() * (s2 * ap2 + c2 * am2);
    const double m22 = detection.eta_c() * (s2 * am2 + c2 * ap2) + prompt;

    return {m11 * v1_a + m12 * v2_a + fill, m21 * v1_a + m22 * v2_a + fill};
}

namespace detail {

QuadraturePair reflect_variances_by_mode(const TwoPhotonTransfer& transfer,
                                         const DetectionModel& detection,
                                         QuadraturePair coupled, QuadraturePair mismatched) {
    const double c2 = std::cos(transfer.phi_plus) * std::cos(transfer.phi_plus);
    const double s2 = std::sin(transfer.phi_plus) * std::sin(transfer.phi_plus);
    const double ap2 = transfer.a_plus * transfer.a_plus;
    const double am2 = transfer.a_minus * transfer.a_minus;
    const double rm2 = transfer.r_m * transfer.r_m;

    const double att1 = ap2 * coupled.v1 + am2 * coupled.v2;
    const double att2 = am2 * coupled.v1 + ap2 * coupled.v2;
    const double vacuum = detection.eta_c() * (1.0 - (ap2 + am2)) +
                          detection.eta_m() * (1.0 - rm2) + detection.eta_l();
    return {detection.eta_c() * (c2 * att1 + s2 * att2) + detection.eta_m() * rm2 * mismatched.v1 +
                vacuum,
            detection.eta_c() * (s2 * att1 + c2 * att2) + detection.eta_m() * rm2 * mismatched.v2 +
                vacuum};
}

}  // namespace detail

InputSqueezingModel InputSqueezingModel::constant(double v1_a, double v2_a) {
    check_heisenberg({v1_a, v2_a}, "constant squeezing");
    InputSqueezingModel m;
    m.kind_ = Kind::constant;
    m.constant_ = {v1_a, v2_a};
    return m;
}

InputSqueezingModel InputSqueezingModel::opo_lorentzian(double pump_x, double opo_linewidth_hz,
                                                        double escape_purity) {
    if (!(pump_x >= 0.0 && pump_x < 1.0)) invalid("opo_lorentzian: pump_x must lie in [0, 1)");
    if (!(opo_linewidth_hz > 0.0 && std::isfinite(opo_linewidth_hz))) {
        invalid("opo_lorentzian: opo_linewidth_hz must be > 0");
    }
    if (!(escape_purity > 0.0 && escape_purity <= 1.0)) {
        invalid("opo_lorentzian: escape_purity must lie in (0, 1]");
    }
    InputSqueezingModel m;
    m.kind_ = Kind::opo_lorentzian;
    m.pump_x_ = pump_x;
    m.opo_linewidth_hz_ = opo_linewidth_hz;
    m.escape_purity_ = escape_purity;
    return m;
}

InputSqueezingModel InputSqueezingModel::tabulated(std::vector<SqueezingRow> rows) {
    if (rows.empty()) invalid("tabulated squeezing: table is empty");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0 && !(rows[i].omega_hz > rows[i - 1].omega_hz)) {
            invalid("tabulated squeezing: frequencies must be strictly ascending");
        }
        check_heisenberg({rows[i].v1, rows[i].v2}, "tabulated squeezing");
    }
    InputSqueezingModel m;
    m.kind_ = Kind::tabulated;
    m.table_ = std::move(rows);
    return m;
}

QuadraturePair InputSqueezingModel::at(double omega_hz) const {
    switch (kind_) {
        case Kind::constant:
            return constant_;
        case Kind::opo_lorentzian: {
            const double f = omega_hz / opo_linewidth_hz_;
            const double gain = escape_purity_ * 4.0 * pump_x_;
            return {1.0 - gain / ((1.0 + pump_x_) * (1.0 + pump_x_) + f * f),
                    1.0 + gain / ((1.0 - pump_x_) * (1.0 - pump_x_) + f * f)};
        }
        case Kind::tabulated: {
            if (omega_hz <= table_.front().omega_hz) return {table_.front().v1, table_.front().v2};
            if (omega_hz >= table_.back().omega_hz) return {table_.back().v1, table_.back().v2};
            const auto hi = std::upper_bound(
                table_.begin(), table_.end(), omega_hz,
                [](double f, const SqueezingRow& row) { return f < row.omega_hz; });
            const auto lo = hi - 1;
            const double w = (omega_hz - lo->omega_hz) / (hi->omega_hz - lo->omega_hz);
            // Interpolating log-variances keeps V1*V2 >= 1 between rows.
            return {std::exp((1.0 - w) * std::log(lo->v1) + w * std::log(hi->v1)),
                    std::exp((1.0 - w) * std::log(lo->v2) + w * std::log(hi->v2))};
        }
    }
    return {};
}

bool QuadratureSpectrum::has_sigmas() const noexcept {
    const bool ok1 = v1.empty() || sigma1.size() == v1.size();
    const bool ok2 = v2.empty() || sigma2.size() == v2.size();
    return ok1 && ok2 && (!v1.empty() || !v2.empty());
}

void QuadratureSpectrum::validate() const {
    const std::size_t n = freqs_hz.size();
    if (n == 0) invalid("QuadratureSpectrum: empty frequency grid");
    if (v1.empty() && v2.empty()) invalid("QuadratureSpectrum: no variance data");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(freqs_hz[i])) invalid("QuadratureSpectrum: non-finite frequency");
        if (i > 0 && !(freqs_hz[i] > freqs_hz[i - 1])) {
            invalid("QuadratureSpectrum: frequencies not strictly ascending at index " +
                    std::to_string(i));
        }
    }
    auto check = [n](const std::vector<double>& v, const std::vector<double>& s, const char* name) {
        if (v.empty()) {
            if (!s.empty()) invalid(std::string("QuadratureSpectrum: sigma without ") + name);
            return;
        }
        if (v.size() != n) invalid(std::string("QuadratureSpectrum: ") + name + " length mismatch");
        for (std::size_t i = 0; i < n; ++i) {
            if (!(v[i] > 0.0 && std::isfinite(v[i]))) {
                invalid(std::string("QuadratureSpectrum: ") + name + " not positive at index " +
                        std::to_string(i));
            }
        }
        if (!s.empty()) {
            if (s.size() != n) invalid(std::string("QuadratureSpectrum: sigma length mismatch for ") + name);
            for (double x : s) {
                if (!(x >= 0.0 && std::isfinite(x))) invalid("QuadratureSpectrum: invalid sigma");
            }
        }
    };
    check(v1, sigma1, "v1");
    check(v2, sigma2, "v2");
}

namespace {

void check_grid(std::span<const double> freqs_hz) {
    if (freqs_hz.empty()) invalid("spectrum: empty frequency grid");
    for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
        if (!(freqs_hz[i] >= 0.0)) invalid("spectrum: grid frequencies must be >= 0");
        if (i > 0 && !(freqs_hz[i] >= freqs_hz[i - 1])) invalid("spectrum: grid must be ascending");
    }
}

}  // namespace

QuadratureSpectrum spectrum(const RingCavity& cavity, Detuning detuning,
                            const InputSqueezingModel& squeezing, const DetectionModel& detection,
                            std::span<const double> freqs_hz) {
    check_grid(freqs_hz);
    QuadratureSpectrum out;
    out.freqs_hz.assign(freqs_hz.begin(), freqs_hz.end());
    out.v1.resize(freqs_hz.size());
    out.v2.resize(freqs_hz.size());
    for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
        try {
            const auto transfer = transfer_at(cavity, detuning, freqs_hz[i]);
            const auto incident = squeezing.at(freqs_hz[i]);
            const auto reflected = reflect_variances(transfer, detection, incident.v1, incident.v2);
            out.v1[i] = reflected.v1;
            out.v2[i] = reflected.v2;
        } catch (const Error& e) {
            std::ostringstream msg;
            msg << "spectrum: grid index " << i << " (" << freqs_hz[i] << " Hz): " << e.what();
            throw Error(e.kind(), msg.str());
        }
    }
    return out;
}

QuadratureSpectrum uncoupled_spectrum(const InputSqueezingModel& squeezing,
                                      const DetectionModel& detection,
                                      std::span<const double> freqs_hz) {
    check_grid(freqs_hz);
    const TwoPhotonTransfer mirror{};  // A+ = 1, r_m = 1
    QuadratureSpectrum out;
    out.freqs_hz.assign(freqs_hz.begin(), freqs_hz.end());
    out.v1.resize(freqs_hz.size());
    out.v2.resize(freqs_hz.size());
    for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
        const auto incident = squeezing.at(freqs_hz[i]);
        const auto v = reflect_variances(mirror, detection, incident.v1, incident.v2);
        out.v1[i] = v.v1;
        out.v2[i] = v.v2;
    }
    return out;
}

FeatureSummary locate_feature(const QuadratureSpectrum& model, const QuadratureSpectrum& baseline,
                              int quadrature) {
    const auto& v = quadrature == 1 ? model.v1 : model.v2;
    const auto& b = quadrature == 1 ? baseline.v1 : baseline.v2;
    if (v.empty() || v.size() != b.size() || v.size() != model.freqs_hz.size()) {
        invalid("locate_feature: model and baseline must cover the same grid");
    }
    std::vector<double> dev(v.size());
    std::size_t peak = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        dev[i] = v[i] - b[i];
        if (std::abs(dev[i]) > std::abs(dev[peak])) peak = i;
    }
    FeatureSummary summary;
    summary.quadrature = quadrature;
    summary.center_hz = model.freqs_hz[peak];
    summary.peak_deviation = dev[peak];
    if (dev[peak] == 0.0) return summary;

    const double sign = dev[peak] > 0.0 ? 1.0 : -1.0;
    const double half = 0.5 * std::abs(dev[peak]);
    const auto& f = model.freqs_hz;
    auto crossing = [&](std::size_t inside, std::size_t outside) {
        const double a = sign * dev[inside] - half;
        const double c = sign * dev[outside] - half;
        return f[inside] + (f[outside] - f[inside]) * a / (a - c);
    };
    std::optional<double> left, right;
    for (std::size_t i = peak; i > 0; --i) {
        if (sign * dev[i - 1] < half) {
            left = crossing(i, i - 1);
            break;
        }
    }
    for (std::size_t i = peak; i + 1 < v.size(); ++i) {
        if (sign * dev[i + 1] < half) {
            right = crossing(i, i + 1);
            break;
        }
    }
    if (left && right) summary.fwhm_hz = *right - *left;
    return summary;
}

double squeezed_photon_number(double squeeze_r, std::complex<double> alpha, double theta) {
    if (!(squeeze_r >= 0.0)) invalid("squeezed_photon_number: squeeze factor must be >= 0");
    const double sh = std::sinh(squeeze_r);
    const double ch = std::cosh(squeeze_r);
    const double coherent = std::norm(alpha) * (ch * ch + sh * sh);
    const double cross = 2.0 * std::real(std::conj(alpha) * std::conj(alpha) * std::polar(1.0, theta)) * sh * ch;
    return coherent - cross + sh * sh;
}

SignalContrast signal_contrast(double v1_a, double v2_a) {
    if (!(v1_a > 0.0 && v2_a > 0.0)) invalid("signal_contrast: variances must be > 0");
    const double matched = 0.25 * (v1_a + v2_a) + 0.5;
    return {matched / v1_a, v2_a / matched, matched};
}

double to_db(double linear) {
    if (!(linear > 0.0) || !std::isfinite(linear)) invalid("to_db: value must be finite and > 0");
    return 10.0 * std::log10(linear);
}

double from_db(double db) noexcept { return std::pow(10.0, db / 10.0); }

}  // namespace sqzcav
