#include "sqzcav/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "sqzcav/error.hpp"
#include "sqzcav/rng.hpp"

namespace sqzcav::oracle {
namespace {

constexpr double kMomentTol = 1e-12;
constexpr std::size_t kBatchSize = 8192;

/// Welford accumulator; batches merge with Chan's pooled update.
struct RunningMoments {
    double count = 0.0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) noexcept {
        count += 1.0;
        const double delta = x - mean;
        mean += delta / count;
        m2 += delta * (x - mean);
    }

    void merge(const RunningMoments& other) noexcept {
        if (other.count == 0.0) return;
        const double total = count + other.count;
        const double delta = other.mean - mean;
        mean += delta * other.count / total;
        m2 += other.m2 + delta * delta * count * other.count / total;
        count = total;
    }

    double standard_error() const noexcept {
        return count > 1.0 ? std::sqrt(m2 / (count - 1.0) / count) : 0.0;
    }
};

using Cplx = std::complex<double>;

}  // namespace

SidebandState SidebandState::from_quadratures(double v1, double v2) {
    SidebandState s;
    s.n_upper = 0.25 * (v1 + v2 - 2.0);
    s.n_lower = s.n_upper;
    s.correlation = 0.25 * (v1 - v2);
    s.validate();
    return s;
}

QuadraturePair SidebandState::quadratures() const noexcept {
    const double common = n_upper + n_lower + 1.0;
    return {common + 2.0 * correlation.real(), common - 2.0 * correlation.real()};
}

void SidebandState::validate() const {
    if (!(n_upper >= -kMomentTol && n_lower >= -kMomentTol)) {
        throw Error(ErrorKind::invalid_argument, "SidebandState: negative occupation");
    }
    const double bound = std::min(n_upper * (n_lower + 1.0), n_lower * (n_upper + 1.0));
    if (std::norm(correlation) > bound + kMomentTol * (1.0 + bound)) {
        std::ostringstream msg;
        msg << "SidebandState: |<a(+)a(-)>|^2 = " << std::norm(correlation)
            << " exceeds the Gaussian bound " << bound;
        throw Error(ErrorKind::invalid_argument, msg.str());
    }
}

SidebandState propagate_sidebands(const RingCavity& cavity, Detuning detuning,
                                  const DetectionModel& detection, const SidebandState& input,
                                  double omega_hz) {
    input.validate();
    const Cplx r_upper = reflection_coefficient(cavity, detuning.omega_d_hz, omega_hz);
    const Cplx r_lower = reflection_coefficient(cavity, detuning.omega_d_hz, -omega_hz);
    const double rm2 = cavity.r1_sq();
    const double eta_c = detection.eta_c();
    const double eta_m = detection.eta_m();

    // Vacuum inputs (cavity loss port, mismatch loss port, detection loss)
    // carry zero normally ordered moments, so only the signal terms survive.
    SidebandState out;
    out.n_upper = (eta_c * std::norm(r_upper) + eta_m * rm2) * input.n_upper;
    out.n_lower = (eta_c * std::norm(r_lower) + eta_m * rm2) * input.n_lower;
    out.correlation = (eta_c * r_upper * r_lower + eta_m * rm2) * input.correlation;
    return out;
}

MonteCarloEstimate monte_carlo_variances(const RingCavity& cavity, Detuning detuning,
                                         const InputSqueezingModel& squeezing,
                                         const DetectionModel& detection, double omega_hz,
                                         std::size_t n_samples, std::uint64_t seed) {
    if (n_samples < kMinMonteCarloSamples) {
        throw Error(ErrorKind::invalid_argument, "monte_carlo_variances: need at least 1000 samples");
    }
    const auto incident = squeezing.at(omega_hz);
    const SidebandState state = SidebandState::from_quadratures(incident.v1, incident.v2);

    // Wigner covariance of (Re a+, Im a+, Re a-, Im a-).
    Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
    cov(0, 0) = cov(1, 1) = 0.5 * (state.n_upper + 0.5);
    cov(2, 2) = cov(3, 3) = 0.5 * (state.n_lower + 0.5);
    cov(0, 2) = cov(2, 0) = 0.5 * state.correlation.real();
    cov(1, 3) = cov(3, 1) = -0.5 * state.correlation.real();
    cov(0, 3) = cov(3, 0) = 0.5 * state.correlation.imag();
    cov(1, 2) = cov(2, 1) = 0.5 * state.correlation.imag();
    const Eigen::LLT<Eigen::Matrix4d> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::invalid_covariance,
                    "monte_carlo_variances: input covariance is not positive definite");
    }
    const Eigen::Matrix4d chol = llt.matrixL();

    const Cplx r_upper = reflection_coefficient(cavity, detuning.omega_d_hz, omega_hz);
    const Cplx r_lower = reflection_coefficient(cavity, detuning.omega_d_hz, -omega_hz);
    const double l_upper = loss_coupling(r_upper);
    const double l_lower = loss_coupling(r_lower);
    const double r_m = cavity.sqrt_r1();
    const double l_m = std::sqrt(std::max(0.0, 1.0 - cavity.r1_sq()));
    const double amp_c = std::sqrt(detection.eta_c());
    const double amp_m = std::sqrt(detection.eta_m());
    const double amp_l = std::sqrt(detection.eta_l());

    RunningMoments q1, q2;
    const std::size_t n_batches = (n_samples + kBatchSize - 1) / kBatchSize;
    for (std::size_t batch = 0; batch < n_batches; ++batch) {
        rng::NormalStream normal(rng::derive_seed(seed, batch));
        auto vacuum = [&normal] {
            // <|v|^2> = 1/2 in the symmetric representation.
            const double re = 0.5 * normal();
            return Cplx(re, 0.5 * normal());
        };
        auto squeezed_pair = [&] {
            Eigen::Vector4d z;
            for (int i = 0; i < 4; ++i) z(i) = normal();
            const Eigen::Vector4d x = chol * z;
            return std::pair<Cplx, Cplx>{{x(0), x(1)}, {x(2), x(3)}};
        };

        RunningMoments b1, b2;
        const std::size_t begin = batch * kBatchSize;
        const std::size_t end = std::min(n_samples, begin + kBatchSize);
        for (std::size_t k = begin; k < end; ++k) {
            const auto [coupled_up, coupled_lo] = squeezed_pair();
            const auto [mismatch_up, mismatch_lo] = squeezed_pair();
            const Cplx cav_up = r_upper * coupled_up + l_upper * vacuum();
            const Cplx cav_lo = r_lower * coupled_lo + l_lower * vacuum();
            const Cplx mm_up = r_m * mismatch_up + l_m * vacuum();
            const Cplx mm_lo = r_m * mismatch_lo + l_m * vacuum();
            const Cplx det_up = amp_c * cav_up + amp_m * mm_up + amp_l * vacuum();
            const Cplx det_lo = amp_c * cav_lo + amp_m * mm_lo + amp_l * vacuum();

            const Cplx quad1 = det_up + std::conj(det_lo);
            const Cplx quad2 = Cplx(0.0, -1.0) * (det_up - std::conj(det_lo));
            b1.add(std::norm(quad1));
            b2.add(std::norm(quad2));
        }
        q1.merge(b1);
        q2.merge(b2);
    }
    return {q1.mean, q2.mean, q1.standard_error(), q2.standard_error()};
}

}  // namespace sqzcav::oracle
