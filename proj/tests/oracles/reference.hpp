#pragma once

// Reference computations used only by the tests. They take different routes
// from the library: explicit round-trip sums, numerical half-maximum search,
// and a direct quadrature transfer matrix built from the sideband pair.

#include <cmath>
#include <complex>
#include <numbers>

namespace ref {

using cd = std::complex<double>;
inline constexpr double pi = std::numbers::pi;

struct Mirrors {
    double sqrt_r1;
    double s;       // sqrt(R1 R2 R3)
    double t1;
    double fsr_hz;
};

inline Mirrors nominal_mirrors() {
    const double sqrt_r1 = 0.99783;
    return {sqrt_r1, 0.99628, 1.0 - sqrt_r1 * sqrt_r1, 713e6};
}

// Prompt reflection plus the field leaking back out after n round trips.
inline cd reflection_by_round_trips(const Mirrors& m, double offset_hz, int trips = 40000) {
    const double phi = 2.0 * pi * offset_hz / m.fsr_hz;
    const double sqrt_r2r3 = m.s / m.sqrt_r1;
    const cd step = m.s * std::polar(1.0, -phi);
    cd leak = m.t1 * sqrt_r2r3 * std::polar(1.0, -phi);
    cd sum = 0.0;
    for (int n = 0; n < trips; ++n) {
        sum += leak;
        leak *= step;
    }
    return m.sqrt_r1 - sum;
}

// FWHM of the intracavity Airy peak |1/(1 - s e^{-i phi})|^2 found by bisection.
inline double numeric_fwhm_hz(double s, double fsr_hz) {
    auto power = [s](double phi) { return 1.0 / std::norm(1.0 - s * std::polar(1.0, -phi)); };
    const double half = 0.5 * power(0.0);
    double lo = 0.0, hi = pi;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (power(mid) > half ? lo : hi) = mid;
    }
    return 2.0 * lo / (2.0 * pi) * fsr_hz;
}

struct Quads {
    double v1, v2;
};

// Quadrature transfer of one mode whose upper and lower sidebands see
// reflection r_up and r_lo. With a+ = a(W), a-^ = a^dagger(-W):
//   b1 = [(r_up + conj r_lo) a1 + i (r_up - conj r_lo) a2] / 2
//   b2 = [-i (r_up - conj r_lo) a1 + (r_up + conj r_lo) a2] / 2
// Each row's squared magnitudes weight the uncorrelated input quadratures.
inline Quads through_sidebands(cd r_up, cd r_lo, Quads in) {
    const cd sum = 0.5 * (r_up + std::conj(r_lo));
    const cd diff = 0.5 * (r_up - std::conj(r_lo));
    return {std::norm(sum) * in.v1 + std::norm(diff) * in.v2,
            std::norm(diff) * in.v1 + std::norm(sum) * in.v2};
}

// Full detection chain: coupled mode through the cavity plus its loss port,
// mismatched mode off the input mirror, and a pure-loss channel.
inline Quads detected(cd r_up, cd r_lo, double sqrt_r1, double eta_c, double eta_m, Quads in) {
    const double l_up = std::sqrt(std::max(0.0, 1.0 - std::norm(r_up)));
    const double l_lo = std::sqrt(std::max(0.0, 1.0 - std::norm(r_lo)));
    const Quads cav = through_sidebands(r_up, r_lo, in);
    const Quads loss = through_sidebands(l_up, l_lo, {1.0, 1.0});
    const double r1 = sqrt_r1 * sqrt_r1;
    const double eta_l = 1.0 - eta_c - eta_m;
    return {eta_c * (cav.v1 + loss.v1) + eta_m * (r1 * in.v1 + (1.0 - r1)) + eta_l,
            eta_c * (cav.v2 + loss.v2) + eta_m * (r1 * in.v2 + (1.0 - r1)) + eta_l};
}

// Arcsine linewidth written out independently, for finite differences.
inline double gamma_hz(double s, double fsr_hz) {
    return 2.0 / pi * fsr_hz * std::asin((1.0 - s) / (2.0 * std::sqrt(s)));
}

}  // namespace ref
