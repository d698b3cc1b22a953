#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles/reference.hpp"
#include "sqzcav/error.hpp"
#include "sqzcav/synth.hpp"
#include "sqzcav/two_photon.hpp"

using namespace sqzcav;
using namespace std::complex_literals;

namespace {

RingCavity nominal_cavity() {
    return RingCavity::from_amplitudes(0.99783, 0.99628, 713e6, kSpeedOfLight / 1064e-9);
}

constexpr double kNominalDetuning = -11.098e6;

TwoPhotonTransfer matched_point() {
    TwoPhotonTransfer t;
    t.a_plus = 0.5;
    t.a_minus = 0.5;
    t.phi_plus = 0.0;
    t.l_plus = 0.5;
    t.l_minus = -0.5;
    return t;
}

ref::Quads oracle_at(const RingCavity& c, double wd, double w, const DetectionModel& d, ref::Quads in) {
    const auto up = reflection_coefficient(c, wd, w);
    const auto lo = reflection_coefficient(c, wd, -w);
    return ref::detected(up, lo, c.sqrt_r1(), d.eta_c(), d.eta_m(), in);
}

}  // namespace

TEST(TransferAt, NoDetuningMeansNoRotationOrAsymmetry) {
    const auto c = nominal_cavity();
    for (double w : {0.0, 1e5, 846e3, 11e6, 300e6}) {
        const auto t = transfer_at(c, Detuning{0.0}, w);
        EXPECT_NEAR(t.phi_plus, 0.0, 1e-14) << w;
        EXPECT_NEAR(t.a_minus, 0.0, 1e-14) << w;
    }
}

TEST(TransferAt, PerfectMirror) {
    const RingCavity c(1.0, 0.95, 713e6, 2.8e14);
    for (double wd : {-11e6, 0.0, 5e6}) {
        const auto t = transfer_at(c, Detuning{wd}, 11e6);
        EXPECT_NEAR(t.a_plus, 1.0, 1e-15);
        EXPECT_NEAR(t.a_minus, 0.0, 1e-15);
        EXPECT_EQ(t.l_plus, 0.0);
        EXPECT_EQ(t.l_minus, 0.0);
        EXPECT_EQ(t.r_m, 1.0);
    }
}

TEST(TransferAt, OneResonantSideband) {
    const auto c = nominal_cavity();
    const double w = -kNominalDetuning;
    const auto t = transfer_at(c, Detuning{kNominalDetuning}, w);
    const double up = std::abs(ref::reflection_by_round_trips(ref::nominal_mirrors(), kNominalDetuning + w));
    const double lo = std::abs(ref::reflection_by_round_trips(ref::nominal_mirrors(), kNominalDetuning - w));
    EXPECT_NEAR(t.a_plus, 0.5 * (up + lo), 1e-11);
    EXPECT_NEAR(t.a_minus, 0.5 * (up - lo), 1e-11);
    EXPECT_LT(t.a_minus, -0.3);
    EXPECT_NEAR(t.r_m, 0.99783, 1e-15);
    EXPECT_LE(t.a_plus * t.a_plus + t.a_minus * t.a_minus, 1.0);
}

TEST(TransferAt, RejectsNegativeFrequency) {
    EXPECT_THROW(transfer_at(nominal_cavity(), Detuning{0.0}, -1.0), Error);
}

TEST(TransferMatrices, MatchSidebandConstruction) {
    const auto c = nominal_cavity();
    for (double w : {2e6, 10.5e6, 11.098e6, 12e6, 40e6}) {
        const auto up = reflection_coefficient(c, kNominalDetuning, w);
        const auto lo = reflection_coefficient(c, kNominalDetuning, -w);
        const auto t = transfer_at(c, Detuning{kNominalDetuning}, w);
        const auto m = t.propagation_matrix();
        const std::complex<double> sum = 0.5 * (up + std::conj(lo));
        const std::complex<double> diff = 0.5 * (up - std::conj(lo));
        EXPECT_NEAR(std::abs(m(0, 0) - sum), 0.0, 1e-12);
        EXPECT_NEAR(std::abs(m(0, 1) - 1i * diff), 0.0, 1e-12);
        EXPECT_NEAR(std::abs(m(1, 0) + 1i * diff), 0.0, 1e-12);
        EXPECT_NEAR(std::abs(m(1, 1) - sum), 0.0, 1e-12);

        const auto h = t.loss_matrix();
        const Eigen::Matrix2cd total = m * m.adjoint() + h * h.adjoint();
        EXPECT_NEAR(std::abs(total(0, 0) - 1.0), 0.0, 1e-12);
        EXPECT_NEAR(std::abs(total(1, 1) - 1.0), 0.0, 1e-12);
    }
}

TEST(DetectionModel, Renormalizes) {
    const DetectionModel d(2.0 * 0.5, 0.5, 0.5);
    EXPECT_DOUBLE_EQ(d.eta_c(), 0.5);
    EXPECT_DOUBLE_EQ(d.eta_m(), 0.25);
    EXPECT_DOUBLE_EQ(d.eta_c() + d.eta_m() + d.eta_l(), 1.0);
    const auto f = DetectionModel::from_coupled(0.765);
    EXPECT_NEAR(f.eta_l(), 0.235, 1e-15);
    EXPECT_THROW(DetectionModel(-0.1, 0.5, 0.5), Error);
    EXPECT_THROW(DetectionModel(0.0, 0.0, 0.0), Error);
    EXPECT_THROW(DetectionModel::from_coupled(0.8, 0.3), Error);
}

TEST(ReflectVariances, VacuumStaysVacuum) {
    const auto c = nominal_cavity();
    for (double w : {0.5e6, 11.098e6, 13e6}) {
        const auto v = reflect_variances(transfer_at(c, Detuning{kNominalDetuning}, w),
                                         DetectionModel(0.6, 0.3, 0.1), 1.0, 1.0);
        EXPECT_NEAR(v.v1, 1.0, 1e-15);
        EXPECT_NEAR(v.v2, 1.0, 1e-15);
    }
}

TEST(ReflectVariances, ImpedanceMatchedIdentity) {
    for (auto [v1, v2] : {std::pair{0.5, 2.0}, {0.2512, 10.0}, {1.0, 10.0}, {3.0, 3.0}}) {
        const auto v = reflect_variances(matched_point(), DetectionModel::ideal(), v1, v2);
        EXPECT_NEAR(v.v1, (v1 + v2) / 4.0 + 0.5, 1e-15);
        EXPECT_NEAR(v.v2, (v1 + v2) / 4.0 + 0.5, 1e-15);
    }
    const auto v = reflect_variances(matched_point(), DetectionModel::ideal(), 0.2512, 10.0);
    EXPECT_NEAR(v.v1, 3.063, 5e-4);
    EXPECT_NEAR(to_db(v.v1), 4.86, 5e-3);
}

TEST(ReflectVariances, MatchesDirectQuadratureTransfer) {
    const auto c = nominal_cavity();
    const DetectionModel d(0.7, 0.2, 0.1);
    for (double w = 5e6; w <= 20e6; w += 0.25e6) {
        const auto v = reflect_variances(transfer_at(c, Detuning{kNominalDetuning}, w), d, 0.4, 4.0);
        const auto expected = oracle_at(c, kNominalDetuning, w, d, {0.4, 4.0});
        EXPECT_NEAR(v.v1, expected.v1, 1e-12 * expected.v1);
        EXPECT_NEAR(v.v2, expected.v2, 1e-12 * expected.v2);
    }
}

TEST(ReflectVariances, PassivityViolation) {
    TwoPhotonTransfer t;
    t.a_plus = 1.2;
    EXPECT_THROW(
        {
            try {
                reflect_variances(t, DetectionModel::ideal(), 1.0, 1.0);
            } catch (const Error& e) {
                EXPECT_EQ(e.kind(), ErrorKind::nonphysical_transfer);
                throw;
            }
        },
        Error);
    EXPECT_THROW(reflect_variances(TwoPhotonTransfer{}, DetectionModel::ideal(), 0.0, 1.0), Error);
}

TEST(ReflectVariances, PerModeFormAgrees) {
    const auto c = nominal_cavity();
    const DetectionModel d(0.6, 0.25, 0.15);
    for (double w = 5e6; w <= 20e6; w += 0.5e6) {
        const auto t = transfer_at(c, Detuning{kNominalDetuning}, w);
        const QuadraturePair in{0.3, 5.0};
        const auto a = reflect_variances(t, d, in.v1, in.v2);
        const auto b = detail::reflect_variances_by_mode(t, d, in, in);
        EXPECT_NEAR(a.v1, b.v1, 1e-14);
        EXPECT_NEAR(a.v2, b.v2, 1e-14);
    }
}

TEST(InputSqueezing, ConstantAndHeisenberg) {
    const auto m = InputSqueezingModel::constant(0.5, 2.0);
    EXPECT_EQ(m.at(1e6).v1, 0.5);
    EXPECT_EQ(m.at(1e9).v2, 2.0);
    EXPECT_THROW(InputSqueezingModel::constant(0.5, 1.5), Error);
    EXPECT_THROW(InputSqueezingModel::constant(-1.0, 2.0), Error);
}

TEST(InputSqueezing, OpoLorentzian) {
    const auto m = InputSqueezingModel::opo_lorentzian(0.41, 66.2e6, 0.7);
    const double x = 0.41, eta = 0.7;
    const auto dc = m.at(0.0);
    EXPECT_NEAR(dc.v1, 1.0 - eta * 4.0 * x / ((1.0 + x) * (1.0 + x)), 1e-15);
    EXPECT_NEAR(dc.v2, 1.0 + eta * 4.0 * x / ((1.0 - x) * (1.0 - x)), 1e-15);
    // Detected at 5 MHz through eta_c = 0.765: roughly -2.5 dB and +5.5 dB.
    const auto at5 = m.at(5e6);
    EXPECT_NEAR(to_db(0.765 * at5.v1 + 0.235), -2.5, 0.3);
    EXPECT_NEAR(to_db(0.765 * at5.v2 + 0.235), 5.5, 0.3);
    // Roll-off toward vacuum well beyond the OPO linewidth.
    EXPECT_NEAR(m.at(10e9).v1, 1.0, 1e-4);
    EXPECT_THROW(InputSqueezingModel::opo_lorentzian(1.0, 66.2e6, 0.7), Error);
    EXPECT_THROW(InputSqueezingModel::opo_lorentzian(0.4, 0.0, 0.7), Error);
    EXPECT_THROW(InputSqueezingModel::opo_lorentzian(0.4, 66e6, 0.0), Error);
}

TEST(InputSqueezing, TabulatedInterpolatesAndClamps) {
    const auto m = InputSqueezingModel::tabulated({{1e6, 0.5, 2.0}, {3e6, 0.8, 1.25}});
    EXPECT_EQ(m.at(0.0).v1, 0.5);
    EXPECT_EQ(m.at(5e6).v2, 1.25);
    const auto mid = m.at(2e6);
    EXPECT_NEAR(mid.v1, std::sqrt(0.5 * 0.8), 1e-15);
    EXPECT_GE(mid.v1 * mid.v2, 1.0 - 1e-15);
    EXPECT_THROW(InputSqueezingModel::tabulated({}), Error);
    EXPECT_THROW(InputSqueezingModel::tabulated({{2e6, 1, 1}, {1e6, 1, 1}}), Error);
    EXPECT_THROW(InputSqueezingModel::tabulated({{1e6, 0.5, 1.0}}), Error);
}

TEST(Spectrum, VacuumIsFlat) {
    const auto grid = linear_grid(5e6, 20e6, 61);
    const auto s = spectrum(nominal_cavity(), Detuning{kNominalDetuning}, InputSqueezingModel::constant(1, 1),
                            DetectionModel::from_coupled(0.765), grid);
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_NEAR(s.v1[i], 1.0, 1e-15);
        EXPECT_NEAR(s.v2[i], 1.0, 1e-15);
    }
}

TEST(Spectrum, FeatureAtDetuningWithLinewidthWidth) {
    const auto c = nominal_cavity();
    const auto grid = linear_grid(5e6, 20e6, 6001);
    const auto sq = InputSqueezingModel::opo_lorentzian(0.41, 66.2e6, 0.7);
    const auto det = DetectionModel::from_coupled(0.765);
    const auto model = spectrum(c, Detuning{kNominalDetuning}, sq, det, grid);
    const auto base = uncoupled_spectrum(sq, det, grid);
    const double gamma = linewidth(c).exact_hz;
    const auto coarse = linear_grid(5e6, 20e6, 401);
    const auto coarse_model = spectrum(c, Detuning{kNominalDetuning}, sq, det, coarse);
    const auto coarse_base = uncoupled_spectrum(sq, det, coarse);
    for (int q : {1, 2}) {
        const auto f = locate_feature(model, base, q);
        // the sloped squeezing background pulls the extremum off |omega_d| by ~1% of gamma
        EXPECT_NEAR(f.center_hz, 11.098e6, 0.02 * gamma) << q;
        EXPECT_NEAR(f.fwhm_hz, gamma, 0.02 * gamma) << q;
        EXPECT_NEAR(locate_feature(coarse_model, coarse_base, q).center_hz, 11.098e6, coarse[1] - coarse[0]) << q;
    }
}

TEST(Spectrum, FarFromLineApproachesUncoupled) {
    const auto c = nominal_cavity();
    const std::vector<double> grid{0.2e6, 60e6, 150e6};
    const auto sq = InputSqueezingModel::opo_lorentzian(0.3, 66.2e6, 0.9);
    const auto det = DetectionModel::from_coupled(0.8, 0.1);
    const auto model = spectrum(c, Detuning{-30e6}, sq, det, grid);
    const auto base = uncoupled_spectrum(sq, det, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_NEAR(model.v1[i], base.v1[i], 0.02 * std::abs(base.v1[i] - 1.0) + 1e-3);
        EXPECT_NEAR(model.v2[i], base.v2[i], 0.02 * std::abs(base.v2[i] - 1.0) + 1e-3);
    }
}

TEST(Spectrum, ErrorsCarryGridIndex) {
    const RingCavity c(1.0, 1.0, 1e9, 1e14);
    try {
        spectrum(c, Detuning{0.0}, InputSqueezingModel::constant(1, 1), DetectionModel::ideal(),
                 std::vector<double>{0.5e9, 1e9});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::singular_cavity);
        EXPECT_NE(std::string(e.what()).find("grid index 1"), std::string::npos) << e.what();
    }
    EXPECT_THROW(spectrum(nominal_cavity(), Detuning{0.0}, InputSqueezingModel::constant(1, 1),
                          DetectionModel::ideal(), std::vector<double>{}),
                 Error);
}

TEST(PhotonNumber, Fixtures) {
    EXPECT_EQ(squeezed_photon_number(0.0, 0.0, 0.0), 0.0);
    EXPECT_NEAR(squeezed_photon_number(1.5, 0.0, 0.0), 4.53, 0.005);
    EXPECT_NEAR(squeezed_photon_number(1.5, 0.0, 0.0), std::sinh(1.5) * std::sinh(1.5), 1e-12);
    EXPECT_NEAR(squeezed_photon_number(0.0, 2.0, 0.3), 4.0, 1e-15);
    EXPECT_THROW(squeezed_photon_number(-0.1, 0.0, 0.0), Error);
}

TEST(PhotonNumber, DisplacedSqueezedState) {
    // <a^dagger a> with a = mu a0 - nu a0^dagger + alpha, mu = cosh r, nu = e^{i theta} sinh r.
    const double r = 0.7, theta = 0.4;
    const std::complex<double> alpha = std::polar(1.3, 0.9);
    const double expected = std::norm(alpha) * std::cosh(2.0 * r) -
                            std::sinh(2.0 * r) * std::real(std::conj(alpha * alpha) * std::polar(1.0, theta)) +
                            std::sinh(r) * std::sinh(r);
    EXPECT_NEAR(squeezed_photon_number(r, alpha, theta), expected, 1e-12);
}

TEST(SignalContrast, Presets) {
    const auto vac = signal_contrast(1.0, 1.0);
    EXPECT_DOUBLE_EQ(vac.s1, 1.0);
    EXPECT_DOUBLE_EQ(vac.s2, 1.0);
    const auto sq = signal_contrast(0.2512, 10.0);
    EXPECT_NEAR(sq.s1, 12.19, 0.005);
    EXPECT_NEAR(sq.s2, 3.265, 0.0005);
    const auto classical = signal_contrast(1.0, 10.0);
    EXPECT_DOUBLE_EQ(classical.v_matched, 3.25);
    EXPECT_NEAR(classical.s2, 10.0 / 3.25, 1e-15);
    EXPECT_GT(sq.s1, classical.s1);
    EXPECT_THROW(signal_contrast(0.0, 1.0), Error);
}

TEST(SignalContrast, Limits) {
    for (double v2 : {1e3, 1e4, 1e6}) {
        for (double v1 : {1e-2, 1e-3}) {
            const auto s = signal_contrast(v1, v2);
            EXPECT_NEAR(s.s2, 4.0, 0.04);
            EXPECT_NEAR(s.s1 / (v2 / (4.0 * v1)), 1.0, 0.01);
        }
    }
}

TEST(Decibels, Conversions) {
    EXPECT_EQ(to_db(1.0), 0.0);
    EXPECT_NEAR(to_db(10.0), 10.0, 1e-15);
    EXPECT_NEAR(to_db(0.2512), -6.00, 0.005);
    EXPECT_THROW(to_db(0.0), Error);
    EXPECT_THROW(to_db(-1.0), Error);
    for (double v : {1e-6, 0.3, 1.0, 7.7, 1e8}) EXPECT_NEAR(from_db(to_db(v)) / v, 1.0, 1e-12);
}

// ---- properties ----

class TwoPhotonProperties : public ::testing::Test {
protected:
    std::mt19937_64 rng{7};
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

    RingCavity random_cavity() { return RingCavity(uniform(0.9, 0.9999), uniform(0.9, 0.9999), 713e6, 2.8e14); }
    DetectionModel random_detection() { return DetectionModel(uniform(0, 1), uniform(0, 1), uniform(0, 1)); }
    QuadraturePair random_input() {
        const double v1 = uniform(0.05, 1.0);
        return {v1, uniform(1.0 / v1, 3.0 / v1)};
    }
};

TEST_F(TwoPhotonProperties, VacuumFixedPoint) {
    for (int i = 0; i < 2000; ++i) {
        const auto t = transfer_at(random_cavity(), Detuning{uniform(-1.4e9, 1.4e9)}, uniform(0, 713e6));
        const auto v = reflect_variances(t, random_detection(), 1.0, 1.0);
        EXPECT_NEAR(v.v1, 1.0, 1e-12);
        EXPECT_NEAR(v.v2, 1.0, 1e-12);
    }
}

TEST_F(TwoPhotonProperties, PassivityAndDetunedSymmetry) {
    for (int i = 0; i < 1000; ++i) {
        const auto c = random_cavity();
        const double wd = uniform(-50e6, 50e6), w = uniform(0, 60e6);
        const auto t = transfer_at(c, Detuning{wd}, w);
        EXPECT_LE(t.a_plus * t.a_plus + t.a_minus * t.a_minus, 1.0 + 1e-14);
        EXPECT_LE(std::abs(t.a_minus), t.a_plus + 1e-15);
        const auto d = random_detection();
        const auto in = random_input();
        const auto a = reflect_variances(t, d, in.v1, in.v2);
        const auto b = reflect_variances(transfer_at(c, Detuning{-wd}, w), d, in.v1, in.v2);
        EXPECT_NEAR(a.v1, b.v1, 1e-12 * a.v1);
        EXPECT_NEAR(a.v2, b.v2, 1e-12 * a.v2);
    }
}

TEST_F(TwoPhotonProperties, PureStateThroughLosslessUndetunedCavity) {
    TwoPhotonTransfer t;  // A+ = 1, A- = 0, phi+ = 0
    for (int i = 0; i < 200; ++i) {
        const double v1 = uniform(0.01, 1.0);
        const auto v = reflect_variances(t, DetectionModel::ideal(), v1, 1.0 / v1);
        EXPECT_NEAR(v.v1 * v.v2, 1.0, 1e-12);
    }
}

TEST_F(TwoPhotonProperties, QuarterTurnSwapsQuadratures) {
    TwoPhotonTransfer t;
    t.phi_plus = ref::pi / 2.0;
    for (int i = 0; i < 100; ++i) {
        const auto in = random_input();
        const auto v = reflect_variances(t, DetectionModel::ideal(), in.v1, in.v2);
        EXPECT_NEAR(v.v1, in.v2, 1e-12 * in.v2);
        EXPECT_NEAR(v.v2, in.v1, 1e-12);
    }
}

TEST_F(TwoPhotonProperties, OutputsBoundedByInputsAndVacuum) {
    for (int i = 0; i < 2000; ++i) {
        const auto t = transfer_at(random_cavity(), Detuning{uniform(-50e6, 50e6)}, uniform(0, 60e6));
        const auto in = random_input();
        const auto v = reflect_variances(t, random_detection(), in.v1, in.v2);
        const double lo = std::min({in.v1, in.v2, 1.0}), hi = std::max({in.v1, in.v2, 1.0});
        for (double x : {v.v1, v.v2}) {
            EXPECT_GE(x, lo * (1.0 - 1e-12));
            EXPECT_LE(x, hi * (1.0 + 1e-12));
        }
    }
}

TEST_F(TwoPhotonProperties, SpectrumSymmetricInDetuningSign) {
    const auto grid = linear_grid(1e6, 30e6, 117);
    for (int i = 0; i < 20; ++i) {
        const auto c = random_cavity();
        const double wd = uniform(1e6, 30e6);
        const auto sq = InputSqueezingModel::opo_lorentzian(uniform(0, 0.9), 66.2e6, uniform(0.1, 1.0));
        const auto d = random_detection();
        const auto a = spectrum(c, Detuning{wd}, sq, d, grid);
        const auto b = spectrum(c, Detuning{-wd}, sq, d, grid);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            EXPECT_NEAR(a.v1[k], b.v1[k], 1e-12 * a.v1[k]);
            EXPECT_NEAR(a.v2[k], b.v2[k], 1e-12 * a.v2[k]);
        }
    }
}

TEST_F(TwoPhotonProperties, HeisenbergOnEveryGridPoint) {
    for (int i = 0; i < 50; ++i) {
        const auto sq = InputSqueezingModel::opo_lorentzian(uniform(0, 0.99), uniform(1e6, 1e8), uniform(0.01, 1.0));
        for (double w = 0.0; w < 1e9; w += 7.3e6) {
            const auto v = sq.at(w);
            EXPECT_GE(v.v1 * v.v2, 1.0 - 1e-12);
            EXPECT_GT(v.v1, 0.0);
        }
    }
}
