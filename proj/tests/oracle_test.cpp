#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles/reference.hpp"
#include "sqzcav/error.hpp"
#include "sqzcav/oracle.hpp"
#include "sqzcav/two_photon.hpp"

using namespace sqzcav;
using oracle::SidebandState;

namespace {

RingCavity nominal_cavity() {
    return RingCavity::from_amplitudes(0.99783, 0.99628, 713e6, kSpeedOfLight / 1064e-9);
}

QuadraturePair analytic(const RingCavity& c, double wd, const DetectionModel& d, QuadraturePair in, double w) {
    return reflect_variances(transfer_at(c, Detuning{wd}, std::abs(w)), d, in.v1, in.v2);
}

struct Draw {
    RingCavity cavity;
    double omega_d;
    double omega;
    DetectionModel detection;
    QuadraturePair input;
};

Draw random_draw(std::mt19937_64& rng) {
    auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    const double v1 = u(0.05, 1.0);
    return {RingCavity(u(0.9, 1.0), u(0.9, 1.0), 713e6, 2.8e14), u(-2 * 713e6, 2 * 713e6),
            u(-713e6, 713e6), DetectionModel(u(0, 1), u(0, 1), u(0, 1)), {v1, u(1.0 / v1, 4.0 / v1)}};
}

}  // namespace

TEST(SidebandState, QuadratureRoundTrip) {
    const auto s = SidebandState::from_quadratures(0.4, 3.0);
    EXPECT_NEAR(s.quadratures().v1, 0.4, 1e-15);
    EXPECT_NEAR(s.quadratures().v2, 3.0, 1e-15);
    const auto vac = SidebandState::vacuum().quadratures();
    EXPECT_EQ(vac.v1, 1.0);
    EXPECT_EQ(vac.v2, 1.0);
}

TEST(SidebandState, RejectsNonphysicalMoments) {
    EXPECT_THROW(SidebandState::from_quadratures(0.4, 2.0), Error);  // below the uncertainty bound
    SidebandState s;
    s.n_upper = 0.1;
    s.n_lower = 0.1;
    s.correlation = 0.5;
    EXPECT_THROW(s.validate(), Error);
    EXPECT_THROW(oracle::propagate_sidebands(nominal_cavity(), Detuning{0.0}, DetectionModel::ideal(), s, 1e6),
                 Error);
}

TEST(PropagateSidebands, VacuumInVacuumOut) {
    const auto out = oracle::propagate_sidebands(nominal_cavity(), Detuning{-11.098e6},
                                                 DetectionModel(0.5, 0.3, 0.2), SidebandState::vacuum(), 11e6);
    EXPECT_EQ(out.quadratures().v1, 1.0);
    EXPECT_EQ(out.quadratures().v2, 1.0);
}

TEST(PropagateSidebands, UndetunedMatchesAnalytic) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 1000; ++i) {
        auto d = random_draw(rng);
        const auto in = SidebandState::from_quadratures(d.input.v1, d.input.v2);
        const auto out = oracle::propagate_sidebands(d.cavity, Detuning{0.0}, d.detection, in, d.omega).quadratures();
        const auto expected = analytic(d.cavity, 0.0, d.detection, d.input, d.omega);
        EXPECT_NEAR(out.v1, expected.v1, 1e-12 * expected.v1);
        EXPECT_NEAR(out.v2, expected.v2, 1e-12 * expected.v2);
    }
}

TEST(PropagateSidebands, DetunedCavityDestroysCorrelation) {
    const auto in = SidebandState::from_quadratures(0.3, 6.0);
    const auto out = oracle::propagate_sidebands(nominal_cavity(), Detuning{-11.098e6}, DetectionModel::ideal(),
                                                 in, 11.098e6);
    EXPECT_LT(std::abs(out.correlation), std::abs(in.correlation));
    EXPECT_LT(std::abs(out.correlation), 0.2 * std::abs(in.correlation));
}

TEST(PropagateSidebands, CorrelationMinimumAtResonantSideband) {
    const auto in = SidebandState::from_quadratures(0.3, 6.0);
    const auto c = nominal_cavity();
    auto corr = [&](double w) {
        return std::abs(oracle::propagate_sidebands(c, Detuning{-11.098e6}, DetectionModel::ideal(), in, w).correlation);
    };
    const double at = corr(11.098e6);
    for (double step : {1e3, 1e4, 1e5, 1e6}) {
        EXPECT_LT(at, corr(11.098e6 + step)) << step;
        EXPECT_LT(at, corr(11.098e6 - step)) << step;
    }
}

TEST(PropagateSidebands, EquivalentToMatrixPipeline) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 1000; ++i) {
        auto d = random_draw(rng);
        const auto in = SidebandState::from_quadratures(d.input.v1, d.input.v2);
        const auto out = oracle::propagate_sidebands(d.cavity, Detuning{d.omega_d}, d.detection, in, d.omega).quadratures();
        const auto expected = analytic(d.cavity, d.omega_d, d.detection, d.input, d.omega);
        EXPECT_NEAR(out.v1, expected.v1, 1e-10 * expected.v1);
        EXPECT_NEAR(out.v2, expected.v2, 1e-10 * expected.v2);
    }
}

TEST(MonteCarlo, VacuumInput) {
    const auto mc = oracle::monte_carlo_variances(nominal_cavity(), Detuning{-11.098e6},
                                                  InputSqueezingModel::constant(1, 1),
                                                  DetectionModel::from_coupled(0.765), 11.098e6, 100000, 1);
    EXPECT_NEAR(mc.v1, 1.0, 3.0 * mc.stderr1);
    EXPECT_NEAR(mc.v2, 1.0, 3.0 * mc.stderr2);
    EXPECT_GT(mc.stderr1, 0.0);
}

TEST(MonteCarlo, FarOffResonanceMatchesAnalytic) {
    const auto c = nominal_cavity();
    const auto sq = InputSqueezingModel::opo_lorentzian(0.41, 66.2e6, 0.7);
    const auto d = DetectionModel::from_coupled(0.765, 0.1);
    const double w = 40e6;
    const auto mc = oracle::monte_carlo_variances(c, Detuning{-11.098e6}, sq, d, w, 100000, 2);
    const auto in = sq.at(w);
    const auto expected = reflect_variances(transfer_at(c, Detuning{-11.098e6}, w), d, in.v1, in.v2);
    EXPECT_NEAR(mc.v1, expected.v1, 3.0 * mc.stderr1);
    EXPECT_NEAR(mc.v2, expected.v2, 3.0 * mc.stderr2);
}

TEST(MonteCarlo, Deterministic) {
    const auto c = nominal_cavity();
    const auto sq = InputSqueezingModel::constant(0.5, 3.0);
    const auto d = DetectionModel::ideal();
    const auto a = oracle::monte_carlo_variances(c, Detuning{-11e6}, sq, d, 11e6, 20000, 99);
    const auto b = oracle::monte_carlo_variances(c, Detuning{-11e6}, sq, d, 11e6, 20000, 99);
    EXPECT_EQ(a.v1, b.v1);
    EXPECT_EQ(a.v2, b.v2);
    EXPECT_EQ(a.stderr1, b.stderr1);
    const auto other = oracle::monte_carlo_variances(c, Detuning{-11e6}, sq, d, 11e6, 20000, 100);
    EXPECT_NE(a.v1, other.v1);
}

TEST(MonteCarlo, RejectsTooFewSamples) {
    EXPECT_THROW(oracle::monte_carlo_variances(nominal_cavity(), Detuning{0.0}, InputSqueezingModel::constant(1, 1),
                                               DetectionModel::ideal(), 1e6, 999, 1),
                 Error);
}

TEST(MonteCarlo, Unbiased) {
    const auto c = nominal_cavity();
    const auto sq = InputSqueezingModel::opo_lorentzian(0.5, 66.2e6, 0.9);
    const auto d = DetectionModel(0.7, 0.2, 0.1);
    const double w = 11.5e6;
    const auto in = sq.at(w);
    const auto expected = reflect_variances(transfer_at(c, Detuning{-11.098e6}, w), d, in.v1, in.v2);
    double sum = 0.0, worst = 0.0;
    const int runs = 100;
    for (int run = 0; run < runs; ++run) {
        const auto mc = oracle::monte_carlo_variances(c, Detuning{-11.098e6}, sq, d, w, 5000, 1000 + run);
        for (double z : {(mc.v1 - expected.v1) / mc.stderr1, (mc.v2 - expected.v2) / mc.stderr2}) {
            sum += z;
            worst = std::max(worst, std::abs(z));
        }
    }
    EXPECT_LT(std::abs(sum / (2.0 * runs)), 0.5);
    EXPECT_LT(worst, 5.0);
}
