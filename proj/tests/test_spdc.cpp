#include <catch2/catch_amalgamated.hpp>

#include <qiup/errors.hpp>
#include <qiup/math.hpp>
#include <qiup/optics.hpp>
#include <qiup/spdc.hpp>

#include <cmath>
#include <random>

using namespace qiup;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

OpticalConfig anchor() { return OpticalConfig::from_signal_idler(530e-9, 10e-6, 100e-6, 100e-6); }

}

TEST_CASE("joint angular amplitude frozen value") {
    PumpProfile pump = PumpProfile::gaussian(100e-6);
    CHECK_THAT(joint_angular_amplitude(0.01, -0.18, anchor(), pump, 100e-6),
               WithinRel(0.7927559299181496, 1e-12));
}

TEST_CASE("joint angular amplitude on the anti-correlation ridge") {
    // q_s + q_i vanishes where sin(theta_s) = -(lambda_s/lambda_i) sin(theta_i)
    OpticalConfig c = OpticalConfig::from_signal_idler(900e-9, 1125e-9, 1e-3, 1e-3);
    PumpProfile pump = PumpProfile::gaussian(10e-6);
    CHECK_THAT(joint_angular_amplitude(-std::asin(0.8), M_PI / 2.0, c, pump, 3e-9),
               WithinRel(0.9999736812627357, 1e-12));
    CHECK(joint_angular_amplitude(0.3, 0.3, c, pump, 3e-9) < 1e-200);
}

TEST_CASE("joint angular amplitude parity") {
    PumpProfile pump = PumpProfile::gaussian(30e-6);
    for (double ts : {0.01, 0.04, 0.02}) {
        for (double ti : {-0.9, 0.3, 1.2}) {
            double a = joint_angular_amplitude(ts, ti, anchor(), pump, 50e-6);
            double b = joint_angular_amplitude(-ts, -ti, anchor(), pump, 50e-6);
            CHECK_THAT(a, WithinRel(b, 1e-14));
        }
    }
}

TEST_CASE("joint angular amplitude degenerate exchange symmetry") {
    OpticalConfig c = OpticalConfig::from_signal_idler(1060e-9, 1060e-9, 1e-3, 1e-3);
    PumpProfile pump = PumpProfile::gaussian(20e-6);
    for (double ts : {0.1, -0.4, 0.8}) {
        for (double ti : {-0.15, 0.35}) {
            CHECK_THAT(joint_angular_amplitude(ts, ti, c, pump, 10e-6),
                       WithinRel(joint_angular_amplitude(ti, ts, c, pump, 10e-6), 1e-14));
        }
    }
}

TEST_CASE("joint angular amplitude finite at grazing angles") {
    PumpProfile pump = PumpProfile::gaussian(100e-6);
    for (double ts : {-M_PI / 2.0, M_PI / 2.0}) {
        double v = joint_angular_amplitude(ts, -M_PI / 2.0, anchor(), pump, 100e-6);
        CHECK(std::isfinite(v));
    }
}

TEST_CASE("no angular support beyond the signal cutoff") {
    PumpProfile pump = PumpProfile::gaussian(100e-6);
    OpticalConfig c = anchor();
    const double ts = 1.5 * signal_angle_cutoff(c);
    double worst = 0.0;
    for (int i = 0; i <= 200; ++i) {
        double ti = -M_PI / 2.0 + M_PI * i / 200.0;
        worst = std::max(worst, std::abs(joint_angular_amplitude(ts, ti, c, pump, 100e-9)));
    }
    CHECK(worst < 1e-100);
}

TEST_CASE("ridge mass scales inversely with pump width") {
    // integral over theta_i of |phi|^2 at fixed theta_s halves when sigma doubles
    OpticalConfig c = anchor();
    auto mass = [&](double sigma) {
        PumpProfile pump = PumpProfile::gaussian(sigma);
        MappedRule r = map_rule(2000, -M_PI / 2.0, M_PI / 2.0);
        double s = 0.0;
        for (std::size_t i = 0; i < r.x.size(); ++i) {
            double v = joint_angular_amplitude(0.01, r.x[i], c, pump, 100e-9);
            s += r.w[i] * v * v;
        }
        return s;
    };
    CHECK_THAT(mass(10e-6) / mass(20e-6), WithinRel(2.0, 1e-2));
}

TEST_CASE("joint momentum amplitude frozen value and support") {
    OpticalConfig c = anchor();
    PumpProfile pump = PumpProfile::gaussian(100e-6);
    CHECK_THAT(joint_momentum_amplitude(3e5, -2.8e5, c, pump, 100e-6),
               WithinRel(-5.012372641753423e-9, 1e-12));

    const double ks = two_pi / c.lambda_s, ki = two_pi / c.lambda_i;
    CHECK(joint_momentum_amplitude(ks * 1.001, 0.0, c, pump, 100e-6) == 0.0);
    CHECK(joint_momentum_amplitude(0.0, -ki * 1.5, c, pump, 100e-6) == 0.0);
    CHECK_THROWS_AS(joint_momentum_amplitude(ks, 0.0, c, pump, 100e-6), std::domain_error);
    CHECK_THROWS_AS(joint_momentum_amplitude(0.0, -ki, c, pump, 100e-6), std::domain_error);
}

TEST_CASE("momentum and angular forms agree through the jacobian") {
    OpticalConfig c = anchor();
    PumpProfile pump = PumpProfile::gaussian(100e-6);
    const double ks = two_pi / c.lambda_s, ki = two_pi / c.lambda_i;
    std::mt19937 rng(7151);
    std::uniform_real_distribution<double> ang(-0.99 * M_PI / 2.0, 0.99 * M_PI / 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        const double ts = ang(rng), ti = ang(rng);
        const double qs = ks * std::sin(ts), qi = ki * std::sin(ti);
        const double phi_q = joint_momentum_amplitude(qs, qi, c, pump, 100e-6);
        const double phi_t = joint_angular_amplitude(ts, ti, c, pump, 100e-6);
        const double lhs = phi_q * phi_q * kz(qs, c.lambda_s) * kz(qi, c.lambda_i);
        if (phi_t * phi_t > 1e-300) {
            CHECK_THAT(lhs, WithinRel(phi_t * phi_t, 1e-10));
        } else {
            CHECK(lhs < 1e-290);
        }
    }
}

TEST_CASE("angular probability map structure") {
    OpticalConfig c = anchor();
    PumpProfile pump = PumpProfile::gaussian(100e-6);
    AngularProbabilityMap m = angular_probability_map(c, pump, 100e-9, 128);
    REQUIRE(m.theta_s.size() == 128);
    REQUIRE(m.theta_i.size() == 128);
    REQUIRE(m.values.size() == 128 * 128);
    CHECK(m.theta_s.front() == -M_PI / 2.0);
    CHECK(m.theta_s.back() == M_PI / 2.0);
    CHECK(m.raw_peak > 0.0);

    double peak = 0.0, sum = 0.0;
    for (double v : m.values) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0 + 1e-12);
        peak = std::max(peak, v);
        sum += v;
    }
    CHECK_THAT(peak, WithinRel(1.0, 1e-12));
    CHECK(sum > 1.0);

    // parity: symmetric axes make the map centro-symmetric
    const std::size_t n = 128;
    for (std::size_t i = 0; i < n; i += 7) {
        for (std::size_t j = 0; j < n; j += 7) {
            CHECK_THAT(m.at(i, j), WithinAbs(m.at(n - 1 - i, n - 1 - j), 1e-12));
        }
    }
}

TEST_CASE("angular probability map mass stays inside the cutoff band") {
    OpticalConfig c = anchor();
    PumpProfile pump = PumpProfile::gaussian(100e-6);
    AngularProbabilityMap m = angular_probability_map(c, pump, 100e-9, 256);
    const double band = 3.3 * M_PI / 180.0;
    double inside = 0.0, outside = 0.0;
    for (std::size_t i = 0; i < m.theta_s.size(); ++i) {
        for (std::size_t j = 0; j < m.theta_i.size(); ++j) {
            (std::abs(m.theta_s[i]) <= band ? inside : outside) += m.at(i, j);
        }
    }
    CHECK(outside < 1e-3 * (inside + outside));
}

TEST_CASE("angular probability map rejects a grid that misses the ridge") {
    // a metre-wide pump confines q_s + q_i far below the grid spacing
    CHECK_THROWS_AS(angular_probability_map(anchor(), PumpProfile::gaussian(1.0), 100e-9, 128),
                    window_error);
}

TEST_CASE("thick source suppresses large-angle ridge points") {
    OpticalConfig c = OpticalConfig::from_pump_signal(500e-9, 1000e-9, 1e-3, 1e-3);
    PumpProfile pump = PumpProfile::gaussian(10e-6);
    // thin source: the whole anti-diagonal is lit
    CHECK(std::abs(joint_angular_amplitude(0.05, -0.05, c, pump, 3e-9)) > 0.95);
    CHECK(std::abs(joint_angular_amplitude(1.0, -1.0, c, pump, 3e-9)) > 0.95);
    // thick source: longitudinal matching trims it to small angles
    CHECK(std::abs(joint_angular_amplitude(0.05, -0.05, c, pump, 20e-6)) > 0.9);
    CHECK(std::abs(joint_angular_amplitude(1.0, -1.0, c, pump, 20e-6)) < 0.02);
}

TEST_CASE("joint amplitude map in both representations") {
    OpticalConfig c = anchor();
    PumpProfile pump = PumpProfile::gaussian(100e-6);

    JointAmplitudeMap a = joint_amplitude_map(Representation::Angular, c, pump, 100e-6, 64);
    REQUIRE(a.axis_s.size() == 64);
    REQUIRE(a.values.size() == 64 * 64);
    CHECK(a.axis_s.front() == -M_PI / 2.0);
    const std::size_t is = 31, ii = 7;
    CHECK_THAT(a.values[is * 64 + ii].real(),
               WithinAbs(joint_angular_amplitude(a.axis_s[is], a.axis_i[ii], c, pump, 100e-6), 1e-15));
    CHECK(a.values[is * 64 + ii].imag() == 0.0);

    JointAmplitudeMap q = joint_amplitude_map(Representation::Momentum, c, pump, 100e-6, 64);
    const double ks = two_pi / c.lambda_s, ki = two_pi / c.lambda_i;
    // cell centres keep every sample strictly inside the propagation rectangle
    CHECK(std::abs(q.axis_s.front()) < ks);
    CHECK(std::abs(q.axis_s.back()) < ks);
    CHECK(std::abs(q.axis_i.front()) < ki);
    for (const auto& v : q.values) CHECK(std::isfinite(v.real()));
    CHECK_THAT(q.values[is * 64 + ii].real(),
               WithinAbs(joint_momentum_amplitude(q.axis_s[is], q.axis_i[ii], c, pump, 100e-6), 1e-15));
}
