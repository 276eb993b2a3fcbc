#include <catch2/catch_amalgamated.hpp>

#include <qiup/errors.hpp>
#include <qiup/math.hpp>
#include <qiup/optics.hpp>

#include <cmath>

using namespace qiup;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("sinc value and removable singularity") {
    CHECK(sinc(0.0) == 1.0);
    CHECK_THAT(sinc(1e-5), WithinRel(1.0 - 1e-10 / 6.0, 1e-15));
    CHECK_THAT(sinc(M_PI), WithinAbs(0.0, 1e-15));
    CHECK_THAT(sinc(1.3), WithinRel(std::sin(1.3) / 1.3, 1e-15));
    CHECK(sinc(-2.7) == sinc(2.7));
}

TEST_CASE("gauss_legendre integrates polynomials exactly") {
    // order n is exact through degree 2n-1
    for (int n : {2, 8, 64}) {
        const QuadRule& r = gauss_legendre(n);
        double s0 = 0.0, s2 = 0.0, shi = 0.0;
        for (int i = 0; i < n; ++i) {
            s0 += r.w[i];
            s2 += r.w[i] * r.x[i] * r.x[i];
            shi += r.w[i] * std::pow(r.x[i], 2 * n - 2);
        }
        CHECK_THAT(s0, WithinRel(2.0, 1e-14));
        CHECK_THAT(s2, WithinRel(2.0 / 3.0, 1e-14));
        CHECK_THAT(shi, WithinRel(2.0 / (2.0 * n - 1.0), 1e-13));
    }
}

TEST_CASE("map_rule integrates over shifted interval") {
    MappedRule r = map_rule(16, 1.0, 3.0);
    double s = 0.0;
    for (std::size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * r.x[i] * r.x[i];
    CHECK_THAT(s, WithinRel(26.0 / 3.0, 1e-14));
}

TEST_CASE("kz on axis, interior, boundary, and outside") {
    const double lam = 530e-9;
    const double k = two_pi / lam;
    CHECK_THAT(kz(0.0, lam), WithinRel(k, 1e-15));
    const double q = 0.3 * k;
    CHECK_THAT(kz(q, lam), WithinRel(k * std::sqrt(1.0 - 0.09), 1e-14));
    CHECK(kz(k, lam) == 0.0);
    CHECK(kz(-k, lam) == 0.0);
    CHECK_THROWS_AS(kz(k * (1.0 + 1e-9), lam), std::domain_error);
    CHECK(kz(0.5 * k, lam) > kz(0.9 * k, lam));
}

TEST_CASE("wavelength arithmetic from energy conservation") {
    CHECK_THAT(idler_wavelength(500e-9, 625e-9), WithinRel(2500e-9, 1e-14));
    CHECK_THAT(idler_wavelength(530e-9, 1060e-9), WithinRel(1060e-9, 1e-14));
    CHECK_THROWS_AS(idler_wavelength(500e-9, 500e-9), std::domain_error);
    CHECK_THROWS_AS(idler_wavelength(500e-9, 400e-9), std::domain_error);
    CHECK_THAT(pump_wavelength(530e-9, 10e-6), WithinRel(503.3238366571700e-9, 1e-14));
    CHECK_THAT(pump_wavelength(625e-9, 2500e-9), WithinRel(500e-9, 1e-14));
}

TEST_CASE("optical config factories agree and validate") {
    OpticalConfig a = OpticalConfig::from_signal_idler(530e-9, 10e-6, 2e-3, 100e-9);
    CHECK_THAT(a.lambda_p, WithinRel(503.3238366571700e-9, 1e-14));
    OpticalConfig b = OpticalConfig::from_pump_signal(a.lambda_p, 530e-9, 2e-3, 100e-9);
    CHECK_THAT(b.lambda_i, WithinRel(10e-6, 1e-12));

    OpticalConfig bad = a;
    bad.lambda_s = -1.0;
    CHECK_THROWS_AS(bad.validate(), config_error);
    bad = a;
    bad.L_a = -1e-9;
    CHECK_THROWS_AS(bad.validate(), config_error);
    bad = a;
    bad.lambda_p *= 1.001;  // breaks energy conservation
    CHECK_THROWS_AS(bad.validate(), config_error);
    CHECK_NOTHROW(a.validate());
    a.L_b = 0.0;  // zero thickness is a valid limit
    CHECK_NOTHROW(a.validate());
}

TEST_CASE("signal angle cutoff") {
    OpticalConfig c = OpticalConfig::from_signal_idler(530e-9, 10e-6, 2e-3, 2e-3);
    CHECK_THAT(signal_angle_cutoff(c) * 180.0 / M_PI, WithinRel(3.038099784894369, 1e-13));
    OpticalConfig d = OpticalConfig::from_signal_idler(10e-6, 530e-9, 2e-3, 2e-3);
    CHECK_THAT(signal_angle_cutoff(d), WithinRel(M_PI / 2.0, 1e-13));
}

TEST_CASE("pump envelope") {
    PumpProfile g = PumpProfile::gaussian(100e-6);
    CHECK(pump_envelope(0.0, g) == 1.0);
    CHECK(pump_envelope(3e3, g) == pump_envelope(-3e3, g));
    CHECK_THAT(pump_envelope(1e4, g), WithinRel(std::exp(-0.5), 1e-13));
    CHECK(pump_envelope(1e9, g) == 0.0);  // underflows cleanly
    CHECK_THROWS_AS(pump_envelope(0.0, PumpProfile::plane_wave()), unsupported_profile_error);
    CHECK_THROWS_AS(PumpProfile::gaussian(0.0), config_error);
    CHECK_THROWS_AS(PumpProfile::gaussian(-1e-6), config_error);
}

TEST_CASE("phase mismatch sinc at collinear degenerate point is one for any thickness") {
    OpticalConfig c = OpticalConfig::from_signal_idler(530e-9, 530e-9, 1e-3, 1e-3);
    for (double L : {0.0, 1e-6, 1e-3}) {
        CHECK_THAT(phase_mismatch_sinc(0.0, 0.0, c, L), WithinRel(1.0, 1e-14));
    }
}

TEST_CASE("phase mismatch sinc frozen values") {
    OpticalConfig c = OpticalConfig::from_signal_idler(530e-9, 10e-6, 100e-6, 100e-6);
    CHECK_THAT(phase_mismatch_sinc(0.0, 0.0, c, 100e-6), WithinRel(1.0, 1e-12));
    CHECK_THAT(phase_mismatch_sinc(0.2, -0.7, c, 100e-6),
               WithinRel(-0.07425600580865924, 1e-12));
    CHECK_THAT(phase_mismatch_sinc(0.2, -0.7, c, 100e-9),
               WithinRel(0.9999778145725748, 1e-12));
}

TEST_CASE("phase mismatch sinc finite at grazing angles") {
    OpticalConfig c = OpticalConfig::from_signal_idler(530e-9, 10e-6, 100e-6, 100e-6);
    for (double ts : {-M_PI / 2.0, M_PI / 2.0}) {
        for (double ti : {-M_PI / 2.0, 0.3, M_PI / 2.0}) {
            double v = phase_mismatch_sinc(ts, ti, c, 100e-6);
            CHECK(std::isfinite(v));
            CHECK(std::abs(v) <= 1.0);
        }
    }
}

TEST_CASE("quadrature spec validation") {
    QuadratureSpec q;
    CHECK_NOTHROW(q.validate());
    q.n_theta = 63;
    CHECK_THROWS_AS(q.validate(), config_error);
    q.n_theta = 32;
    CHECK_THROWS_AS(q.validate(), config_error);
    q = QuadratureSpec{};
    q.rel_tol = 0.0;
    CHECK_THROWS_AS(q.validate(), config_error);
    q = QuadratureSpec{};
    q.rel_tol = 0.1;
    CHECK_THROWS_AS(q.validate(), config_error);
    q = QuadratureSpec{};
    q.n_refine_max = 0;
    CHECK_THROWS_AS(q.validate(), config_error);
}

TEST_CASE("quad_interp3 reproduces a parabola") {
    double xs[3] = {-1.0, 0.5, 2.0};
    double ys[3];
    auto f = [](double x) { return 3.0 * x * x - 2.0 * x + 7.0; };
    for (int i = 0; i < 3; ++i) ys[i] = f(xs[i]);
    CHECK_THAT(quad_interp3(xs, ys, 1.2), WithinRel(f(1.2), 1e-13));
    CHECK_THAT(quad_interp3(xs, ys, -0.4), WithinRel(f(-0.4), 1e-13));
}

TEST_CASE("parallel_for covers the index range once") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
    std::vector<int> serial(7, 0);
    parallel_for(serial.size(), 1, [&](std::size_t i) { serial[i] += 1; });
    for (int h : serial) CHECK(h == 1);
}

TEST_CASE("sin window intersection and emptiness") {
    SinWindow a{-0.5, 0.8}, b{0.2, 1.0};
    SinWindow c = a.intersect(b);
    CHECK(c.lo == 0.2);
    CHECK(c.hi == 0.8);
    CHECK_FALSE(c.empty());
    SinWindow d{0.9, 0.1};
    CHECK(d.empty());
    CHECK(a.intersect(d).empty());
}
