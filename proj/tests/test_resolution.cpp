#include <catch2/catch_amalgamated.hpp>

#include <qiup/errors.hpp>
#include <qiup/imaging.hpp>
#include <qiup/math.hpp>
#include <qiup/optics.hpp>
#include <qiup/resolution.hpp>

#include <cmath>
#include <vector>

using namespace qiup;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

OpticalConfig pair_at(double ls, double li, double L) {
    return OpticalConfig::from_signal_idler(ls, li, L, L);
}

}

TEST_CASE("paraxial closed form frozen values") {
    CHECK_THAT(paraxial_prefactor(), WithinAbs(0.6831273949407967, 1e-15));
    CHECK_THAT(paraxial_prefactor(), WithinAbs(0.6831, 1e-4));
    CHECK_THAT(paraxial_dmin(530e-9, 10e-6, 100e-6, 100e-6),
               WithinRel(1.5674759626828174e-5, 1e-12));
}

TEST_CASE("paraxial closed form scaling and symmetry") {
    const double base = paraxial_dmin(530e-9, 10e-6, 50e-6, 50e-6);
    CHECK_THAT(paraxial_dmin(530e-9, 10e-6, 100e-6, 100e-6),
               WithinRel(std::sqrt(2.0) * base, 1e-12));
    CHECK_THAT(paraxial_dmin(10e-6, 530e-9, 50e-6, 50e-6), WithinRel(base, 1e-12));
    CHECK_THAT(paraxial_dmin(530e-9, 10e-6, 20e-6, 80e-6),
               WithinRel(paraxial_dmin(530e-9, 10e-6, 80e-6, 20e-6), 1e-12));
}

TEST_CASE("paraxial closed form rejects non-positive inputs") {
    CHECK_THROWS_AS(paraxial_dmin(0.0, 10e-6, 1e-6, 1e-6), std::domain_error);
    CHECK_THROWS_AS(paraxial_dmin(530e-9, -1e-6, 1e-6, 1e-6), std::domain_error);
    CHECK_THROWS_AS(paraxial_dmin(530e-9, 10e-6, 0.0, 1e-6), std::domain_error);
    CHECK_THROWS_AS(paraxial_dmin(530e-9, 10e-6, 1e-6, 0.0), std::domain_error);
}

TEST_CASE("dip ratio interpolates the centre sample") {
    ImageProfile p;
    p.x_axis = {-2.0, -1.0, 0.0, 1.0, 2.0};
    p.values = {1.0, 0.9, 0.8, 0.9, 1.0};
    CHECK_THAT(dip_ratio(p), WithinRel(0.8, 1e-14));
}

TEST_CASE("dip ratio interpolates between samples straddling the centre") {
    ImageProfile p;
    p.x_axis = {-1.5, -0.5, 0.5, 1.5};
    p.values = {1.0, 0.85, 0.85, 1.0};
    // parabola through the three samples nearest x = 0
    CHECK_THAT(dip_ratio(p), WithinRel(0.83125, 1e-14));
}

TEST_CASE("dip ratio rejects malformed profiles") {
    ImageProfile empty;
    CHECK_THROWS_AS(dip_ratio(empty), std::invalid_argument);
    ImageProfile zeros;
    zeros.x_axis = {-1.0, 0.0, 1.0};
    zeros.values = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS(dip_ratio(zeros), std::invalid_argument);
    ImageProfile two;
    two.x_axis = {-1.0, 1.0};
    two.values = {1.0, 1.0};
    CHECK_THROWS_AS(dip_ratio(two), std::invalid_argument);
}

TEST_CASE("dip ratio limits for extreme separations") {
    OpticalConfig cfg = pair_at(530e-9, 10e-6, 100e-9);
    PumpProfile pump = PumpProfile::gaussian(1.0);
    ImageProfile wide = image_reduced(symmetric_linspace(1.5 * 40e-6, 201), cfg, pump,
                                      SlitObject::double_slit(40e-6), cfg.L_a, cfg.L_b);
    CHECK(dip_ratio(wide) < 0.1);
    ImageProfile merged = image_reduced(symmetric_linspace(1.5 * 0.4e-6, 201), cfg, pump,
                                        SlitObject::double_slit(0.4e-6), cfg.L_a, cfg.L_b);
    CHECK(dip_ratio(merged) > 0.99);
}

TEST_CASE("minimum resolvable distance for the anchor pairs") {
    QuadratureSpec quad;
    PumpProfile surrogate = PumpProfile::gaussian(1.0);
    ResolutionResult anchor = min_resolvable_distance(pair_at(530e-9, 10e-6, 100e-9), surrogate,
                                                      100e-9, 100e-9, quad);
    CHECK(anchor.d_min > 4.44e-6);
    CHECK(anchor.d_min < 4.54e-6);
    CHECK_THAT(anchor.dip_at_dmin, WithinAbs(0.8, 0.005));
    CHECK(anchor.d_lo < anchor.d_min);
    CHECK(anchor.d_min < anchor.d_hi);
    CHECK(anchor.iterations > 0);
    // the paraxial formula applied this deep into the thin regime reports a
    // spurious three-quarters resolution gain
    const double paraxial = paraxial_dmin(530e-9, 10e-6, 100e-9, 100e-9);
    CHECK(std::abs(anchor.d_min - paraxial) / anchor.d_min > 0.5);

    PumpProfile lab = PumpProfile::gaussian(100e-6);
    ResolutionResult swapped =
        min_resolvable_distance(pair_at(10e-6, 530e-9, 100e-9), lab, 100e-9, 100e-9, quad);
    CHECK_THAT(swapped.d_min / 10e-6, WithinAbs(0.40, 0.02));
    ResolutionResult degenerate =
        min_resolvable_distance(pair_at(10e-6, 10e-6, 100e-9), lab, 100e-9, 100e-9, quad);
    CHECK_THAT(degenerate.d_min / 10e-6, WithinAbs(0.37, 0.02));
    CHECK(degenerate.d_min < swapped.d_min);
}

TEST_CASE("minimum resolvable distance reports bracket failures") {
    OpticalConfig cfg = pair_at(530e-9, 10e-6, 100e-9);
    PumpProfile pump = PumpProfile::gaussian(100e-6);
    SearchSpec beyond;
    beyond.d_lo = 5e-6;  // already past the crossing, dip < 0.8
    beyond.d_hi = 8e-6;
    CHECK_THROWS_AS(min_resolvable_distance(cfg, pump, 100e-9, 100e-9, {}, beyond),
                    bracket_error);
    SearchSpec short_range;
    short_range.d_lo = 0.5e-6;  // entire range resolves with dip > 0.8
    short_range.d_hi = 2e-6;
    CHECK_THROWS_AS(min_resolvable_distance(cfg, pump, 100e-9, 100e-9, {}, short_range),
                    bracket_error);
}

TEST_CASE("point spread functions order by wavelength arrangement") {
    PumpProfile pump = PumpProfile::gaussian(100e-6);
    auto metrics_of = [&](double ls, double li) {
        OpticalConfig cfg = pair_at(ls, li, 100e-9);
        const double max_lambda = std::max(ls, li);
        ImageProfile profile =
            psf(cfg, pump, cfg.L_a, cfg.L_b, symmetric_linspace(1.5 * max_lambda, 241));
        for (std::size_t i = 0; i < profile.values.size(); ++i)
            CHECK_THAT(profile.values[i],
                       WithinAbs(profile.values[profile.values.size() - 1 - i], 1e-9));
        return psf_metrics(profile);
    };
    PsfMetrics aniso = metrics_of(530e-9, 10e-6);
    PsfMetrics swapped = metrics_of(10e-6, 530e-9);
    PsfMetrics degenerate = metrics_of(10e-6, 10e-6);
    CHECK_THAT(aniso.fwhm, WithinAbs(3.9276e-6, 0.08e-6));
    CHECK_THAT(aniso.first_side_lobe, WithinAbs(0.0779, 0.01));
    CHECK_THAT(swapped.fwhm, WithinAbs(3.5853e-6, 0.08e-6));
    CHECK_THAT(swapped.first_side_lobe, WithinAbs(0.1623, 0.01));
    CHECK_THAT(degenerate.fwhm, WithinAbs(3.2690e-6, 0.08e-6));
    CHECK_THAT(degenerate.first_side_lobe, WithinAbs(0.2479, 0.01));
    CHECK(degenerate.fwhm < swapped.fwhm);
    CHECK(swapped.fwhm < aniso.fwhm);
    CHECK(degenerate.first_side_lobe > swapped.first_side_lobe);
    CHECK(swapped.first_side_lobe > aniso.first_side_lobe);
}

TEST_CASE("thickness sweep flags the plateau and tracks the paraxial form") {
    OpticalConfig base = pair_at(530e-9, 10e-6, 100e-9);
    PumpProfile pump = PumpProfile::gaussian(1.0);
    SweepTable table = sweep_thickness(base, pump, {10e-9, 1e-6, 100e-6});
    REQUIRE(table.points.size() == 3);
    REQUIRE(table.parameter_names == std::vector<std::string>{"L"});
    for (const SweepPoint& p : table.points) {
        CHECK(p.status == "ok");
        CHECK(p.d_min > 0.0);
        CHECK_THAT(p.dip_at_dmin, WithinAbs(0.8, 0.005));
        CHECK_THAT(p.paraxial,
                   WithinRel(paraxial_dmin(530e-9, 10e-6, p.params[0], p.params[0]), 1e-12));
    }
    CHECK(table.points[0].plateau);
    CHECK(table.points[1].plateau);
    CHECK(!table.points[2].plateau);
    CHECK(std::abs(table.points[0].d_min - table.points[1].d_min) / table.points[0].d_min < 0.05);
    const SweepPoint& thick = table.points[2];
    CHECK(std::abs(thick.d_min - thick.paraxial) / thick.d_min < 0.15);
}

TEST_CASE("sweep records per-point failures and continues") {
    OpticalConfig base = pair_at(530e-9, 10e-6, 100e-9);
    PumpProfile pump = PumpProfile::gaussian(1.0);
    SearchSpec fixed;
    fixed.d_lo = 0.6e-6;
    fixed.d_hi = 10e-6;  // too small to bracket the thick point
    SweepTable table = sweep_thickness(base, pump, {10e-9, 100e-6}, {}, fixed);
    REQUIRE(table.points.size() == 2);
    CHECK(table.points[0].status == "ok");
    CHECK(table.points[0].d_min > 4.3e-6);
    CHECK(table.points[1].status != "ok");
    CHECK(std::isnan(table.points[1].d_min));
}

TEST_CASE("pump width sweep leaves the resolution unchanged") {
    OpticalConfig base = pair_at(530e-9, 10e-6, 100e-9);
    SweepTable table = sweep_pump_width(base, 100e-9, {30e-6, 1.0});
    REQUIRE(table.points.size() == 2);
    REQUIRE(table.parameter_names == std::vector<std::string>{"sigma_p"});
    for (const SweepPoint& p : table.points) {
        CHECK(p.status == "ok");
        CHECK(p.d_min > 4.3e-6);
        CHECK(p.d_min < 4.7e-6);
    }
    CHECK(std::abs(table.points[0].d_min - table.points[1].d_min) / table.points[1].d_min < 0.05);
}

TEST_CASE("wavelength sweep reproduces the three resolution regimes") {
    SweepTable table = sweep_wavelengths({530e-9, 10e-6}, {530e-9, 10e-6}, 100e-9, 100e-6);
    REQUIRE(table.points.size() == 4);
    REQUIRE(table.parameter_names == (std::vector<std::string>{"lambda_s", "lambda_i"}));
    double d_degenerate_small = 0.0;
    double d_grid_min = 1.0;
    for (const SweepPoint& p : table.points) {
        REQUIRE(p.status == "ok");
        const double ls = p.params[0], li = p.params[1];
        const double expected = ls == li ? 0.37 : (li > ls ? 0.45 : 0.40);
        CHECK_THAT(p.ratio, WithinAbs(expected, 0.02));
        CHECK_THAT(p.ratio, WithinRel(p.d_min / std::max(ls, li), 1e-12));
        if (ls == 530e-9 && li == 530e-9) d_degenerate_small = p.d_min;
        d_grid_min = std::min(d_grid_min, p.d_min);
    }
    CHECK(d_degenerate_small == d_grid_min);
}
