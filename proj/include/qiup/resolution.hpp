#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <qiup/errors.hpp>
#include <qiup/imaging.hpp>
#include <qiup/math.hpp>
#include <qiup/optics.hpp>

namespace qiup {

// 2 * sqrt(-ln(0.4) * 0.8 / (2 pi)): slit separation, in units of
// sqrt((lambda_s + lambda_i) / (1/L_A + 1/L_B)), at which the Gaussian
// thick-source image dips to 80% of its peak.
inline double paraxial_prefactor() {
    return 2.0 * std::sqrt(-std::log(0.4) * 0.8 / two_pi);
}

// Thick-source closed form for the minimum resolvable slit separation.
inline double paraxial_dmin(double lambda_s, double lambda_i, double L_A, double L_B) {
    if (!(lambda_s > 0.0) || !(lambda_i > 0.0))
        throw std::domain_error("paraxial_dmin: wavelengths must be positive");
    if (!(L_A > 0.0) || !(L_B > 0.0))
        throw std::domain_error("paraxial_dmin: source thicknesses must be positive");
    return paraxial_prefactor() * std::sqrt((lambda_s + lambda_i) / (1.0 / L_A + 1.0 / L_B));
}

// I(0) / max(I): parabola through the three samples nearest x = 0 over the
// profile maximum.
inline double dip_ratio(const ImageProfile& profile) {
    const std::vector<double>& x = profile.x_axis;
    const std::vector<double>& v = profile.values;
    if (x.size() < 3 || v.size() != x.size())
        throw std::invalid_argument("dip_ratio: profile needs at least 3 samples");
    const double peak = detail::peak_of(v);
    if (!(peak > 0.0)) throw std::invalid_argument("dip_ratio: profile maximum is not positive");
    std::size_t j = 0;
    for (std::size_t i = 1; i < x.size(); ++i)
        if (std::abs(x[i]) < std::abs(x[j])) j = i;
    const std::size_t lo = std::min(std::max<std::size_t>(j, 1) - 1, x.size() - 3);
    return quad_interp3(&x[lo], &v[lo], 0.0) / peak;
}

struct PsfMetrics {
    double fwhm = 0.0;
    double first_side_lobe = 0.0;  // relative to the peak; 0 when no lobe lies on the axis
};

// Full width at half maximum by linear interpolation of the half crossings,
// and the first side lobe beyond the central peak.
inline PsfMetrics psf_metrics(const ImageProfile& profile) {
    const std::vector<double>& x = profile.x_axis;
    const std::vector<double>& v = profile.values;
    if (x.size() < 3 || v.size() != x.size())
        throw std::invalid_argument("psf_metrics: profile needs at least 3 samples");
    std::size_t ipk = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[ipk]) ipk = i;
    if (!(v[ipk] > 0.0)) throw std::invalid_argument("psf_metrics: profile peak is not positive");
    const double half = 0.5 * v[ipk];
    double xr = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = ipk; k + 1 < v.size(); ++k) {
        if (v[k] >= half && half > v[k + 1]) {
            xr = x[k] + (half - v[k]) * (x[k + 1] - x[k]) / (v[k + 1] - v[k]);
            break;
        }
    }
    double xl = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = ipk; k > 0; --k) {
        if (v[k] >= half && half > v[k - 1]) {
            xl = x[k] + (half - v[k]) * (x[k - 1] - x[k]) / (v[k - 1] - v[k]);
            break;
        }
    }
    if (std::isnan(xl) || std::isnan(xr))
        throw std::invalid_argument("psf_metrics: axis does not reach the half-maximum crossings");
    PsfMetrics m;
    m.fwhm = xr - xl;
    for (std::size_t k = ipk + 1; k + 1 < v.size(); ++k) {
        if (v[k] < v[k + 1]) {
            m.first_side_lobe = *std::max_element(v.begin() + k, v.end()) / v[ipk];
            break;
        }
    }
    return m;
}

// Image of a single slit: the system point spread function on the given axis.
inline ImageProfile psf(const OpticalConfig& cfg, const PumpProfile& pump, double L_A, double L_B,
                        const std::vector<double>& x_axis, const QuadratureSpec& quad = {}) {
    return image_reduced(x_axis, cfg, pump, SlitObject::single_slit(), L_A, L_B, quad);
}

// Bisection bounds for the resolution search. Zeros select automatic values
// scaled from the larger wavelength and the thick-source closed form.
struct SearchSpec {
    double d_lo = 0.0;
    double d_hi = 0.0;
    double tol_d = 0.0;
};

struct ResolutionResult {
    double d_min = 0.0;
    double dip_at_dmin = 0.0;
    double d_lo = 0.0;   // final bracket, d_lo < d_min < d_hi
    double d_hi = 0.0;
    int iterations = 0;  // dip-profile evaluations
    OpticalConfig cfg;
    PumpProfile pump;
    double L_a = 0.0;
    double L_b = 0.0;
    QuadratureSpec quad;
};

namespace detail {

struct DipProbe {
    const OpticalConfig& cfg;
    const PumpProfile& pump;
    double L_a, L_b;
    const QuadratureSpec& quad;
    int evals = 0;

    double operator()(double d) {
        ++evals;
        ImageProfile img = image_reduced(symmetric_linspace(1.5 * d, 201), cfg, pump,
                                         SlitObject::double_slit(d), L_a, L_b, quad);
        return dip_ratio(img);
    }
};

inline std::string scan_row(double d, double dip) {
    std::ostringstream os;
    os << " d=" << d << " dip=" << dip << ";";
    return os.str();
}

}

// Smallest slit separation whose image dips to 80% of its peak, located by a
// coarse descent scan and bisection of dip(d) - 0.8.
inline ResolutionResult min_resolvable_distance(const OpticalConfig& cfg, const PumpProfile& pump,
                                                double L_A, double L_B,
                                                const QuadratureSpec& quad = {},
                                                const SearchSpec& search = {}) {
    cfg.validate();
    quad.validate();
    const double max_lambda = std::max(cfg.lambda_s, cfg.lambda_i);
    double d_scale = 0.5 * max_lambda;
    if (L_A > 0.0 && L_B > 0.0)
        d_scale = std::max(d_scale, paraxial_dmin(cfg.lambda_s, cfg.lambda_i, L_A, L_B));
    const double d_lo = search.d_lo > 0.0 ? search.d_lo : 0.12 * d_scale;
    const double d_hi = search.d_hi > 0.0 ? search.d_hi : 2.2 * d_scale;
    const double tol_d = search.tol_d > 0.0 ? search.tol_d : max_lambda / 200.0;
    if (!(d_lo > 0.0) || !(d_hi > d_lo))
        throw config_error("resolution search needs 0 < d_lo < d_hi");

    detail::DipProbe dip{cfg, pump, L_A, L_B, quad};
    std::string scan;
    const double v_lo = dip(d_lo);
    scan += detail::scan_row(d_lo, v_lo);
    if (!(v_lo > 0.8))
        throw bracket_error("resolution search: dip at d_lo already below 0.8; scan:" + scan);

    // coarse scan until the dip drops through 0.8; the dip must descend with
    // d, so a rise beyond quadrature noise means the search range is invalid
    double lo = d_lo, v_prev = v_lo, hi = 0.0;
    const double step = d_hi / 16.0;
    for (double d = d_lo + step; d <= d_hi * (1.0 + 1e-12); d += step) {
        const double vv = dip(d);
        scan += detail::scan_row(d, vv);
        if (vv < 0.8) {
            hi = d;
            break;
        }
        if (vv > v_prev + 5e-3)
            throw bracket_error("resolution search: dip not descending; scan:" + scan);
        lo = d;
        v_prev = vv;
    }
    if (hi == 0.0)
        throw bracket_error("resolution search: dip stays above 0.8 up to d_hi; scan:" + scan);

    while (hi - lo > tol_d) {
        const double mid = 0.5 * (lo + hi);
        if (dip(mid) > 0.8)
            lo = mid;
        else
            hi = mid;
    }
    double mid = 0.5 * (lo + hi);
    double v_mid = dip(mid);
    for (int extra = 0; std::abs(v_mid - 0.8) > 0.004 && extra < 60; ++extra) {
        if (v_mid > 0.8)
            lo = mid;
        else
            hi = mid;
        mid = 0.5 * (lo + hi);
        v_mid = dip(mid);
    }

    ResolutionResult res;
    res.d_min = mid;
    res.dip_at_dmin = v_mid;
    res.d_lo = lo;
    res.d_hi = hi;
    res.iterations = dip.evals;
    res.cfg = cfg;
    res.pump = pump;
    res.L_a = L_A;
    res.L_b = L_B;
    res.quad = quad;
    return res;
}

struct SweepPoint {
    std::vector<double> params;
    double d_min = std::numeric_limits<double>::quiet_NaN();
    double paraxial = std::numeric_limits<double>::quiet_NaN();
    double dip_at_dmin = std::numeric_limits<double>::quiet_NaN();
    double ratio = std::numeric_limits<double>::quiet_NaN();  // d_min / max wavelength
    bool plateau = false;  // thin regime, L <= max wavelength
    std::string status = "ok";
};

struct SweepTable {
    std::vector<std::string> parameter_names;
    std::vector<SweepPoint> points;
};

namespace detail {

inline void require_sweep_axis(const std::vector<double>& v, const char* name) {
    if (v.empty()) throw std::invalid_argument(std::string(name) + " axis is empty");
    for (double e : v)
        if (!(e > 0.0)) throw std::invalid_argument(std::string(name) + " axis must be positive");
    bool inc = true, dec = true;
    for (std::size_t i = 1; i < v.size(); ++i) {
        inc = inc && v[i] > v[i - 1];
        dec = dec && v[i] < v[i - 1];
    }
    if (v.size() > 1 && !inc && !dec)
        throw std::invalid_argument(std::string(name) + " axis must be strictly monotone");
}

// Runs one resolution search per grid point across the worker pool; a failed
// point keeps NaN results and carries the error text in its status.
template <class PointConfig>
SweepTable run_sweep(std::vector<std::string> names, const std::vector<std::vector<double>>& grid,
                     const QuadratureSpec& quad, const SearchSpec& search, PointConfig&& point_of) {
    SweepTable table;
    table.parameter_names = std::move(names);
    table.points.resize(grid.size());
    parallel_for(grid.size(), default_jobs(), [&](std::size_t i) {
        SweepPoint& p = table.points[i];
        p.params = grid[i];
        try {
            OpticalConfig cfg;
            PumpProfile pump;
            double L_A = 0.0, L_B = 0.0;
            point_of(grid[i], cfg, pump, L_A, L_B);
            ResolutionResult r = min_resolvable_distance(cfg, pump, L_A, L_B, quad, search);
            p.d_min = r.d_min;
            p.dip_at_dmin = r.dip_at_dmin;
            p.ratio = r.d_min / std::max(cfg.lambda_s, cfg.lambda_i);
            if (L_A > 0.0 && L_B > 0.0)
                p.paraxial = paraxial_dmin(cfg.lambda_s, cfg.lambda_i, L_A, L_B);
            p.plateau = std::max(L_A, L_B) <= std::max(cfg.lambda_s, cfg.lambda_i);
        } catch (const std::exception& e) {
            p.status = e.what();
        }
    });
    return table;
}

}

// Resolution versus source thickness, L_A = L_B = L.
inline SweepTable sweep_thickness(const OpticalConfig& cfg, const PumpProfile& pump,
                                  const std::vector<double>& L_values,
                                  const QuadratureSpec& quad = {}, const SearchSpec& search = {}) {
    detail::require_sweep_axis(L_values, "thickness");
    std::vector<std::vector<double>> grid;
    grid.reserve(L_values.size());
    for (double L : L_values) grid.push_back({L});
    return detail::run_sweep({"L"}, grid, quad, search,
                             [&](const std::vector<double>& p, OpticalConfig& c, PumpProfile& pp,
                                 double& L_A, double& L_B) {
                                 c = OpticalConfig::from_signal_idler(cfg.lambda_s, cfg.lambda_i,
                                                                      p[0], p[0]);
                                 pp = pump;
                                 L_A = L_B = p[0];
                             });
}

// Resolution versus pump width at fixed thickness L_A = L_B = L.
inline SweepTable sweep_pump_width(const OpticalConfig& cfg, double L,
                                   const std::vector<double>& sigma_values,
                                   const QuadratureSpec& quad = {},
                                   const SearchSpec& search = {}) {
    if (!(L > 0.0)) throw std::invalid_argument("pump width sweep needs a positive thickness");
    detail::require_sweep_axis(sigma_values, "pump width");
    std::vector<std::vector<double>> grid;
    grid.reserve(sigma_values.size());
    for (double s : sigma_values) grid.push_back({s});
    return detail::run_sweep({"sigma_p"}, grid, quad, search,
                             [&](const std::vector<double>& p, OpticalConfig& c, PumpProfile& pp,
                                 double& L_A, double& L_B) {
                                 c = OpticalConfig::from_signal_idler(cfg.lambda_s, cfg.lambda_i, L,
                                                                      L);
                                 pp = PumpProfile::gaussian(p[0]);
                                 L_A = L_B = L;
                             });
}

// Resolution over a (lambda_s, lambda_i) grid at fixed thickness and pump
// width. Points are stored row-major in lambda_s.
inline SweepTable sweep_wavelengths(const std::vector<double>& lambda_s_values,
                                    const std::vector<double>& lambda_i_values, double L,
                                    double sigma_p, const QuadratureSpec& quad = {},
                                    const SearchSpec& search = {}) {
    if (!(L > 0.0)) throw std::invalid_argument("wavelength sweep needs a positive thickness");
    detail::require_sweep_axis(lambda_s_values, "lambda_s");
    detail::require_sweep_axis(lambda_i_values, "lambda_i");
    PumpProfile pump = PumpProfile::gaussian(sigma_p);
    std::vector<std::vector<double>> grid;
    grid.reserve(lambda_s_values.size() * lambda_i_values.size());
    for (double ls : lambda_s_values)
        for (double li : lambda_i_values) grid.push_back({ls, li});
    return detail::run_sweep({"lambda_s", "lambda_i"}, grid, quad, search,
                             [&](const std::vector<double>& p, OpticalConfig& c, PumpProfile& pp,
                                 double& L_A, double& L_B) {
                                 c = OpticalConfig::from_signal_idler(p[0], p[1], L, L);
                                 pp = pump;
                                 L_A = L_B = L;
                             });
}

}
