#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <qiup/errors.hpp>
#include <qiup/math.hpp>
#include <qiup/optics.hpp>
#include <qiup/spdc.hpp>

namespace qiup {

// Transmission mask in the idler arm. Slits are infinitesimal; DoubleSlit is
// the centred pair at +-separation_d/2, SingleSlit the single slit at the
// origin, Opaque the zero-transmission case.
struct SlitObject {
    enum class Kind { DoubleSlit, SingleSlit, Opaque };
    Kind kind = Kind::SingleSlit;
    double separation_d = 0.0;

    static SlitObject double_slit(double d) {
        if (!(d > 0.0)) throw config_error("double slit separation must be positive");
        return {Kind::DoubleSlit, d};
    }
    static SlitObject single_slit() { return {Kind::SingleSlit, 0.0}; }
    static SlitObject opaque() { return {Kind::Opaque, 0.0}; }
};

struct QuadratureInfo {
    int n_theta_final = 0;
    double achieved_tol = 0.0;
};

// Peak-normalised camera profile. background is populated by counting_rate
// only, sharing the interference peak as its scale.
struct ImageProfile {
    std::vector<double> x_axis;
    std::vector<double> values;
    std::vector<double> background;
    QuadratureInfo quad;
};

enum class CorrelationPlane { A, BT };

namespace detail {

// Envelope support it makes sense to integrate over: exp(-cut^2/2) ~ 1e-14.
inline constexpr double envelope_cut = 8.0;

inline void require_gaussian(const PumpProfile& pump, const char* op) {
    if (pump.kind != PumpProfile::Kind::Gaussian)
        throw unsupported_profile_error(std::string(op) +
                                        " requires a gaussian pump; model a plane-wave pump"
                                        " with a metre-scale width or use the analytic route");
}

inline double kz_clamped(double q, double k) {
    return std::sqrt(std::max(0.0, (k - q) * (k + q)));
}

// sin(theta) interval where the pump envelope at q_axis + q_other is alive.
inline SinWindow pump_support(double q_other, double sigma, double k_axis) {
    const double centre = -q_other / k_axis;
    const double half = envelope_cut / (sigma * k_axis);
    return {std::max(-1.0, centre - half), std::min(1.0, centre + half)};
}

// Oscillation budget of the thickness sinc along the anti-correlation ridge.
inline double ridge_sinc_periods(const OpticalConfig& cfg, double L) {
    const double ks = two_pi / cfg.lambda_s;
    const double ki = two_pi / cfg.lambda_i;
    const double qr = std::min(ks, ki);
    const double span = (ks - kz_clamped(qr, ks)) + (ki - kz_clamped(qr, ki));
    return 0.5 * L * span / two_pi;
}

// Widest kz variation a window of q-width wq can see inside [-k, k]: the
// window touching the band edge.
inline double worst_window_span(double k, double wq) {
    const double q_lo = k - wq;
    if (q_lo <= 0.0) return k;
    return kz_clamped(q_lo, k);
}

// 16 nodes per oscillation period, never below the requested base.
inline int node_count(int n_base, double periods) {
    const double wanted = std::ceil(16.0 * periods);
    if (wanted <= n_base) return n_base;
    return static_cast<int>(wanted);
}

struct ReducedPlan {
    double theta_cut_s = 0.0, theta_cut_i = 0.0;
    int n_s = 0, n_i = 0, n_z = 0, n_a = 0;
};

// Node counts per angular axis from the phase oscillation each must resolve:
// camera kernels out to x_max (+d/2 of slit phase), the thickness sinc along
// the ridge, and for the inner pump-window axes the kz spread across the
// window plus the pump's own longitudinal variation.
inline ReducedPlan plan_axes(const OpticalConfig& cfg, double sigma, double d, double x_max,
                             double L_a, double L_b, int n_base) {
    const double ks = two_pi / cfg.lambda_s;
    const double ki = two_pi / cfg.lambda_i;
    const double kp = two_pi / cfg.lambda_p;
    ReducedPlan plan;
    plan.theta_cut_s =
        std::asin(std::min(1.0, cfg.lambda_s / cfg.lambda_i + envelope_cut / (sigma * ks)));
    plan.theta_cut_i =
        std::asin(std::min(1.0, cfg.lambda_i / cfg.lambda_s + envelope_cut / (sigma * ki)));
    const double dq_s = 2.0 * ks * std::sin(plan.theta_cut_s);
    const double dq_i = 2.0 * ki * std::sin(plan.theta_cut_i);
    const double span_p = kp - kz_clamped(std::min(kp, envelope_cut / sigma), kp);
    const double reach = x_max + 0.5 * d;
    const double wq = 2.0 * envelope_cut / sigma;
    const double p_s = reach * dq_s / two_pi + ridge_sinc_periods(cfg, L_b);
    const double p_i = reach * dq_i / two_pi + ridge_sinc_periods(cfg, L_a);
    const double p_z = 0.5 * d * std::min(wq, 2.0 * ki) / two_pi +
                       0.5 * L_b * (worst_window_span(ki, wq) + span_p) / two_pi;
    const double p_a = x_max * std::min(wq, 2.0 * ks) / two_pi +
                       0.5 * L_a * (worst_window_span(ks, wq) + span_p) / two_pi;
    plan.n_s = node_count(n_base, p_s);
    plan.n_i = node_count(n_base, p_i);
    plan.n_z = node_count(n_base, p_z);
    plan.n_a = node_count(n_base, p_a);
    return plan;
}

inline int& jobs_override() {
    static int jobs = 0;  // 0: use the hardware core count
    return jobs;
}

inline int default_jobs() {
    if (jobs_override() > 0) return jobs_override();
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

inline double peak_of(const std::vector<double>& v) {
    double peak = 0.0;
    for (double e : v) peak = std::max(peak, e);
    return peak;
}

// Composite Simpson rule on [a, b] with an odd number of points.
struct SimpsonRule {
    std::vector<double> x, w;
};

inline SimpsonRule simpson_rule(int n, double a, double b) {
    if (n % 2 == 0) ++n;
    SimpsonRule r;
    r.x.resize(n);
    r.w.resize(n);
    const double h = (b - a) / (n - 1);
    for (int i = 0; i < n; ++i) {
        r.x[i] = a + i * h;
        r.w[i] = (i == 0 || i == n - 1) ? h / 3.0 : (i % 2 == 1 ? 4.0 * h / 3.0 : 2.0 * h / 3.0);
    }
    return r;
}

}  // namespace detail

// Transfer of a plane-wave pump through the object arm: the idler conjugate
// to q_s passes the slits and pairs with the outer idler mode q_i. Zero
// outside the momentum band both wavelengths can carry. The (k_zS)^(-1/2)
// mode weight belongs to the caller in the momentum path; angle-variable
// Jacobians absorb it in the angular path.
inline double plane_wave_conv(double q_s, double q_i, double d, const OpticalConfig& cfg,
                              double L_B) {
    const double q_cut = two_pi * std::min(1.0 / cfg.lambda_s, 1.0 / cfg.lambda_i);
    if (std::abs(q_s) > q_cut) return 0.0;
    const double ks = two_pi / cfg.lambda_s;
    const double ki = two_pi / cfg.lambda_i;
    const double kp = two_pi / cfg.lambda_p;
    const double kzs = detail::kz_clamped(q_s, ks);
    const double kappa = detail::kz_clamped(q_s, ki);
    return std::cos(0.5 * d * (q_s + q_i)) * sinc(0.5 * L_B * (kp - kzs - kappa));
}

// Inner object-arm integral: the idler spectrum conjugate to theta_s, passed
// through the slit transmission and paired with the outer idler angle.
// Normalised by the pump spectrum area so the infinite-width limit
// reproduces plane_wave_conv pointwise.
inline double conv_angular(double theta_s, double theta_i, const SlitObject& obj,
                           const OpticalConfig& cfg, const PumpProfile& pump, double L_B,
                           const QuadratureSpec& quad = {}) {
    detail::require_gaussian(pump, "conv_angular");
    quad.validate();
    if (obj.kind == SlitObject::Kind::Opaque) return 0.0;
    const double ks = two_pi / cfg.lambda_s;
    const double ki = two_pi / cfg.lambda_i;
    const double q_s = ks * std::sin(theta_s);
    const double q_i = ki * std::sin(theta_i);
    const double d = obj.kind == SlitObject::Kind::DoubleSlit ? obj.separation_d : 0.0;
    const SinWindow win = detail::pump_support(q_s, pump.sigma_p, ki);
    if (win.empty()) return 0.0;
    const double a = std::asin(win.lo), b = std::asin(win.hi);

    const double wq = 2.0 * detail::envelope_cut / pump.sigma_p;
    const double kp = two_pi / cfg.lambda_p;
    const double span_p = kp - detail::kz_clamped(std::min(kp, detail::envelope_cut / pump.sigma_p), kp);
    const double periods = 0.5 * d * std::min(wq, 2.0 * ki) / two_pi +
                           0.5 * L_B * (detail::worst_window_span(ki, wq) + span_p) / two_pi;
    int n = detail::node_count(quad.n_theta, periods);

    auto pass = [&](int nodes) {
        std::complex<double> z = 0.0;
        const MappedRule rule = map_rule(nodes, a, b);
        for (int p = 0; p < nodes; ++p) {
            const double tp = rule.x[p];
            const double qp = ki * std::sin(tp);
            const double amp = rule.w[p] * ki * std::cos(tp) * pump_envelope(q_s + qp, pump) *
                               phase_mismatch_sinc(theta_s, tp, cfg, L_B);
            z += amp * std::polar(1.0, -0.5 * d * qp);
        }
        return z;
    };

    std::complex<double> prev = pass(n);
    double achieved = 0.0;
    for (int r = 0; r < quad.n_refine_max; ++r) {
        n *= 2;
        const std::complex<double> cur = pass(n);
        achieved = std::abs(cur - prev);
        const double scale = std::max(std::abs(cur), 1e-300);
        if (achieved <= quad.rel_tol * scale) {
            const double area = pump.sigma_p / std::sqrt(two_pi);
            return area * (std::polar(1.0, 0.5 * d * q_i) * cur).real();
        }
        prev = cur;
    }
    throw quadrature_error("conv_angular did not converge", achieved);
}

// Imaging-arm two-photon amplitude in angle variables, carrying the idler
// mode weight. Real-valued for a gaussian pump.
inline std::complex<double> phi_A_angular(double theta_s, double theta_i,
                                          const OpticalConfig& cfg, const PumpProfile& pump,
                                          double L_A) {
    const double ki = two_pi / cfg.lambda_i;
    const double weight = std::sqrt(std::max(0.0, ki * std::cos(theta_i)));
    return {weight * joint_angular_amplitude(theta_s, theta_i, cfg, pump, L_A), 0.0};
}

namespace detail {

// Shared state of one reduced-integral pass: outer angular rules plus the
// inner pump-window integrals that depend only on the outer node, not on x.
struct ReducedPass {
    int n_s = 0, n_i = 0;
    std::vector<double> q_s, w_s;          // outer signal axis
    std::vector<double> q_i, w_i, beta;    // outer idler axis
    std::vector<std::complex<double>> z;   // object-arm inner integral per signal node
    std::vector<double> ga, qpa;           // imaging-arm inner integrand, row per idler node
    std::vector<double> gb;                // object-arm thickness variant for backgrounds
};

inline ReducedPass reduced_pass(const OpticalConfig& cfg, const PumpProfile& pump,
                                const SlitObject& obj, double L_a, double L_b,
                                const ReducedPlan& plan, int scale, bool want_background) {
    const double sigma = pump.sigma_p;
    const double ks = two_pi / cfg.lambda_s;
    const double ki = two_pi / cfg.lambda_i;
    const double d = obj.kind == SlitObject::Kind::DoubleSlit ? obj.separation_d : 0.0;

    ReducedPass pass;
    pass.n_s = plan.n_s << scale;
    pass.n_i = plan.n_i << scale;
    const int n_z = plan.n_z << scale;
    const int n_a = plan.n_a << scale;

    const MappedRule rule_s = map_rule(pass.n_s, -plan.theta_cut_s, plan.theta_cut_s);
    const MappedRule rule_i = map_rule(pass.n_i, -plan.theta_cut_i, plan.theta_cut_i);
    pass.q_s.resize(pass.n_s);
    pass.w_s = rule_s.w;
    pass.q_i.resize(pass.n_i);
    pass.w_i = rule_i.w;
    pass.beta.resize(pass.n_i);
    for (int s = 0; s < pass.n_s; ++s) pass.q_s[s] = ks * std::sin(rule_s.x[s]);
    for (int i = 0; i < pass.n_i; ++i) {
        pass.q_i[i] = ki * std::sin(rule_i.x[i]);
        pass.beta[i] = 0.5 * d * pass.q_i[i];
    }

    pass.ga.assign(static_cast<std::size_t>(pass.n_i) * n_a, 0.0);
    pass.qpa.assign(static_cast<std::size_t>(pass.n_i) * n_a, 0.0);
    if (want_background) pass.gb.assign(static_cast<std::size_t>(pass.n_i) * n_a, 0.0);
    for (int i = 0; i < pass.n_i; ++i) {
        const SinWindow win = pump_support(pass.q_i[i], sigma, ks);
        if (win.empty()) continue;
        const MappedRule inner = map_rule(n_a, std::asin(win.lo), std::asin(win.hi));
        double* ga_row = &pass.ga[static_cast<std::size_t>(i) * n_a];
        double* qpa_row = &pass.qpa[static_cast<std::size_t>(i) * n_a];
        double* gb_row = want_background ? &pass.gb[static_cast<std::size_t>(i) * n_a] : nullptr;
        for (int p = 0; p < n_a; ++p) {
            const double tp = inner.x[p];
            const double qp = ks * std::sin(tp);
            const double env = inner.w[p] * pump_envelope(qp + pass.q_i[i], pump);
            qpa_row[p] = qp;
            ga_row[p] = env * phase_mismatch_sinc(tp, rule_i.x[i], cfg, L_a);
            if (gb_row) gb_row[p] = env * phase_mismatch_sinc(tp, rule_i.x[i], cfg, L_b);
        }
    }

    pass.z.assign(pass.n_s, 0.0);
    if (obj.kind != SlitObject::Kind::Opaque) {
        for (int s = 0; s < pass.n_s; ++s) {
            const SinWindow win = pump_support(pass.q_s[s], sigma, ki);
            if (win.empty()) continue;
            const MappedRule inner = map_rule(n_z, std::asin(win.lo), std::asin(win.hi));
            std::complex<double> z = 0.0;
            for (int p = 0; p < n_z; ++p) {
                const double tp = inner.x[p];
                const double qp = ki * std::sin(tp);
                const double amp = inner.w[p] * ki * std::cos(tp) *
                                   pump_envelope(pass.q_s[s] + qp, pump) *
                                   phase_mismatch_sinc(rule_s.x[s], tp, cfg, L_b);
                z += amp * std::polar(1.0, -0.5 * d * qp);
            }
            pass.z[s] = z;
        }
    }
    return pass;
}

// Interference term (and optionally the object-free background) at one
// camera position from a prepared pass.
inline void reduced_point(const ReducedPass& pass, const SlitObject& obj, double x,
                          bool want_background, double& value, double& background) {
    const int n_a = static_cast<int>(pass.qpa.size() / pass.n_i);
    std::complex<double> p_sum = 0.0, q_sum = 0.0;
    for (int s = 0; s < pass.n_s; ++s) {
        const std::complex<double> e = std::polar(pass.w_s[s], pass.q_s[s] * x);
        p_sum += pass.z[s] * e;
        q_sum += std::conj(pass.z[s]) * e;
    }
    double v = 0.0, bg = 0.0;
    for (int i = 0; i < pass.n_i; ++i) {
        const double* qpa_row = &pass.qpa[static_cast<std::size_t>(i) * n_a];
        const double* ga_row = &pass.ga[static_cast<std::size_t>(i) * n_a];
        std::complex<double> a_bar = 0.0;
        for (int p = 0; p < n_a; ++p) a_bar += ga_row[p] * std::polar(1.0, -qpa_row[p] * x);
        std::complex<double> b;
        switch (obj.kind) {
            case SlitObject::Kind::DoubleSlit: {
                const std::complex<double> ph = std::polar(1.0, pass.beta[i]);
                b = ph * p_sum + std::conj(ph) * q_sum;
                break;
            }
            case SlitObject::Kind::SingleSlit:
                b = p_sum;
                break;
            case SlitObject::Kind::Opaque:
                b = 0.0;
                break;
        }
        v += pass.w_i[i] * (b * a_bar).real();
        if (want_background) {
            const double* gb_row = &pass.gb[static_cast<std::size_t>(i) * n_a];
            std::complex<double> b_bar = 0.0;
            for (int p = 0; p < n_a; ++p) b_bar += gb_row[p] * std::polar(1.0, -qpa_row[p] * x);
            bg += pass.w_i[i] * (std::norm(a_bar) + std::norm(b_bar));
        }
    }
    value = v;
    background = bg;
}

struct ReducedResult {
    std::vector<double> values, background;
    QuadratureInfo quad;
};

inline ReducedResult reduced_profile(const std::vector<double>& x_axis, const OpticalConfig& cfg,
                                     const PumpProfile& pump, const SlitObject& obj, double L_a,
                                     double L_b, const QuadratureSpec& quad, bool want_background,
                                     const char* op) {
    require_gaussian(pump, op);
    quad.validate();
    if (x_axis.empty()) throw std::invalid_argument(std::string(op) + ": x_axis must not be empty");
    double x_max = 0.0;
    for (double x : x_axis) x_max = std::max(x_max, std::abs(x));
    const double d = obj.kind == SlitObject::Kind::DoubleSlit ? obj.separation_d : 0.0;
    const ReducedPlan plan = plan_axes(cfg, pump.sigma_p, d, x_max, L_a, L_b, quad.n_theta);

    const std::size_t n = x_axis.size();
    ReducedResult out;
    std::vector<double> prev_v, prev_bg;
    double achieved = 0.0;
    for (int scale = 0; scale <= quad.n_refine_max; ++scale) {
        const ReducedPass pass = reduced_pass(cfg, pump, obj, L_a, L_b, plan, scale, want_background);
        std::vector<double> v(n), bg(n);
        parallel_for(n, default_jobs(), [&](std::size_t m) {
            reduced_point(pass, obj, x_axis[m], want_background, v[m], bg[m]);
        });
        if (scale > 0) {
            double diff = 0.0;
            const double pv = std::max(peak_of(v), 1e-300);
            for (std::size_t m = 0; m < n; ++m)
                diff = std::max(diff, std::abs(v[m] - prev_v[m]) / pv);
            if (want_background) {
                const double pb = std::max(peak_of(bg), 1e-300);
                for (std::size_t m = 0; m < n; ++m)
                    diff = std::max(diff, std::abs(bg[m] - prev_bg[m]) / pb);
            }
            achieved = diff;
            if (diff <= quad.rel_tol) {
                out.values = std::move(v);
                out.background = std::move(bg);
                out.quad = {quad.n_theta << scale, diff};
                return out;
            }
        }
        prev_v = std::move(v);
        prev_bg = std::move(bg);
    }
    throw quadrature_error(std::string(op) + " did not converge", achieved);
}

}  // namespace detail

// Camera-plane interference image via the reduced triple-angular integral.
// The outer idler weight cancels algebraically against the mode weights of
// the two arms, so no integrand factor is singular at grazing angles.
inline ImageProfile image_reduced(const std::vector<double>& x_axis, const OpticalConfig& cfg,
                                  const PumpProfile& pump, const SlitObject& obj, double L_A,
                                  double L_B, const QuadratureSpec& quad = {}) {
    detail::ReducedResult res =
        detail::reduced_profile(x_axis, cfg, pump, obj, L_A, L_B, quad, false, "image_reduced");
    ImageProfile img;
    img.x_axis = x_axis;
    img.values = std::move(res.values);
    img.quad = res.quad;
    const double peak = detail::peak_of(img.values);
    if (peak > 0.0)
        for (double& v : img.values) v /= peak;
    return img;
}

// Photon counting rate split into the object-free background and the
// interference term; total rate = background + 2 * values in the
// constructive port. One shared scale (the interference peak) keeps the
// port algebra valid after normalisation.
inline ImageProfile counting_rate(const std::vector<double>& x_axis, const OpticalConfig& cfg,
                                  const PumpProfile& pump, const SlitObject& obj, double L_A,
                                  double L_B, const QuadratureSpec& quad = {}) {
    detail::ReducedResult res =
        detail::reduced_profile(x_axis, cfg, pump, obj, L_A, L_B, quad, true, "counting_rate");
    ImageProfile img;
    img.x_axis = x_axis;
    img.values = std::move(res.values);
    img.background = std::move(res.background);
    img.quad = res.quad;
    double scale = detail::peak_of(img.values);
    if (scale <= 0.0) scale = detail::peak_of(img.background);
    if (scale > 0.0) {
        for (double& v : img.values) v /= scale;
        for (double& b : img.background) b /= scale;
    }
    return img;
}

// Two-photon field of one arm at camera coordinates: the 2D angular integral
// of the arm's amplitude against the camera kernels. BT is the object arm
// after the slit transmission.
inline std::complex<double> spatial_correlation(CorrelationPlane which, double x_s, double x_i,
                                                const OpticalConfig& cfg, const PumpProfile& pump,
                                                double L_pair, const SlitObject& obj,
                                                const QuadratureSpec& quad = {}) {
    detail::require_gaussian(pump, "spatial_correlation");
    quad.validate();
    const double ks = two_pi / cfg.lambda_s;
    const double ki = two_pi / cfg.lambda_i;
    const double d = obj.kind == SlitObject::Kind::DoubleSlit ? obj.separation_d : 0.0;
    const double x_max = std::max(std::abs(x_s), std::abs(x_i));
    const double L_a = which == CorrelationPlane::A ? L_pair : 0.0;
    const double L_b = which == CorrelationPlane::BT ? L_pair : 0.0;
    const detail::ReducedPlan plan =
        detail::plan_axes(cfg, pump.sigma_p, d, x_max, L_a, L_b, quad.n_theta);

    auto pass = [&](int scale) {
        const int n_i = plan.n_i << scale;
        const MappedRule rule_i = map_rule(n_i, -plan.theta_cut_i, plan.theta_cut_i);
        std::complex<double> total = 0.0;
        if (which == CorrelationPlane::A) {
            const int n_a = plan.n_a << scale;
            for (int i = 0; i < n_i; ++i) {
                const double q_i = ki * std::sin(rule_i.x[i]);
                const SinWindow win = detail::pump_support(q_i, pump.sigma_p, ks);
                if (win.empty()) continue;
                const MappedRule inner = map_rule(n_a, std::asin(win.lo), std::asin(win.hi));
                std::complex<double> row = 0.0;
                for (int p = 0; p < n_a; ++p) {
                    const double qp = ks * std::sin(inner.x[p]);
                    row += inner.w[p] * pump_envelope(qp + q_i, pump) *
                           phase_mismatch_sinc(inner.x[p], rule_i.x[i], cfg, L_pair) *
                           std::polar(1.0, qp * x_s);
                }
                const double weight = std::sqrt(std::max(0.0, ki * std::cos(rule_i.x[i])));
                total += rule_i.w[i] * weight * row * std::polar(1.0, q_i * x_i);
            }
            return total;
        }
        if (obj.kind == SlitObject::Kind::Opaque) return total;
        const int n_s = plan.n_s << scale;
        const int n_z = plan.n_z << scale;
        const MappedRule rule_s = map_rule(n_s, -plan.theta_cut_s, plan.theta_cut_s);
        std::complex<double> p_sum = 0.0, q_sum = 0.0;
        for (int s = 0; s < n_s; ++s) {
            const double q_s = ks * std::sin(rule_s.x[s]);
            const SinWindow win = detail::pump_support(q_s, pump.sigma_p, ki);
            if (win.empty()) continue;
            const MappedRule inner = map_rule(n_z, std::asin(win.lo), std::asin(win.hi));
            std::complex<double> z = 0.0;
            for (int p = 0; p < n_z; ++p) {
                const double qp = ki * std::sin(inner.x[p]);
                z += inner.w[p] * ki * std::cos(inner.x[p]) * pump_envelope(q_s + qp, pump) *
                     phase_mismatch_sinc(rule_s.x[s], inner.x[p], cfg, L_pair) *
                     std::polar(1.0, -0.5 * d * qp);
            }
            const std::complex<double> e = std::polar(rule_s.w[s], q_s * x_s);
            p_sum += z * e;
            q_sum += std::conj(z) * e;
        }
        for (int i = 0; i < n_i; ++i) {
            const double q_i = ki * std::sin(rule_i.x[i]);
            std::complex<double> b;
            if (obj.kind == SlitObject::Kind::DoubleSlit) {
                const std::complex<double> ph = std::polar(1.0, 0.5 * d * q_i);
                b = ph * p_sum + std::conj(ph) * q_sum;
            } else {
                b = p_sum;
            }
            const double weight = std::sqrt(std::max(0.0, ki * std::cos(rule_i.x[i])));
            total += rule_i.w[i] * weight * b * std::polar(1.0, q_i * x_i);
        }
        return total;
    };

    std::complex<double> prev = pass(0);
    double achieved = 0.0;
    for (int scale = 1; scale <= quad.n_refine_max; ++scale) {
        const std::complex<double> cur = pass(scale);
        achieved = std::abs(cur - prev);
        if (achieved <= quad.rel_tol * std::max(std::abs(cur), 1e-300)) return cur;
        prev = cur;
    }
    throw quadrature_error("spatial_correlation did not converge", achieved);
}

namespace detail {

// State of the direct-route synthesis at one idler axis density. The idler
// node count must grow with the transverse reach: a finite plane-wave sum
// stops decaying (and aliases) beyond ~n lambda_i / 4.
struct DirectState {
    int n_i = 0;
    std::vector<double> q_i;
    std::vector<double> line_w;                 // w_i * sqrt(k_i cos theta_i)
    std::vector<std::complex<double>> conv_t;   // [n_i][n_s] object-arm spectrum
    std::vector<double> ga, qpa;                // [n_i][n_a] imaging-arm inner integrand
};

struct DirectSetup {
    OpticalConfig cfg;
    PumpProfile pump;
    SlitObject obj;
    double L_a = 0.0, L_b = 0.0;
    ReducedPlan plan;
    std::vector<double> q_s, w_s;
    double d = 0.0;
    std::map<int, DirectState> cache;

    DirectState& state_for(double reach) {
        const double ki = two_pi / cfg.lambda_i;
        const double dq_i = 2.0 * ki * std::sin(plan.theta_cut_i);
        const double periods = (reach + 0.5 * d) * dq_i / two_pi +
                               ridge_sinc_periods(cfg, std::max(L_a, L_b));
        const int n_i = node_count(plan.n_i, periods);
        auto it = cache.find(n_i);
        if (it != cache.end()) return it->second;

        const double ks = two_pi / cfg.lambda_s;
        DirectState st;
        st.n_i = n_i;
        const MappedRule rule_i = map_rule(n_i, -plan.theta_cut_i, plan.theta_cut_i);
        st.q_i.resize(n_i);
        st.line_w.resize(n_i);
        for (int i = 0; i < n_i; ++i) {
            st.q_i[i] = ki * std::sin(rule_i.x[i]);
            st.line_w[i] =
                rule_i.w[i] * std::sqrt(std::max(0.0, ki * std::cos(rule_i.x[i])));
        }

        const int n_s = plan.n_s;
        st.conv_t.assign(static_cast<std::size_t>(n_i) * n_s, 0.0);
        if (obj.kind != SlitObject::Kind::Opaque) {
            for (int s = 0; s < n_s; ++s) {
                const double q_s = this->q_s[s];
                const SinWindow win = pump_support(q_s, pump.sigma_p, ki);
                if (win.empty()) continue;
                const double theta_s = std::asin(q_s / ks);
                const MappedRule inner = map_rule(plan.n_z, std::asin(win.lo), std::asin(win.hi));
                std::vector<double> base(plan.n_z), qp(plan.n_z);
                for (int p = 0; p < plan.n_z; ++p) {
                    qp[p] = ki * std::sin(inner.x[p]);
                    base[p] = inner.w[p] * ki * std::cos(inner.x[p]) *
                              pump_envelope(q_s + qp[p], pump) *
                              phase_mismatch_sinc(theta_s, inner.x[p], cfg, L_b);
                }
                for (int i = 0; i < n_i; ++i) {
                    double acc = 0.0;
                    if (obj.kind == SlitObject::Kind::DoubleSlit) {
                        for (int p = 0; p < plan.n_z; ++p)
                            acc += base[p] * 2.0 * std::cos(0.5 * d * (st.q_i[i] - qp[p]));
                    } else {
                        for (int p = 0; p < plan.n_z; ++p) acc += base[p];
                    }
                    st.conv_t[static_cast<std::size_t>(i) * n_s + s] = acc;
                }
            }
        }

        st.ga.assign(static_cast<std::size_t>(n_i) * plan.n_a, 0.0);
        st.qpa.assign(static_cast<std::size_t>(n_i) * plan.n_a, 0.0);
        for (int i = 0; i < n_i; ++i) {
            const SinWindow win = pump_support(st.q_i[i], pump.sigma_p, ks);
            if (win.empty()) continue;
            const MappedRule inner = map_rule(plan.n_a, std::asin(win.lo), std::asin(win.hi));
            double* ga_row = &st.ga[static_cast<std::size_t>(i) * plan.n_a];
            double* qpa_row = &st.qpa[static_cast<std::size_t>(i) * plan.n_a];
            for (int p = 0; p < plan.n_a; ++p) {
                const double qp = ks * std::sin(inner.x[p]);
                qpa_row[p] = qp;
                ga_row[p] = inner.w[p] * pump_envelope(qp + st.q_i[i], pump) *
                            phase_mismatch_sinc(inner.x[p], rule_i.x[i], cfg, L_a);
            }
        }
        return cache.emplace(n_i, std::move(st)).first->second;
    }

    // Per-idler-mode spectra of the two arms at camera position x.
    void lines(const DirectState& st, double x, std::vector<std::complex<double>>& a_line,
               std::vector<std::complex<double>>& b_line) const {
        const int n_s = static_cast<int>(q_s.size());
        a_line.assign(st.n_i, 0.0);
        b_line.assign(st.n_i, 0.0);
        std::vector<std::complex<double>> e_s(n_s);
        for (int s = 0; s < n_s; ++s) e_s[s] = std::polar(w_s[s], q_s[s] * x);
        for (int i = 0; i < st.n_i; ++i) {
            const double* ga_row = &st.ga[static_cast<std::size_t>(i) * plan.n_a];
            const double* qpa_row = &st.qpa[static_cast<std::size_t>(i) * plan.n_a];
            std::complex<double> a = 0.0;
            for (int p = 0; p < plan.n_a; ++p) a += ga_row[p] * std::polar(1.0, qpa_row[p] * x);
            const std::complex<double>* conv_row = &st.conv_t[static_cast<std::size_t>(i) * n_s];
            std::complex<double> b = 0.0;
            for (int s = 0; s < n_s; ++s) b += conv_row[s] * e_s[s];
            a_line[i] = a * st.line_w[i];
            b_line[i] = b * st.line_w[i];
        }
    }
};

}  // namespace detail

// Brute-force image: synthesises both arms' fields on the camera plane and
// integrates their product over the idler coordinate inside a window that
// grows until the integrand has decayed at the boundary. Exists to validate
// image_reduced; quad_coarse sets the (unrefined) grid densities.
inline ImageProfile image_direct(const std::vector<double>& x_axis, const OpticalConfig& cfg,
                                 const PumpProfile& pump, const SlitObject& obj, double L_A,
                                 double L_B, const QuadratureSpec& quad_coarse = {}) {
    detail::require_gaussian(pump, "image_direct");
    quad_coarse.validate();
    if (x_axis.empty()) throw std::invalid_argument("image_direct: x_axis must not be empty");
    double x_max = 0.0;
    for (double x : x_axis) x_max = std::max(x_max, std::abs(x));

    detail::DirectSetup setup;
    setup.cfg = cfg;
    setup.pump = pump;
    setup.obj = obj;
    setup.L_a = L_A;
    setup.L_b = L_B;
    setup.d = obj.kind == SlitObject::Kind::DoubleSlit ? obj.separation_d : 0.0;
    setup.plan =
        detail::plan_axes(cfg, pump.sigma_p, setup.d, x_max, L_A, L_B, quad_coarse.n_theta);
    const double ks = two_pi / cfg.lambda_s;
    const MappedRule rule_s =
        map_rule(setup.plan.n_s, -setup.plan.theta_cut_s, setup.plan.theta_cut_s);
    setup.q_s.resize(setup.plan.n_s);
    setup.w_s = rule_s.w;
    for (int s = 0; s < setup.plan.n_s; ++s) setup.q_s[s] = ks * std::sin(rule_s.x[s]);

    ImageProfile img;
    img.x_axis = x_axis;
    img.values.assign(x_axis.size(), 0.0);
    img.quad = {setup.plan.n_i, 0.0};
    if (obj.kind == SlitObject::Kind::Opaque) return img;

    std::vector<std::complex<double>> a_line, b_line;
    auto field_profile = [&](const detail::DirectState& st,
                             const std::vector<std::complex<double>>& line,
                             const std::vector<double>& xs) {
        std::vector<std::complex<double>> out(xs.size(), 0.0);
        for (std::size_t k = 0; k < xs.size(); ++k) {
            std::complex<double> acc = 0.0;
            for (int i = 0; i < st.n_i; ++i) acc += line[i] * std::polar(1.0, st.q_i[i] * xs[k]);
            out[k] = acc;
        }
        return out;
    };

    // correlation width from the e^{-1/2} crossing of the imaging arm's field
    const double max_lambda = std::max(cfg.lambda_s, cfg.lambda_i);
    double probe_r = 2.0 * max_lambda;
    double sigma_corr = -1.0;
    while (sigma_corr < 0.0 && probe_r <= 64.0 * max_lambda * (1.0 + 1e-12)) {
        const detail::DirectState& st = setup.state_for(probe_r);
        setup.lines(st, 0.0, a_line, b_line);
        std::vector<double> xs(513);
        for (std::size_t k = 0; k < xs.size(); ++k) xs[k] = probe_r * k / (xs.size() - 1);
        const auto prof = field_profile(st, a_line, xs);
        const double threshold = std::abs(prof[0]) * std::exp(-0.5);
        for (std::size_t k = 0; k < xs.size(); ++k) {
            if (std::abs(prof[k]) < threshold) {
                sigma_corr = xs[k];
                break;
            }
        }
        if (sigma_corr < 0.0) probe_r *= 2.0;
    }
    if (sigma_corr < 0.0) sigma_corr = 64.0 * max_lambda;

    double window = std::max(3.0 * sigma_corr, 2.0 * setup.d);
    const detail::DirectState* st = nullptr;
    bool settled = false;
    for (int attempt = 0; attempt < 20 && !settled; ++attempt) {
        st = &setup.state_for(window);
        settled = true;
        for (double xp : {0.0, x_max}) {
            setup.lines(*st, xp, a_line, b_line);
            std::vector<double> scan(513);
            for (std::size_t k = 0; k < scan.size(); ++k)
                scan[k] = window * k / (scan.size() - 1);
            const auto pa = field_profile(*st, a_line, scan);
            const auto pb = field_profile(*st, b_line, scan);
            double interior = 0.0;
            for (std::size_t k = 0; k < scan.size(); ++k)
                interior = std::max(interior, std::abs(pb[k] * std::conj(pa[k])));
            std::vector<double> edges = {0.995 * window,  0.9975 * window,  window,
                                         -0.995 * window, -0.9975 * window, -window};
            const auto pae = field_profile(*st, a_line, edges);
            const auto pbe = field_profile(*st, b_line, edges);
            double boundary = 0.0;
            for (std::size_t k = 0; k < edges.size(); ++k)
                boundary = std::max(boundary, std::abs(pbe[k] * std::conj(pae[k])));
            if (boundary > 1e-4 * interior) {
                settled = false;
                window *= 1.5;
                break;
            }
        }
    }
    if (!settled)
        throw window_error("image_direct: transverse window failed its boundary-decay check"
                           " after the growth cap");

    const int n_xi =
        std::max(65, 16 * static_cast<int>(std::ceil(4.0 * window / cfg.lambda_i)) | 1);
    const detail::SimpsonRule xi = detail::simpson_rule(n_xi, -window, window);

    const std::size_t n_x = x_axis.size();
    std::vector<std::vector<std::complex<double>>> a_all(n_x), b_all(n_x);
    for (std::size_t m = 0; m < n_x; ++m) setup.lines(*st, x_axis[m], a_all[m], b_all[m]);

    const int jobs = detail::default_jobs();
    std::vector<std::vector<double>> partial(jobs, std::vector<double>(n_x, 0.0));
    parallel_for(static_cast<std::size_t>(jobs), jobs, [&](std::size_t t) {
        std::vector<std::complex<double>> kernel(st->n_i);
        const std::size_t lo = xi.x.size() * t / jobs, hi = xi.x.size() * (t + 1) / jobs;
        for (std::size_t k = lo; k < hi; ++k) {
            for (int i = 0; i < st->n_i; ++i) kernel[i] = std::polar(1.0, st->q_i[i] * xi.x[k]);
            for (std::size_t m = 0; m < n_x; ++m) {
                std::complex<double> pa = 0.0, pb = 0.0;
                const auto& al = a_all[m];
                const auto& bl = b_all[m];
                for (int i = 0; i < st->n_i; ++i) {
                    pa += al[i] * kernel[i];
                    pb += bl[i] * kernel[i];
                }
                partial[t][m] += xi.w[k] * (pb * std::conj(pa)).real();
            }
        }
    });
    for (int t = 0; t < jobs; ++t)
        for (std::size_t m = 0; m < n_x; ++m) img.values[m] += partial[t][m];

    img.quad.n_theta_final = st->n_i;
    const double peak = detail::peak_of(img.values);
    if (peak > 0.0)
        for (double& v : img.values) v /= peak;
    return img;
}

// Analytic plane-wave-pump image: with a true plane-wave pump the idler
// spectrum conjugate to each signal mode is fixed, and the image reduces to
// products of two one-dimensional band-limited integrals evaluated at the
// slit positions. Degenerate wavelengths make the idler mode weight
// non-integrable at the band edge.
inline ImageProfile plane_wave_image(const std::vector<double>& x_axis, const OpticalConfig& cfg,
                                     const SlitObject& obj, double L_A, double L_B,
                                     const QuadratureSpec& quad = {}) {
    quad.validate();
    if (x_axis.empty()) throw std::invalid_argument("plane_wave_image: x_axis must not be empty");
    if (cfg.lambda_s == cfg.lambda_i)
        throw unsupported_profile_error(
            "plane_wave_image: degenerate wavelengths are non-integrable on the band edge;"
            " use a gaussian pump");

    ImageProfile img;
    img.x_axis = x_axis;
    img.values.assign(x_axis.size(), 0.0);
    if (obj.kind == SlitObject::Kind::Opaque) {
        img.quad = {quad.n_theta, 0.0};
        return img;
    }

    const double ks = two_pi / cfg.lambda_s;
    const double ki = two_pi / cfg.lambda_i;
    const double kp = two_pi / cfg.lambda_p;
    const double q_cut = std::min(ks, ki);
    const double d = obj.kind == SlitObject::Kind::DoubleSlit ? obj.separation_d : 0.0;
    double x_max = 0.0;
    for (double x : x_axis) x_max = std::max(x_max, std::abs(x));

    const double periods = q_cut * (x_max + 0.5 * d) / M_PI +
                           detail::ridge_sinc_periods(cfg, std::max(L_A, L_B));
    int n = detail::node_count(quad.n_theta, periods);

    auto eval = [&](int nodes) {
        const MappedRule rule = map_rule(nodes, -M_PI / 2.0, M_PI / 2.0);
        std::vector<double> q(nodes), f_obj(nodes), f_img(nodes);
        for (int j = 0; j < nodes; ++j) {
            q[j] = q_cut * std::sin(rule.x[j]);
            const double mismatch =
                kp - detail::kz_clamped(q[j], ks) - detail::kz_clamped(q[j], ki);
            const double s_obj = sinc(0.5 * L_B * mismatch);
            const double s_img = sinc(0.5 * L_A * mismatch);
            if (ks <= ki) {
                f_obj[j] = rule.w[j] * s_obj;
                f_img[j] = rule.w[j] * s_img / detail::kz_clamped(q[j], ki);
            } else {
                const double kzs = detail::kz_clamped(q[j], ks);
                f_obj[j] = rule.w[j] * q_cut * std::cos(rule.x[j]) * s_obj / kzs;
                f_img[j] = rule.w[j] * s_img / kzs;
            }
        }
        auto band_sum = [&](const std::vector<double>& f, double y) {
            double acc = 0.0;
            for (int j = 0; j < nodes; ++j) acc += f[j] * std::cos(q[j] * y);
            return acc;
        };
        std::vector<double> out(x_axis.size());
        for (std::size_t m = 0; m < x_axis.size(); ++m) {
            const double x = x_axis[m];
            if (obj.kind == SlitObject::Kind::DoubleSlit) {
                out[m] = band_sum(f_obj, x + 0.5 * d) * band_sum(f_img, x + 0.5 * d) +
                         band_sum(f_obj, x - 0.5 * d) * band_sum(f_img, x - 0.5 * d);
            } else {
                out[m] = band_sum(f_obj, x) * band_sum(f_img, x);
            }
        }
        return out;
    };

    std::vector<double> prev = eval(n);
    double achieved = 0.0;
    for (int r = 0; r < std::max(6, quad.n_refine_max); ++r) {
        n *= 2;
        std::vector<double> cur = eval(n);
        double diff = 0.0, peak = 0.0;
        for (std::size_t m = 0; m < cur.size(); ++m) {
            diff = std::max(diff, std::abs(cur[m] - prev[m]));
            peak = std::max(peak, std::abs(cur[m]));
        }
        achieved = diff / std::max(peak, 1e-300);
        if (achieved < quad.rel_tol) {
            img.values = std::move(cur);
            img.quad = {n, achieved};
            const double top = detail::peak_of(img.values);
            if (top > 0.0)
                for (double& v : img.values) v /= top;
            return img;
        }
        prev = std::move(cur);
    }
    throw quadrature_error("plane_wave_image did not converge", achieved);
}

// Image with the pump profile deciding the route: the analytic plane-wave
// path for a plane-wave pump, the reduced gaussian engine otherwise.
inline ImageProfile compute_image(const std::vector<double>& x_axis, const OpticalConfig& cfg,
                                  const PumpProfile& pump, const SlitObject& obj, double L_A,
                                  double L_B, const QuadratureSpec& quad = {}) {
    if (pump.kind == PumpProfile::Kind::PlaneWave)
        return plane_wave_image(x_axis, cfg, obj, L_A, L_B, quad);
    return image_reduced(x_axis, cfg, pump, obj, L_A, L_B, quad);
}

// Caps the worker pool shared by image refinement and parameter sweeps;
// n <= 0 restores the hardware core count.
inline void set_worker_count(int n) { detail::jobs_override() = n > 0 ? n : 0; }

}  // namespace qiup
