#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <qiup/errors.hpp>
#include <qiup/math.hpp>

namespace qiup {

inline constexpr double two_pi = 2.0 * M_PI;

// Transverse pump spectrum. Gaussian: exp(-sigma_p^2 q^2 / 2).
struct PumpProfile {
    enum class Kind { PlaneWave, Gaussian };
    Kind kind = Kind::PlaneWave;
    double sigma_p = 0.0;

    static PumpProfile plane_wave() { return {Kind::PlaneWave, 0.0}; }
    static PumpProfile gaussian(double sigma) {
        if (!(sigma > 0.0)) throw config_error("pump sigma_p must be positive");
        return {Kind::Gaussian, sigma};
    }
};

inline double pump_envelope(double q, const PumpProfile& pump) {
    if (pump.kind != PumpProfile::Kind::Gaussian)
        throw unsupported_profile_error("pump_envelope requires a gaussian pump");
    const double a = pump.sigma_p * q;
    return std::exp(-0.5 * a * a);
}

// Longitudinal wavenumber of a monochromatic wave with transverse component q.
inline double kz(double q, double lambda) {
    const double k = two_pi / lambda;
    if (std::abs(q) > k) throw std::domain_error("kz: |q| exceeds the medium wavenumber");
    return std::sqrt((k - q) * (k + q));
}

inline double idler_wavelength(double lambda_p, double lambda_s) {
    if (!(lambda_s > lambda_p))
        throw std::domain_error("idler_wavelength: lambda_signal must exceed lambda_pump");
    return 1.0 / (1.0 / lambda_p - 1.0 / lambda_s);
}

inline double pump_wavelength(double lambda_s, double lambda_i) {
    return 1.0 / (1.0 / lambda_s + 1.0 / lambda_i);
}

// Wavelengths tied by 1/lambda_p = 1/lambda_s + 1/lambda_i, plus the two
// source thicknesses (L_a: imaging arm, L_b: object arm).
struct OpticalConfig {
    double lambda_p = 0.0;
    double lambda_s = 0.0;
    double lambda_i = 0.0;
    double L_a = 0.0;
    double L_b = 0.0;

    static OpticalConfig from_signal_idler(double ls, double li, double La, double Lb) {
        OpticalConfig c{pump_wavelength(ls, li), ls, li, La, Lb};
        c.validate();
        return c;
    }
    static OpticalConfig from_pump_signal(double lp, double ls, double La, double Lb) {
        OpticalConfig c{lp, ls, idler_wavelength(lp, ls), La, Lb};
        c.validate();
        return c;
    }

    void validate() const {
        if (!(lambda_p > 0.0)) throw config_error("lambda_pump must be positive");
        if (!(lambda_s > 0.0)) throw config_error("lambda_signal must be positive");
        if (!(lambda_i > 0.0)) throw config_error("lambda_idler must be positive");
        if (!(L_a >= 0.0)) throw config_error("L_A must be non-negative");
        if (!(L_b >= 0.0)) throw config_error("L_B must be non-negative");
        const double lhs = 1.0 / lambda_p, rhs = 1.0 / lambda_s + 1.0 / lambda_i;
        if (std::abs(lhs - rhs) > 1e-12 * lhs)
            throw config_error("wavelengths violate 1/lambda_pump = 1/lambda_signal + 1/lambda_idler");
    }
};

// Largest |theta_s| with a phase-matched conjugate idler direction.
inline double signal_angle_cutoff(const OpticalConfig& cfg) {
    return std::asin(std::min(1.0, cfg.lambda_s / cfg.lambda_i));
}

// sinc((L/2) * [kz_pump(q_s + q_i) - kz_s - kz_i]) in angle variables.
// Energy conservation keeps |q_s + q_i| <= k_pump for real angles; the
// explicit gate only absorbs rounding at grazing incidence.
inline double phase_mismatch_sinc(double theta_s, double theta_i,
                                  const OpticalConfig& cfg, double L) {
    const double ks = two_pi / cfg.lambda_s;
    const double ki = two_pi / cfg.lambda_i;
    const double kp = two_pi / cfg.lambda_p;
    const double q_sum = ks * std::sin(theta_s) + ki * std::sin(theta_i);
    if (std::abs(q_sum) > kp) return 0.0;
    const double kzp = std::sqrt((kp - q_sum) * (kp + q_sum));
    const double mismatch = kzp - ks * std::cos(theta_s) - ki * std::cos(theta_i);
    return sinc(0.5 * L * mismatch);
}

// Controls for the adaptive angular quadrature used by the imaging routines.
struct QuadratureSpec {
    int n_theta = 64;       // base node count per angular axis, even
    int n_refine_max = 3;   // doublings tried before giving up
    double rel_tol = 1e-3;  // max-norm tolerance on peak-normalised output

    void validate() const {
        if (n_theta < 64 || n_theta % 2 != 0)
            throw config_error("quadrature n_theta must be even and at least 64");
        if (n_refine_max < 1) throw config_error("quadrature n_refine_max must be at least 1");
        if (!(rel_tol > 0.0) || rel_tol > 1e-2)
            throw config_error("quadrature rel_tol must lie in (0, 1e-2]");
    }
};

}
