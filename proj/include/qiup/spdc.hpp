#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <qiup/errors.hpp>
#include <qiup/math.hpp>
#include <qiup/optics.hpp>

namespace qiup {

// Two-photon amplitude over emission angles for a source of thickness L:
// E_P(q_s + q_i) * sinc of the longitudinal mismatch. Real for a gaussian pump.
inline double joint_angular_amplitude(double theta_s, double theta_i,
                                      const OpticalConfig& cfg, const PumpProfile& pump,
                                      double L) {
    const double ks = two_pi / cfg.lambda_s;
    const double ki = two_pi / cfg.lambda_i;
    const double q_sum = ks * std::sin(theta_s) + ki * std::sin(theta_i);
    return pump_envelope(q_sum, pump) * phase_mismatch_sinc(theta_s, theta_i, cfg, L);
}

// Same state over transverse momenta; carries the (kz_s kz_i)^(-1/2) mode
// normalisation. Zero outside the open propagation rectangle; on its edge
// the normalisation diverges.
inline double joint_momentum_amplitude(double q_s, double q_i,
                                       const OpticalConfig& cfg, const PumpProfile& pump,
                                       double L) {
    const double ks = two_pi / cfg.lambda_s;
    const double ki = two_pi / cfg.lambda_i;
    if (std::abs(q_s) > ks || std::abs(q_i) > ki) return 0.0;
    const double kzs = kz(q_s, cfg.lambda_s);
    const double kzi = kz(q_i, cfg.lambda_i);
    if (kzs == 0.0 || kzi == 0.0)
        throw std::domain_error("joint_momentum_amplitude: amplitude diverges on the propagation boundary");
    const double kp = two_pi / cfg.lambda_p;
    const double q_sum = q_s + q_i;
    // |q_s| + |q_i| <= ks + ki = kp, so kzp is real up to rounding
    const double kzp2 = std::max(0.0, (kp - q_sum) * (kp + q_sum));
    const double mismatch = std::sqrt(kzp2) - kzs - kzi;
    return pump_envelope(q_sum, pump) * sinc(0.5 * L * mismatch) / std::sqrt(kzs * kzi);
}

// Peak-normalised |amplitude|^2 on an n x n angular grid.
struct AngularProbabilityMap {
    std::vector<double> theta_s, theta_i;
    std::vector<double> values;  // row-major, values[i_s * n_i + i_i]
    double raw_peak = 0.0;

    double at(std::size_t i_s, std::size_t i_i) const {
        return values[i_s * theta_i.size() + i_i];
    }
};

inline AngularProbabilityMap angular_probability_map(const OpticalConfig& cfg,
                                                     const PumpProfile& pump, double L,
                                                     int n = 512) {
    if (n < 2) throw config_error("angular_probability_map: n must be at least 2");
    AngularProbabilityMap m;
    m.theta_s = symmetric_linspace(M_PI / 2.0, n);
    m.theta_i = m.theta_s;
    m.values.resize(static_cast<std::size_t>(n) * n);
    double peak = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double a = joint_angular_amplitude(m.theta_s[i], m.theta_i[j], cfg, pump, L);
            const double v = a * a;
            m.values[static_cast<std::size_t>(i) * n + j] = v;
            peak = std::max(peak, v);
        }
    }
    if (peak == 0.0)
        throw window_error("angular grid too coarse to resolve the pump-correlation ridge; "
                           "increase n or reduce sigma_p");
    m.raw_peak = peak;
    for (double& v : m.values) v /= peak;
    return m;
}

enum class Representation { Angular, Momentum };

// Raw complex amplitude on an n x n grid in either representation. Momentum
// axes use cell centres so every sample lies strictly inside the propagation
// rectangle.
struct JointAmplitudeMap {
    Representation rep = Representation::Angular;
    std::vector<double> axis_s, axis_i;
    std::vector<std::complex<double>> values;  // row-major
};

inline JointAmplitudeMap joint_amplitude_map(Representation rep, const OpticalConfig& cfg,
                                             const PumpProfile& pump, double L, int n) {
    if (n < 2) throw config_error("joint_amplitude_map: n must be at least 2");
    JointAmplitudeMap m;
    m.rep = rep;
    if (rep == Representation::Angular) {
        m.axis_s = symmetric_linspace(M_PI / 2.0, n);
        m.axis_i = m.axis_s;
    } else {
        const double ks = two_pi / cfg.lambda_s;
        const double ki = two_pi / cfg.lambda_i;
        m.axis_s.resize(n);
        m.axis_i.resize(n);
        for (int j = 0; j < n; ++j) {
            m.axis_s[j] = ks * (-1.0 + (j + 0.5) * 2.0 / n);
            m.axis_i[j] = ki * (-1.0 + (j + 0.5) * 2.0 / n);
        }
    }
    m.values.resize(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double a = rep == Representation::Angular
                                 ? joint_angular_amplitude(m.axis_s[i], m.axis_i[j], cfg, pump, L)
                                 : joint_momentum_amplitude(m.axis_s[i], m.axis_i[j], cfg, pump, L);
            m.values[static_cast<std::size_t>(i) * n + j] = a;
        }
    }
    return m;
}

}
