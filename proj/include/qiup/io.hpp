#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <qiup/errors.hpp>
#include <qiup/imaging.hpp>
#include <qiup/resolution.hpp>
#include <qiup/spdc.hpp>

namespace qiup {

// 9 significant digits, fixed-width exponent form; the CSV determinism
// contract hangs on this being locale-independent.
inline std::string format_sci(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.8e", v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string image_csv(const ImageProfile& p) {
    const bool with_bg = !p.background.empty();
    std::string out = with_bg ? "x_S[m],I_norm[1],background_norm[1]\n" : "x_S[m],I_norm[1]\n";
    for (std::size_t i = 0; i < p.x_axis.size(); ++i) {
        out += format_sci(p.x_axis[i]);
        out += ',';
        out += format_sci(p.values[i]);
        if (with_bg) {
            out += ',';
            out += format_sci(p.background[i]);
        }
        out += '\n';
    }
    return out;
}

inline std::string oracle_csv(const std::vector<double>& x, const std::vector<double>& reduced,
                              const std::vector<double>& direct) {
    std::string out = "x_S[m],I_reduced[1],I_direct[1]\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
        out += format_sci(x[i]);
        out += ',';
        out += format_sci(reduced[i]);
        out += ',';
        out += format_sci(direct[i]);
        out += '\n';
    }
    return out;
}

inline std::string state_map_csv(const AngularProbabilityMap& m) {
    std::string out = "theta_S[rad],theta_I[rad],p_norm[1]\n";
    out.reserve(out.size() + m.values.size() * 48);
    for (std::size_t i = 0; i < m.theta_s.size(); ++i) {
        for (std::size_t j = 0; j < m.theta_i.size(); ++j) {
            out += format_sci(m.theta_s[i]);
            out += ',';
            out += format_sci(m.theta_i[j]);
            out += ',';
            out += format_sci(m.at(i, j));
            out += '\n';
        }
    }
    return out;
}

inline std::string psf_csv(const ImageProfile& p) {
    std::string out = "x_S[m],psf_norm[1]\n";
    for (std::size_t i = 0; i < p.x_axis.size(); ++i) {
        out += format_sci(p.x_axis[i]);
        out += ',';
        out += format_sci(p.values[i]);
        out += '\n';
    }
    return out;
}

namespace detail {

inline std::string sweep_column_header(const std::string& name) {
    if (name == "L") return "L[m]";
    if (name == "sigma_p") return "sigma_p[m]";
    if (name == "lambda_s") return "lambda_S[m]";
    if (name == "lambda_i") return "lambda_I[m]";
    return name + "[m]";
}

}

// Long format: one row per grid point, parameter columns first.
inline std::string sweep_csv(const SweepTable& t) {
    std::string out;
    for (const std::string& name : t.parameter_names) {
        out += detail::sweep_column_header(name);
        out += ',';
    }
    out += "d_min[m],paraxial_d_min[m],dip_at_dmin[1],ratio[1],plateau[0/1],status\n";
    for (const SweepPoint& p : t.points) {
        for (double v : p.params) {
            out += format_sci(v);
            out += ',';
        }
        out += format_sci(p.d_min);
        out += ',';
        out += format_sci(p.paraxial);
        out += ',';
        out += format_sci(p.dip_at_dmin);
        out += ',';
        out += format_sci(p.ratio);
        out += ',';
        out += p.plateau ? '1' : '0';
        out += ',';
        out += csv_field(p.status);
        out += '\n';
    }
    return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw config_error("cannot open output file '" + path.string() + "'");
    f << content;
    f.flush();
    if (!f) throw config_error("failed while writing '" + path.string() + "'");
}

}
