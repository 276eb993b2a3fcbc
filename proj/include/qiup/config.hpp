#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <qiup/errors.hpp>
#include <qiup/imaging.hpp>
#include <qiup/optics.hpp>
#include <qiup/resolution.hpp>

namespace qiup {

// "530nm" -> 5.3e-7. A unit suffix is mandatory so mixed-unit configs stay
// unambiguous.
inline double parse_length(const std::string& token) {
    static constexpr std::pair<const char*, double> units[] = {
        {"nm", 1e-9}, {"um", 1e-6}, {"mm", 1e-3}, {"cm", 1e-2}, {"m", 1.0}};
    std::size_t b = token.find_first_not_of(" \t");
    std::size_t e = token.find_last_not_of(" \t");
    const std::string t = b == std::string::npos ? std::string() : token.substr(b, e - b + 1);
    for (const auto& [suffix, scale] : units) {
        const std::size_t sl = std::strlen(suffix);
        if (t.size() <= sl || t.compare(t.size() - sl, sl, suffix) != 0) continue;
        const std::string num = t.substr(0, t.size() - sl);
        char* end = nullptr;
        const double v = std::strtod(num.c_str(), &end);
        if (end == num.c_str() + num.size()) return v * scale;
    }
    throw config_error("length '" + token +
                       "' must be a number with a unit suffix (nm, um, mm, cm, m)");
}

namespace detail {

struct ConfigEntry {
    std::string scalar;
    bool scalar_quoted = false;
    bool is_array = false;
    std::vector<std::string> items;
    std::vector<bool> item_quoted;
    int line = 0;
};

inline std::string config_trim(const std::string& s) {
    const std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline bool valid_identifier(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    return true;
}

}

// Key-value tree parsed from "[section]" headers and "key = value" lines.
// Values: "quoted string", bare number or boolean, or a one-line array.
// Keys are consumed by the typed take_* getters; finish() rejects leftovers
// so misspelled keys cannot pass silently.
class ConfigTree {
public:
    static ConfigTree parse_text(const std::string& text, const std::string& label) {
        ConfigTree t;
        t.label_ = label;
        std::istringstream in(text);
        std::string raw;
        std::string section;
        int lineno = 0;
        while (std::getline(in, raw)) {
            ++lineno;
            std::string line = strip_comment(raw, t.where(lineno));
            line = detail::config_trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw config_error(t.where(lineno) + ": malformed section header '" + line + "'");
                section = detail::config_trim(line.substr(1, line.size() - 2));
                if (!detail::valid_identifier(section))
                    throw config_error(t.where(lineno) + ": invalid section name '" + section + "'");
                continue;
            }
            const std::size_t eq = find_unquoted(line, '=');
            if (eq == std::string::npos)
                throw config_error(t.where(lineno) + ": expected 'key = value', got '" + line + "'");
            const std::string key = detail::config_trim(line.substr(0, eq));
            const std::string value = detail::config_trim(line.substr(eq + 1));
            if (!detail::valid_identifier(key))
                throw config_error(t.where(lineno) + ": invalid key name '" + key + "'");
            if (section.empty())
                throw config_error(t.where(lineno) + ": key '" + key + "' appears outside a [section]");
            const std::string full = section + "." + key;
            if (t.entries_.count(full))
                throw config_error(t.where(lineno) + ": duplicate key '" + full + "'");
            t.entries_.emplace(full, t.parse_value(value, lineno, full));
        }
        return t;
    }

    static ConfigTree load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw config_error("cannot read config file '" + path + "'");
        std::ostringstream buf;
        buf << f.rdbuf();
        return parse_text(buf.str(), path);
    }

    const std::string& label() const { return label_; }
    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    std::string take_string(const std::string& key) {
        detail::ConfigEntry e = take(key);
        if (e.is_array || !e.scalar_quoted)
            throw config_error(where(e.line) + ": key '" + key + "' must be a quoted string");
        return e.scalar;
    }
    std::string take_string_or(const std::string& key, const std::string& def) {
        return has(key) ? take_string(key) : def;
    }

    double take_length(const std::string& key) {
        detail::ConfigEntry e = take(key);
        if (e.is_array || !e.scalar_quoted)
            throw config_error(where(e.line) + ": key '" + key +
                               "' must be a quoted length such as \"530nm\"");
        try {
            return parse_length(e.scalar);
        } catch (const config_error& err) {
            throw config_error(where(e.line) + ": key '" + key + "': " + err.what());
        }
    }
    double take_length_or(const std::string& key, double def) {
        return has(key) ? take_length(key) : def;
    }

    double take_number(const std::string& key) {
        detail::ConfigEntry e = take(key);
        if (e.is_array || e.scalar_quoted)
            throw config_error(where(e.line) + ": key '" + key + "' must be a bare number");
        return to_number(e.scalar, e.line, key);
    }
    double take_number_or(const std::string& key, double def) {
        return has(key) ? take_number(key) : def;
    }

    int take_int(const std::string& key) {
        const int line = entries_.count(key) ? entries_.at(key).line : 0;
        const double v = take_number(key);
        const int i = static_cast<int>(v);
        if (static_cast<double>(i) != v)
            throw config_error(where(line) + ": key '" + key + "' must be an integer");
        return i;
    }
    int take_int_or(const std::string& key, int def) { return has(key) ? take_int(key) : def; }

    std::vector<double> take_length_array(const std::string& key) {
        detail::ConfigEntry e = take(key);
        if (!e.is_array)
            throw config_error(where(e.line) + ": key '" + key + "' must be an array of lengths");
        std::vector<double> out;
        out.reserve(e.items.size());
        for (std::size_t i = 0; i < e.items.size(); ++i) {
            if (!e.item_quoted[i])
                throw config_error(where(e.line) + ": key '" + key +
                                   "' must contain quoted lengths such as \"10nm\"");
            try {
                out.push_back(parse_length(e.items[i]));
            } catch (const config_error& err) {
                throw config_error(where(e.line) + ": key '" + key + "': " + err.what());
            }
        }
        return out;
    }

    std::vector<std::string> take_string_array(const std::string& key) {
        detail::ConfigEntry e = take(key);
        if (!e.is_array)
            throw config_error(where(e.line) + ": key '" + key + "' must be an array of strings");
        for (std::size_t i = 0; i < e.items.size(); ++i)
            if (!e.item_quoted[i])
                throw config_error(where(e.line) + ": key '" + key + "' must contain quoted strings");
        return e.items;
    }

    // every key must have been consumed by a getter by now
    void finish() const {
        if (entries_.empty()) return;
        const detail::ConfigEntry* first = nullptr;
        const std::string* name = nullptr;
        for (const auto& [key, e] : entries_) {
            if (!first || e.line < first->line) {
                first = &e;
                name = &key;
            }
        }
        throw config_error(where(first->line) + ": unknown key '" + *name + "'");
    }

private:
    std::string label_;
    std::map<std::string, detail::ConfigEntry> entries_;

    std::string where(int line) const { return label_ + ":" + std::to_string(line); }

    detail::ConfigEntry take(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end())
            throw config_error(label_ + ": missing required key '" + key + "'");
        detail::ConfigEntry e = std::move(it->second);
        entries_.erase(it);
        return e;
    }

    double to_number(const std::string& s, int line, const std::string& key) const {
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size())
            throw config_error(where(line) + ": key '" + key + "' has a malformed number '" + s + "'");
        return v;
    }

    static std::size_t find_unquoted(const std::string& s, char c) {
        bool quoted = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') quoted = !quoted;
            else if (s[i] == c && !quoted) return i;
        }
        return std::string::npos;
    }

    static std::string strip_comment(const std::string& s, const std::string& where) {
        bool quoted = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') quoted = !quoted;
            else if (s[i] == '#' && !quoted) return s.substr(0, i);
        }
        if (quoted) throw config_error(where + ": unterminated string");
        return s;
    }

    detail::ConfigEntry parse_value(const std::string& value, int line, const std::string& key) {
        detail::ConfigEntry e;
        e.line = line;
        if (value.empty()) throw config_error(where(line) + ": key '" + key + "' has no value");
        if (value.front() == '[') {
            if (value.back() != ']')
                throw config_error(where(line) + ": array value of '" + key +
                                   "' must close on the same line");
            e.is_array = true;
            std::string body = value.substr(1, value.size() - 2);
            std::size_t start = 0;
            bool quoted = false;
            for (std::size_t i = 0; i <= body.size(); ++i) {
                if (i < body.size() && body[i] == '"') quoted = !quoted;
                if (i == body.size() || (body[i] == ',' && !quoted)) {
                    const std::string item = detail::config_trim(body.substr(start, i - start));
                    start = i + 1;
                    if (item.empty()) {
                        if (i == body.size() && e.items.empty()) break;  // empty array
                        throw config_error(where(line) + ": empty element in array '" + key + "'");
                    }
                    e.items.push_back(unquote(item, line, key));
                    e.item_quoted.push_back(item.front() == '"');
                }
            }
            return e;
        }
        e.scalar_quoted = value.front() == '"';
        e.scalar = unquote(value, line, key);
        return e;
    }

    std::string unquote(const std::string& v, int line, const std::string& key) const {
        if (v.front() != '"') return v;
        if (v.size() < 2 || v.back() != '"' || v.find('"', 1) != v.size() - 1)
            throw config_error(where(line) + ": malformed string value for '" + key + "'");
        return v.substr(1, v.size() - 2);
    }
};

// One parsed run request: an optical configuration plus whatever axis, sweep,
// and search blocks the recipe provides.
struct RunConfig {
    OpticalConfig optical;
    PumpProfile pump = PumpProfile::plane_wave();
    SlitObject object = SlitObject::single_slit();
    QuadratureSpec quadrature;
    double x_half = 0.0;  // 0: the command picks a default from d or the wavelengths
    int n_x = 201;
    int map_n = 512;
    std::string sweep_kind;  // empty when the recipe has no [sweep] block
    std::vector<double> sweep_values;
    std::vector<double> lambda_s_values, lambda_i_values;
    SearchSpec search;
    std::string out_dir;
    std::vector<std::string> formats = {"csv", "json"};
};

namespace detail {

inline std::vector<double> spaced_grid(double lo, double hi, int n, bool log_scale,
                                       const std::string& ctx) {
    if (n < 2) throw config_error(ctx + ": points must be at least 2");
    if (!(lo > 0.0) && log_scale) throw config_error(ctx + ": log grid needs a positive minimum");
    if (!(hi > lo)) throw config_error(ctx + ": max must exceed min");
    std::vector<double> v(n);
    for (int k = 0; k < n; ++k) {
        const double f = static_cast<double>(k) / (n - 1);
        v[k] = log_scale ? lo * std::pow(hi / lo, f) : lo + f * (hi - lo);
    }
    return v;
}

// axis from either an explicit `values` list or a min/max/points span; stem
// "" reads sweep.values etc., stem "lambda_s" reads sweep.lambda_s_values etc.
inline std::vector<double> sweep_axis(ConfigTree& t, const std::string& stem, bool log_scale) {
    const std::string base = stem.empty() ? std::string("sweep.") : "sweep." + stem + "_";
    const std::string values_key = base + "values";
    const std::string min_key = base + "min", max_key = base + "max", pts_key = base + "points";
    const bool has_list = t.has(values_key);
    const bool has_span = t.has(min_key) || t.has(max_key) || t.has(pts_key);
    if (has_list && has_span)
        throw config_error(t.label() + ": give either '" + values_key + "' or '" + min_key +
                           "'/'" + max_key + "'/'" + pts_key + "', not both");
    if (has_list) {
        std::vector<double> v = t.take_length_array(values_key);
        if (v.empty()) throw config_error(t.label() + ": '" + values_key + "' must not be empty");
        return v;
    }
    if (!has_span)
        throw config_error(t.label() + ": sweep axis needs '" + values_key + "' or '" + min_key +
                           "'/'" + max_key + "'/'" + pts_key + "'");
    const double lo = t.take_length(min_key);
    const double hi = t.take_length(max_key);
    const int n = t.take_int(pts_key);
    return spaced_grid(lo, hi, n, log_scale, t.label() + ": axis '" + values_key + "'");
}

}

inline RunConfig build_run_config(ConfigTree& t) {
    RunConfig rc;

    // thickness first: L sets both sources, or L_A/L_B set them separately
    const bool has_L = t.has("optical.L");
    const bool has_LA = t.has("optical.L_A"), has_LB = t.has("optical.L_B");
    if (has_L && (has_LA || has_LB))
        throw config_error(t.label() + ": give either optical.L or optical.L_A/optical.L_B");
    if (has_LA != has_LB)
        throw config_error(t.label() + ": optical.L_A and optical.L_B must be given together");
    double L_a = 0.0, L_b = 0.0;
    if (has_L) {
        L_a = L_b = t.take_length("optical.L");
        if (L_a < 0.0) throw config_error(t.label() + ": optical.L must be non-negative");
    } else if (has_LA) {
        L_a = t.take_length("optical.L_A");
        L_b = t.take_length("optical.L_B");
        if (L_a < 0.0) throw config_error(t.label() + ": optical.L_A must be non-negative");
        if (L_b < 0.0) throw config_error(t.label() + ": optical.L_B must be non-negative");
    }

    const bool has_lp = t.has("optical.lambda_pump");
    const bool has_ls = t.has("optical.lambda_signal");
    const bool has_li = t.has("optical.lambda_idler");
    if (has_ls && has_li && !has_lp) {
        rc.optical = OpticalConfig::from_signal_idler(t.take_length("optical.lambda_signal"),
                                                      t.take_length("optical.lambda_idler"), L_a,
                                                      L_b);
    } else if (has_lp && has_ls && !has_li) {
        rc.optical = OpticalConfig::from_pump_signal(t.take_length("optical.lambda_pump"),
                                                     t.take_length("optical.lambda_signal"), L_a,
                                                     L_b);
    } else {
        throw config_error(t.label() +
                           ": [optical] needs exactly one wavelength pair, either "
                           "lambda_signal+lambda_idler or lambda_pump+lambda_signal");
    }

    const std::string profile = t.take_string_or("pump.profile", "plane_wave");
    if (profile == "gaussian") {
        rc.pump = PumpProfile::gaussian(t.take_length("pump.sigma_p"));
    } else if (profile == "plane_wave") {
        if (t.has("pump.sigma_p"))
            throw config_error(t.label() + ": pump.sigma_p only applies to the gaussian profile");
        rc.pump = PumpProfile::plane_wave();
    } else {
        throw config_error(t.label() + ": pump.profile must be \"gaussian\" or \"plane_wave\"");
    }

    const std::string kind = t.take_string_or("object.kind", "single_slit");
    if (kind == "double_slit") {
        rc.object = SlitObject::double_slit(t.take_length("object.d"));
    } else if (kind == "single_slit" || kind == "opaque") {
        if (t.has("object.d"))
            throw config_error(t.label() + ": object.d only applies to the double_slit kind");
        rc.object = kind == "opaque" ? SlitObject::opaque() : SlitObject::single_slit();
    } else {
        throw config_error(t.label() +
                           ": object.kind must be \"double_slit\", \"single_slit\", or \"opaque\"");
    }

    rc.quadrature.n_theta = t.take_int_or("quadrature.n_theta", rc.quadrature.n_theta);
    rc.quadrature.n_refine_max = t.take_int_or("quadrature.n_refine_max", rc.quadrature.n_refine_max);
    rc.quadrature.rel_tol = t.take_number_or("quadrature.rel_tol", rc.quadrature.rel_tol);
    rc.quadrature.validate();

    rc.x_half = t.take_length_or("image.x_half", 0.0);
    rc.n_x = t.take_int_or("image.n_x", rc.n_x);
    if (rc.x_half < 0.0) throw config_error(t.label() + ": image.x_half must be positive");
    if (rc.n_x < 2) throw config_error(t.label() + ": image.n_x must be at least 2");

    rc.map_n = t.take_int_or("state_map.n", rc.map_n);
    if (rc.map_n < 2) throw config_error(t.label() + ": state_map.n must be at least 2");

    if (t.has("sweep.kind")) {
        rc.sweep_kind = t.take_string("sweep.kind");
        const bool log_scale = [&] {
            const std::string scale = t.take_string_or("sweep.scale", "log");
            if (scale != "log" && scale != "linear")
                throw config_error(t.label() + ": sweep.scale must be \"log\" or \"linear\"");
            return scale == "log";
        }();
        if (rc.sweep_kind == "thickness" || rc.sweep_kind == "pump-width") {
            rc.sweep_values = detail::sweep_axis(t, "", log_scale);
        } else if (rc.sweep_kind == "wavelengths") {
            rc.lambda_s_values = detail::sweep_axis(t, "lambda_s", log_scale);
            rc.lambda_i_values = detail::sweep_axis(t, "lambda_i", log_scale);
        } else {
            throw config_error(t.label() +
                               ": sweep.kind must be \"thickness\", \"pump-width\", or \"wavelengths\"");
        }
    }

    rc.search.d_lo = t.take_length_or("search.d_lo", 0.0);
    rc.search.d_hi = t.take_length_or("search.d_hi", 0.0);
    rc.search.tol_d = t.take_length_or("search.tol_d", 0.0);

    rc.out_dir = t.take_string_or("output.dir", "");
    if (t.has("output.format")) {
        rc.formats = t.take_string_array("output.format");
        if (rc.formats.empty())
            throw config_error(t.label() + ": output.format must name at least one format");
        for (const std::string& f : rc.formats)
            if (f != "csv" && f != "json")
                throw config_error(t.label() + ": output.format entries must be \"csv\" or \"json\"");
    }

    t.finish();
    return rc;
}

inline RunConfig parse_run_config(const std::string& text, const std::string& label) {
    ConfigTree t = ConfigTree::parse_text(text, label);
    return build_run_config(t);
}

inline RunConfig load_run_config(const std::string& path) {
    ConfigTree t = ConfigTree::load(path);
    return build_run_config(t);
}

}
