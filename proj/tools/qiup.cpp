#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <qiup/config.hpp>
#include <qiup/errors.hpp>
#include <qiup/imaging.hpp>
#include <qiup/io.hpp>
#include <qiup/math.hpp>
#include <qiup/optics.hpp>
#include <qiup/resolution.hpp>
#include <qiup/spdc.hpp>
#include <qiup/version.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string g_error_dir;  // set once the output directory is known

struct Common {
    std::string config_path;
    std::string out_dir;
    std::string format;
    int jobs = 0;
    int quad_n = 0;
    double quad_tol = 0.0;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "recipe file")->required();
    cmd->add_option("--out", c.out_dir, "output directory (default: config or '.')");
    cmd->add_option("--jobs", c.jobs, "worker threads (default: available cores)");
    cmd->add_option("--format", c.format, "comma-separated subset of csv,json");
    cmd->add_option("--quad-n", c.quad_n, "override quadrature n_theta");
    cmd->add_option("--quad-tol", c.quad_tol, "override quadrature rel_tol");
}

struct Run {
    qiup::RunConfig rc;
    fs::path out;
    bool want_csv = true;
    bool want_json = true;
    int jobs = 0;
    std::string config_path;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
};

Run resolve(const Common& c) {
    Run run;
    run.config_path = c.config_path;
    run.rc = qiup::load_run_config(c.config_path);
    if (c.quad_n > 0) run.rc.quadrature.n_theta = c.quad_n;
    if (c.quad_tol > 0.0) run.rc.quadrature.rel_tol = c.quad_tol;
    run.rc.quadrature.validate();

    std::vector<std::string> formats = run.rc.formats;
    if (!c.format.empty()) {
        formats.clear();
        std::stringstream ss(c.format);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (tok != "csv" && tok != "json")
                throw qiup::config_error("--format entries must be csv or json, got '" + tok + "'");
            formats.push_back(tok);
        }
        if (formats.empty()) throw qiup::config_error("--format must name at least one format");
    }
    run.want_csv = std::find(formats.begin(), formats.end(), "csv") != formats.end();
    run.want_json = std::find(formats.begin(), formats.end(), "json") != formats.end();

    run.jobs = c.jobs;
    qiup::set_worker_count(c.jobs);

    const std::string dir = !c.out_dir.empty() ? c.out_dir
                            : !run.rc.out_dir.empty() ? run.rc.out_dir
                                                      : std::string(".");
    run.out = fs::path(dir);
    std::error_code ec;
    fs::create_directories(run.out, ec);
    if (ec || !fs::is_directory(run.out))
        throw qiup::config_error("output directory '" + dir + "' is not writable");
    g_error_dir = run.out.string();
    return run;
}

json config_json(const qiup::RunConfig& rc) {
    json pump;
    if (rc.pump.kind == qiup::PumpProfile::Kind::Gaussian)
        pump = {{"profile", "gaussian"}, {"sigma_p_m", rc.pump.sigma_p}};
    else
        pump = {{"profile", "plane_wave"}};
    json object;
    switch (rc.object.kind) {
        case qiup::SlitObject::Kind::DoubleSlit:
            object = {{"kind", "double_slit"}, {"d_m", rc.object.separation_d}};
            break;
        case qiup::SlitObject::Kind::SingleSlit:
            object = {{"kind", "single_slit"}};
            break;
        case qiup::SlitObject::Kind::Opaque:
            object = {{"kind", "opaque"}};
            break;
    }
    return {{"lambda_pump_m", rc.optical.lambda_p},
            {"lambda_signal_m", rc.optical.lambda_s},
            {"lambda_idler_m", rc.optical.lambda_i},
            {"L_A_m", rc.optical.L_a},
            {"L_B_m", rc.optical.L_b},
            {"pump", pump},
            {"object", object},
            {"quadrature",
             {{"n_theta", rc.quadrature.n_theta},
              {"n_refine_max", rc.quadrature.n_refine_max},
              {"rel_tol", rc.quadrature.rel_tol}}}};
}

json manifest(const char* cmd, const Run& run, const std::vector<std::string>& outputs) {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - run.t0).count();
    return {{"tool", "qiup"},
            {"version", qiup::version_string},
            {"command", cmd},
            {"config_file", run.config_path},
            {"resolved_config", config_json(run.rc)},
            {"jobs", run.jobs > 0 ? run.jobs : qiup::detail::default_jobs()},
            {"wall_time_s", wall},
            {"outputs", outputs}};
}

void emit(const fs::path& path, const std::string& content) {
    qiup::write_file(path, content);
    std::cout << "wrote " << path.string() << "\n";
}

double image_half_width(const qiup::RunConfig& rc) {
    if (rc.x_half > 0.0) return rc.x_half;
    if (rc.object.kind == qiup::SlitObject::Kind::DoubleSlit) return 1.5 * rc.object.separation_d;
    return 1.5 * std::max(rc.optical.lambda_s, rc.optical.lambda_i);
}

void cmd_state_map(const Common& c) {
    Run run = resolve(c);
    const qiup::AngularProbabilityMap map = qiup::angular_probability_map(
        run.rc.optical, run.rc.pump, run.rc.optical.L_a, run.rc.map_n);
    std::vector<std::string> outputs;
    if (run.want_csv) {
        emit(run.out / "state_map.csv", qiup::state_map_csv(map));
        outputs.push_back("state_map.csv");
    }
    if (run.want_json) {
        json m = manifest("state-map", run, outputs);
        m["diagnostics"] = {{"n", run.rc.map_n},
                            {"L_m", run.rc.optical.L_a},
                            {"raw_peak", map.raw_peak}};
        emit(run.out / "state_map.json", m.dump(2) + "\n");
    }
}

void cmd_image(const Common& c, const std::string& d_override, bool single_slit_override,
               bool direct_oracle) {
    Run run = resolve(c);
    if (!d_override.empty())
        run.rc.object = qiup::SlitObject::double_slit(qiup::parse_length(d_override));
    if (single_slit_override) run.rc.object = qiup::SlitObject::single_slit();

    const double x_half = image_half_width(run.rc);
    const std::vector<double> axis = qiup::symmetric_linspace(x_half, run.rc.n_x);
    const qiup::ImageProfile img =
        qiup::compute_image(axis, run.rc.optical, run.rc.pump, run.rc.object, run.rc.optical.L_a,
                            run.rc.optical.L_b, run.rc.quadrature);

    std::vector<std::string> outputs;
    if (run.want_csv) {
        emit(run.out / "image.csv", qiup::image_csv(img));
        outputs.push_back("image.csv");
    }

    json oracle;
    if (direct_oracle) {
        const std::vector<double> ox = qiup::symmetric_linspace(x_half, 33);
        const qiup::ImageProfile reduced =
            qiup::image_reduced(ox, run.rc.optical, run.rc.pump, run.rc.object,
                                run.rc.optical.L_a, run.rc.optical.L_b, run.rc.quadrature);
        const qiup::ImageProfile direct =
            qiup::image_direct(ox, run.rc.optical, run.rc.pump, run.rc.object, run.rc.optical.L_a,
                               run.rc.optical.L_b, run.rc.quadrature);
        double max_diff = 0.0;
        for (std::size_t i = 0; i < ox.size(); ++i)
            max_diff = std::max(max_diff, std::abs(reduced.values[i] - direct.values[i]));
        if (run.want_csv) {
            emit(run.out / "oracle.csv", qiup::oracle_csv(ox, reduced.values, direct.values));
            outputs.push_back("oracle.csv");
        }
        oracle = {{"n_x", 33}, {"max_abs_diff_norm", max_diff}};
        std::cout << "direct-route check: max |reduced - direct| = " << max_diff
                  << " of peak\n";
    }

    if (run.want_json) {
        json m = manifest("image", run, outputs);
        m["diagnostics"] = {{"x_half_m", x_half},
                            {"n_x", run.rc.n_x},
                            {"n_theta_final", img.quad.n_theta_final},
                            {"achieved_tol", img.quad.achieved_tol}};
        if (!oracle.is_null()) m["diagnostics"]["direct_oracle"] = oracle;
        emit(run.out / "image.json", m.dump(2) + "\n");
    }
}

void cmd_psf(const Common& c) {
    Run run = resolve(c);
    const double x_half = run.rc.x_half > 0.0
                              ? run.rc.x_half
                              : 1.5 * std::max(run.rc.optical.lambda_s, run.rc.optical.lambda_i);
    const std::vector<double> axis = qiup::symmetric_linspace(x_half, run.rc.n_x);
    const qiup::ImageProfile profile =
        qiup::psf(run.rc.optical, run.rc.pump, run.rc.optical.L_a, run.rc.optical.L_b, axis,
                  run.rc.quadrature);
    const qiup::PsfMetrics metrics = qiup::psf_metrics(profile);
    std::cout << "fwhm = " << metrics.fwhm << " m, first side lobe = " << metrics.first_side_lobe
              << " of peak\n";

    std::vector<std::string> outputs;
    if (run.want_csv) {
        emit(run.out / "psf.csv", qiup::psf_csv(profile));
        outputs.push_back("psf.csv");
    }
    if (run.want_json) {
        json m = manifest("psf", run, outputs);
        m["diagnostics"] = {{"x_half_m", x_half},
                            {"n_x", run.rc.n_x},
                            {"fwhm_m", metrics.fwhm},
                            {"first_side_lobe", metrics.first_side_lobe},
                            {"n_theta_final", profile.quad.n_theta_final},
                            {"achieved_tol", profile.quad.achieved_tol}};
        emit(run.out / "psf.json", m.dump(2) + "\n");
    }
}

void cmd_dmin(const Common& c) {
    Run run = resolve(c);
    const qiup::ResolutionResult r =
        qiup::min_resolvable_distance(run.rc.optical, run.rc.pump, run.rc.optical.L_a,
                                      run.rc.optical.L_b, run.rc.quadrature, run.rc.search);
    std::cout << "d_min = " << r.d_min << " m (dip " << r.dip_at_dmin << ")\n";
    json m = manifest("dmin", run, {});
    m["result"] = {{"d_min_m", r.d_min},
                   {"dip_at_dmin", r.dip_at_dmin},
                   {"bracket", {{"d_lo_m", r.d_lo}, {"d_hi_m", r.d_hi}}},
                   {"iterations", r.iterations}};
    emit(run.out / "dmin.json", m.dump(2) + "\n");
}

void cmd_sweep(const Common& c) {
    Run run = resolve(c);
    const qiup::RunConfig& rc = run.rc;
    if (rc.sweep_kind.empty())
        throw qiup::config_error(run.config_path + ": the sweep command needs a [sweep] block");

    qiup::SweepTable table;
    if (rc.sweep_kind == "thickness") {
        if (rc.pump.kind != qiup::PumpProfile::Kind::Gaussian)
            throw qiup::config_error(run.config_path +
                                     ": the thickness sweep needs a gaussian pump (a wide "
                                     "sigma_p serves as the plane-wave surrogate)");
        table = qiup::sweep_thickness(rc.optical, rc.pump, rc.sweep_values, rc.quadrature,
                                      rc.search);
    } else if (rc.sweep_kind == "pump-width") {
        if (rc.optical.L_a != rc.optical.L_b)
            throw qiup::config_error(run.config_path +
                                     ": the pump-width sweep needs optical.L (equal thicknesses)");
        table = qiup::sweep_pump_width(rc.optical, rc.optical.L_a, rc.sweep_values, rc.quadrature,
                                       rc.search);
    } else {
        if (rc.pump.kind != qiup::PumpProfile::Kind::Gaussian)
            throw qiup::config_error(run.config_path +
                                     ": the wavelengths sweep needs a gaussian pump");
        if (rc.optical.L_a != rc.optical.L_b)
            throw qiup::config_error(run.config_path +
                                     ": the wavelengths sweep needs optical.L (equal thicknesses)");
        table = qiup::sweep_wavelengths(rc.lambda_s_values, rc.lambda_i_values, rc.optical.L_a,
                                        rc.pump.sigma_p, rc.quadrature, rc.search);
    }

    std::size_t failed = 0;
    for (std::size_t i = 0; i < table.points.size(); ++i) {
        const qiup::SweepPoint& p = table.points[i];
        if (p.status == "ok") continue;
        ++failed;
        std::cerr << "warning: sweep point " << i << " failed: " << p.status << "\n";
    }
    if (failed == table.points.size())
        throw qiup::bracket_error("all " + std::to_string(failed) + " sweep points failed; first: " +
                                  table.points.front().status);

    std::vector<std::string> outputs;
    if (run.want_csv) {
        emit(run.out / "sweep.csv", qiup::sweep_csv(table));
        outputs.push_back("sweep.csv");
    }
    if (run.want_json) {
        json m = manifest("sweep", run, outputs);
        m["diagnostics"] = {{"kind", rc.sweep_kind},
                            {"points", table.points.size()},
                            {"failed_points", failed}};
        emit(run.out / "sweep.json", m.dump(2) + "\n");
    }
}

void write_error_json(const std::string& type, const std::string& message,
                      const double* achieved_tol) {
    if (g_error_dir.empty()) return;
    json e = {{"tool", "qiup"},
              {"version", qiup::version_string},
              {"error", type},
              {"message", message}};
    if (achieved_tol) e["achieved_tol"] = *achieved_tol;
    try {
        qiup::write_file(fs::path(g_error_dir) / "error.json", e.dump(2) + "\n");
    } catch (const std::exception&) {
        // the error report is best-effort; the exit code already signals failure
    }
}

}

int main(int argc, char** argv) {
    CLI::App app{"quantum imaging with undetected photons: non-paraxial simulator"};
    app.require_subcommand(1);

    Common c_map, c_image, c_psf, c_dmin, c_sweep;
    std::string image_d;
    bool image_single = false, image_oracle = false;

    CLI::App* sub_map = app.add_subcommand("state-map", "joint angular probability map");
    add_common(sub_map, c_map);

    CLI::App* sub_image = app.add_subcommand("image", "camera-plane image of the object");
    add_common(sub_image, c_image);
    CLI::Option* opt_d =
        sub_image->add_option("--d", image_d, "override: double slit separation, e.g. 4.5um");
    CLI::Option* opt_single =
        sub_image->add_flag("--single-slit", image_single, "override: single-slit object");
    opt_d->excludes(opt_single);
    sub_image->add_flag("--direct-oracle", image_oracle,
                        "also integrate the full two-plane form on a 33-point axis and compare");

    CLI::App* sub_psf = app.add_subcommand("psf", "single-slit point spread function");
    add_common(sub_psf, c_psf);

    CLI::App* sub_dmin = app.add_subcommand("dmin", "minimum resolvable slit separation");
    add_common(sub_dmin, c_dmin);

    CLI::App* sub_sweep = app.add_subcommand("sweep", "resolution sweep from the [sweep] block");
    add_common(sub_sweep, c_sweep);

    try {
        app.parse(argc, argv);
        if (sub_map->parsed()) cmd_state_map(c_map);
        if (sub_image->parsed()) cmd_image(c_image, image_d, image_single, image_oracle);
        if (sub_psf->parsed()) cmd_psf(c_psf);
        if (sub_dmin->parsed()) cmd_dmin(c_dmin);
        if (sub_sweep->parsed()) cmd_sweep(c_sweep);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const qiup::quadrature_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        write_error_json("quadrature", e.what(), &e.achieved_tol);
        return 3;
    } catch (const qiup::window_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        write_error_json("window", e.what(), nullptr);
        return 3;
    } catch (const qiup::bracket_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        write_error_json("bracket", e.what(), nullptr);
        return 4;
    } catch (const qiup::config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::logic_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
