#include "ringsim/cli.hpp"

#include "ringsim/network231.hpp"
#include "ringsim/rng.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

namespace ringsim {

using nlohmann::json;

namespace {

struct Ctx {
    const ExperimentConfig& cfg;
    std::uint64_t seed;
    ArtifactWriter& out;
    std::ostream* log; // null when quiet
    bool svg;
    json summary = json::object();
};

void say(Ctx& c, const std::string& line)
{
    if (c.log) *c.log << line << '\n';
}

std::string fixed(double v, int digits)
{
    std::ostringstream o;
    o.setf(std::ios::fixed);
    o.precision(digits);
    o << v;
    return o.str();
}

std::string csv_text(std::string s)
{
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

std::string indexed(const std::string& stem, std::size_t i, const std::string& ext)
{
    std::ostringstream o;
    o << stem << '_';
    o.width(3);
    o.fill('0');
    o << i << ext;
    return o.str();
}

Window cover(Window def, const std::vector<double>& wl, double below, double above)
{
    const auto [lo, hi] = std::minmax_element(wl.begin(), wl.end());
    if (*lo - below >= def.low && *hi + above <= def.high) return def;
    return {std::min(def.low, *lo - below), std::max(def.high, *hi + above)};
}

struct DeviceSeeds {
    std::uint64_t device, osa, instrument;
};

DeviceSeeds seeds_for(std::uint64_t root, std::size_t i)
{
    const auto noise = substream_seed(root, "noise");
    return {derive_seed(substream_seed(root, "device-gen"), i), derive_seed(noise, 2 * i), derive_seed(noise, 2 * i + 1)};
}

int calibrate_basic(Ctx& c)
{
    const auto& cfg = c.cfg;
    BasicCalibrationOptions opt;
    opt.track = cfg.controller;
    opt.window = cover(opt.window, cfg.basic.wl_channels, 20.0, 3.0);

    CsvTable report{{"device", "status", "ascription", "heat_bias_err_mW", "lam_bias_err_nm", "k_rel_err_pct",
                     "track_iterations", "measurements", "gates_passed"},
                    {}};
    CsvTable conv{{"device", "iteration", "max_error_nm"}, {}};
    int passed = 0, failed_gate = 0, nonconv = 0;
    for (int i = 0; i < cfg.device_count; ++i) {
        const auto s = seeds_for(c.seed, static_cast<std::size_t>(i));
        const HiddenPlant plant = make_basic_device(cfg.basic, s.device);
        OsaConfig osa = cfg.osa;
        osa.rng_seed = s.osa;
        try {
            const auto r = run_basic_calibration(plant, osa, s.instrument, opt);
            const auto g = validate_basic(r.model, plant);
            const bool ok = g.pass();
            (ok ? passed : failed_gate)++;
            report.rows.push_back({std::to_string(i), ok ? "ok" : "gate-failure", g.ascription ? "1" : "0",
                                   fmt_num(g.heat_bias_err), fmt_num(g.lam_bias_err), fmt_num(g.k_rel_err_pct),
                                   std::to_string(r.track.iterations), std::to_string(r.measurements), ok ? "4" : ""});
            if (!ok) {
                int n = 0;
                n += g.ascription;
                n += g.heat_bias_err <= 0.01;
                n += g.lam_bias_err <= 0.01;
                n += g.k_rel_err_pct <= 10.0;
                report.rows.back().back() = std::to_string(n);
            }
            for (std::size_t k = 0; k < r.track.error_history.size(); ++k)
                conv.add({static_cast<double>(i), static_cast<double>(k + 1), r.track.error_history[k]});
            c.out.write(indexed("models/device", static_cast<std::size_t>(i), ".json"), r.model.to_json().dump(2) + "\n");
            say(c, "device " + std::to_string(i) + ": " + (ok ? "gates passed" : "GATE FAILURE") + " (ascription " +
                       (g.ascription ? "exact" : "wrong") + ", heat " + fixed(g.heat_bias_err, 4) + " mW, lambda " +
                       fixed(g.lam_bias_err, 4) + " nm, K " + fixed(g.k_rel_err_pct, 2) + "%)");
        } catch (const std::exception& e) {
            ++nonconv;
            report.rows.push_back({std::to_string(i), "no-convergence: " + csv_text(e.what()), "", "", "", "", "", "", "0"});
            say(c, "device " + std::to_string(i) + ": did not converge: " + e.what());
        }
    }
    c.out.csv("report.csv", report);
    c.out.csv("convergence.csv", conv);
    if (c.svg && !conv.rows.empty()) {
        std::vector<Series> ser;
        std::vector<double> x;
        const auto dev = conv.column("device");
        const auto it = conv.column("iteration");
        const auto err = conv.column("max_error_nm");
        std::size_t longest = 0;
        for (double v : it) longest = std::max(longest, static_cast<std::size_t>(v));
        for (std::size_t k = 1; k <= longest; ++k) x.push_back(static_cast<double>(k));
        for (int i = 0; i < std::min(cfg.device_count, 6); ++i) {
            Series s{"device " + std::to_string(i), std::vector<double>(longest, std::nan(""))};
            for (std::size_t r = 0; r < dev.size(); ++r)
                if (static_cast<int>(dev[r]) == i) s.y[static_cast<std::size_t>(it[r]) - 1] = std::log10(err[r]);
            ser.push_back(std::move(s));
        }
        c.out.write("convergence.svg", svg_line_chart("Bias tracking: log10 max error (nm)", "iteration", x, ser));
    }
    c.summary["devices"] = cfg.device_count;
    c.summary["passed"] = passed;
    c.summary["gate_failures"] = failed_gate;
    c.summary["non_converged"] = nonconv;
    say(c, "validation gates passed on " + std::to_string(passed) + "/" + std::to_string(cfg.device_count) + " devices");
    if (nonconv) return exit_nonconvergence;
    return failed_gate ? exit_gate : exit_ok;
}

int calibrate_cascaded(Ctx& c)
{
    const auto& cfg = c.cfg;
    CascadedCalibrationOptions opt;
    opt.track = cfg.controller;
    opt.merge = cfg.merge;
    opt.window = cover(opt.window, cfg.cascaded.wl_channels, 5.0, 6.0);

    CsvTable report{{"device", "status", "ascription", "heat_bias_err_mW", "lam_bias_err_nm", "atten_err_pct",
                     "k_diag_err", "k_off_err", "passes", "converged", "measurements"},
                    {}};
    CsvTable merges{{"device", "pass", "pair", "phase1_iterations", "phase2_iterations", "trim_iterations", "converged",
                     "reason", "final_fwhm_nm", "final_center_nm"},
                    {}};
    int passed = 0, failed_gate = 0, nonconv = 0;
    const std::size_t n = cfg.cascaded.wl_channels.size();
    for (int i = 0; i < cfg.device_count; ++i) {
        const auto s = seeds_for(c.seed, static_cast<std::size_t>(i));
        const HiddenPlant plant = make_cascaded_device(cfg.cascaded, s.device);
        OsaConfig osa = cfg.osa;
        osa.rng_seed = s.osa;
        try {
            const auto r = run_cascaded_calibration(plant, osa, s.instrument, opt);
            const auto g = validate_cascaded(r, plant);
            const bool ok = g.pass() && r.converged;
            if (!r.converged)
                ++nonconv;
            else
                (ok ? passed : failed_gate)++;
            report.rows.push_back({std::to_string(i), ok ? "ok" : (r.converged ? "gate-failure" : "no-convergence"),
                                   g.ascription ? "1" : "0", fmt_num(g.heat_bias_err), fmt_num(g.lam_bias_err),
                                   fmt_num(g.atten_err_pct), fmt_num(g.k_diag_err), fmt_num(g.k_off_err),
                                   std::to_string(r.passes_used), r.converged ? "1" : "0",
                                   std::to_string(r.measurements)});
            for (std::size_t k = 0; k < r.merges.size(); ++k) {
                const auto& m = r.merges[k];
                merges.rows.push_back({std::to_string(i), std::to_string(k / n), std::to_string(k % n),
                                       std::to_string(m.phase1_iterations), std::to_string(m.phase2_iterations),
                                       std::to_string(m.trim_iterations), m.converged ? "1" : "0", m.reason,
                                       fmt_num(m.final_fwhm), fmt_num(m.final_center)});
            }
            c.out.write(indexed("models/device", static_cast<std::size_t>(i), ".json"), r.model.to_json().dump(2) + "\n");
            say(c, "device " + std::to_string(i) + ": " + (ok ? "gates passed" : "GATE FAILURE") + " (passes " +
                       std::to_string(r.passes_used) + ", heat " + fixed(g.heat_bias_err, 4) + " mW, lambda " +
                       fixed(g.lam_bias_err, 4) + " nm, atten " + fixed(g.atten_err_pct, 2) + "%, K diag " +
                       fixed(g.k_diag_err, 3) + ", K off " + fixed(g.k_off_err, 3) + ")");
        } catch (const std::exception& e) {
            ++nonconv;
            report.rows.push_back(
                {std::to_string(i), "no-convergence: " + csv_text(e.what()), "", "", "", "", "", "", "", "0", ""});
            say(c, "device " + std::to_string(i) + ": did not converge: " + e.what());
        }
    }
    c.out.csv("report.csv", report);
    c.out.csv("merges.csv", merges);
    c.summary["devices"] = cfg.device_count;
    c.summary["passed"] = passed;
    c.summary["gate_failures"] = failed_gate;
    c.summary["non_converged"] = nonconv;
    say(c, "validation gates passed on " + std::to_string(passed) + "/" + std::to_string(cfg.device_count) + " devices");
    if (nonconv) return exit_nonconvergence;
    return failed_gate ? exit_gate : exit_ok;
}

std::vector<double> grid_axis(int n, double hi)
{
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = hi * i / (n - 1);
    return g;
}

int train_xor(Ctx& c)
{
    const auto& t = c.cfg.training;
    const XorData data = generate_xor(substream_seed(c.seed, "data-gen"), t.per_cluster);
    CsvTable dcsv{{"x1", "x2", "label"}, {}};
    for (std::size_t i = 0; i < data.x.size(); ++i)
        dcsv.add({data.x[i][0], data.x[i][1], static_cast<double>(data.label[i])});
    c.out.csv("data.csv", dcsv);

    CsvTable runs{{"run", "status", "epochs", "accuracy"}, {}};
    std::optional<TrainingResult> best;
    int best_run = -1;
    for (int i = 0; i < t.seeds; ++i) {
        TrainingConfig tc = t.run;
        tc.seed = derive_seed(c.seed, static_cast<std::uint64_t>(i));
        TrainingResult r;
        std::string status = "ok";
        try {
            r = train(data, tc, t.act);
        } catch (const TrainingDiverged& e) {
            r = e.partial();
            status = "diverged";
        }
        runs.rows.push_back({std::to_string(i), status, std::to_string(r.curve.size() - 1), fmt_num(r.accuracy)});
        say(c, "run " + std::to_string(i) + ": " + status + ", " + std::to_string(r.curve.size() - 1) +
                   " epochs, accuracy " + fixed(r.accuracy, 4));
        if (status == "ok" && (!best || r.accuracy > best->accuracy)) {
            best = std::move(r);
            best_run = i;
        }
    }
    c.out.csv("runs.csv", runs);
    if (!best) {
        c.summary["accuracy"] = nullptr;
        say(c, "all training runs diverged");
        return exit_nonconvergence;
    }

    CsvTable curve{{"epoch", "mean_cost", "class_error"}, {}};
    for (const auto& e : best->curve) curve.add({static_cast<double>(e.epoch), e.cost, e.error_rate});
    c.out.csv("learning_curve.csv", curve);
    c.out.write("params.json", best->params.to_json().dump(2) + "\n");

    const auto axis = grid_axis(t.surface_n, 0.8);
    CsvTable surf{{"x1", "x2", "y", "sign"}, {}};
    std::vector<std::vector<double>> z(axis.size(), std::vector<double>(axis.size()));
    for (std::size_t i = 0; i < axis.size(); ++i)
        for (std::size_t j = 0; j < axis.size(); ++j) {
            const double y = forward(best->params, t.act, {axis[i], axis[j]}).y;
            z[i][j] = y;
            surf.add({axis[i], axis[j], y, y >= 0 ? 1.0 : -1.0});
        }
    c.out.csv("surface.csv", surf);
    c.out.csv("surface_grid.csv", grid_table(axis, axis, z));
    if (c.svg) {
        std::vector<double> ep, cost, err;
        for (const auto& e : best->curve) {
            ep.push_back(e.epoch);
            cost.push_back(e.cost);
            err.push_back(e.error_rate);
        }
        c.out.write("learning_curve.svg", svg_line_chart("Training", "epoch", ep, {{"cost", cost}, {"error rate", err}}));
        c.out.write("surface.svg", svg_heatmap("Network output y(x1, x2)", axis, axis, z));
    }
    c.summary["best_run"] = best_run;
    c.summary["accuracy"] = best->accuracy;
    c.summary["epochs"] = static_cast<int>(best->curve.size()) - 1;
    say(c, "accuracy: " + fixed(best->accuracy, 4));
    if (t.run.stop_accuracy <= 1.0 && best->accuracy < t.run.stop_accuracy) return exit_nonconvergence;
    return exit_ok;
}

int sweep_231(Ctx& c, const VirtualParams& vp)
{
    const auto& s = c.cfg.sweep;
    const Network231 net = make_network231(reference_network_config());
    PhysicalParams pp;
    try {
        pp = virtual_to_physical(vp, net.cfg.circuit);
    } catch (const UnrealizableWeight& e) {
        say(c, std::string("parameters cannot be realized: ") + e.what());
        c.summary["error"] = e.what();
        return exit_gate;
    }
    CsvTable phys{{"name", "value"}, {}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j)
            phys.rows.push_back({"w23_" + std::to_string(i) + std::to_string(j), fmt_num(pp.w23(i, j))});
    for (int i = 0; i < 3; ++i) phys.rows.push_back({"w31_" + std::to_string(i), fmt_num(pp.w31[i])});
    for (int i = 0; i < 3; ++i) phys.rows.push_back({"axon_bias_mA_" + std::to_string(i), fmt_num(pp.axon_bias[i])});
    phys.rows.push_back({"out_bias_V", fmt_num(pp.out_bias)});
    c.out.csv("physical_params.csv", phys);

    const auto drive = weights_to_network_drive(net, pp);
    const auto st = simulate_network(net, pp, drive, reference_input_drive());
    CsvTable hid{{"neuron", "current_mA"}, {}};
    for (int i = 0; i < 3; ++i) hid.add({static_cast<double>(i), st.hidden_current[i]});
    c.out.csv("hidden_currents.csv", hid);

    const auto sw = sweep_network(net, pp, s.sweep_n, s.threads, s.max_drive_mA);
    CsvTable raw{{"drive1_mA", "drive2_mA", "x1", "x2", "y"}, {}};
    for (std::size_t i = 0; i < sw.drive_mA.size(); ++i)
        for (std::size_t j = 0; j < sw.drive_mA.size(); ++j)
            raw.add({sw.drive_mA[i], sw.drive_mA[j], sw.x0_axis[0][i], sw.x0_axis[1][j],
                     sw.raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
    c.out.csv("sweep_raw.csv", raw);
    CsvTable surf{{"x1", "x2", "y", "sign"}, {}};
    std::vector<std::vector<double>> z(sw.grid.size(), std::vector<double>(sw.grid.size()));
    for (std::size_t i = 0; i < sw.grid.size(); ++i)
        for (std::size_t j = 0; j < sw.grid.size(); ++j) {
            const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
            z[i][j] = sw.surface(a, b);
            surf.add({sw.grid[i], sw.grid[j], sw.surface(a, b), static_cast<double>(sw.sign(a, b))});
        }
    c.out.csv("surface.csv", surf);
    c.out.csv("surface_grid.csv", grid_table(sw.grid, sw.grid, z));
    if (c.svg) c.out.write("surface.svg", svg_heatmap("Simulated network output", sw.grid, sw.grid, z));
    c.summary["hidden_current_mA"] = {st.hidden_current[0], st.hidden_current[1], st.hidden_current[2]};
    say(c, "hidden currents at drive [0.1, 0.1] mA: " + fixed(st.hidden_current[0], 4) + " " +
               fixed(st.hidden_current[1], 4) + " " + fixed(st.hidden_current[2], 4) + " mA");
    say(c, "swept " + std::to_string(s.sweep_n) + "x" + std::to_string(s.sweep_n) + " input drives");
    return exit_ok;
}

int mdm_report(Ctx& c)
{
    const auto& m = c.cfg.mdm;
    std::vector<SweepEntry> entries;
    if (!m.sweep_dir.empty()) {
        entries = read_sweep_directory(c.cfg.resolve(m.sweep_dir));
    } else {
        const auto noise = substream_seed(c.seed, "noise");
        for (std::size_t i = 0; i < m.synthetic.size(); ++i) {
            const auto& sc = m.synthetic[i];
            SweepEntry e;
            e.width = sc.width;
            e.length = sc.length;
            e.spectrum = interferometer_spectrum({sc.alpha, m.dL}, m.window, m.spacing, 1.0, m.noise_db, derive_seed(noise, i));
            CsvTable sp{{"nm", "dBm"}, {}};
            for (std::size_t k = 0; k < e.spectrum->size(); ++k) sp.add({e.spectrum->wavelength(k), e.spectrum->power[k]});
            c.out.csv("spectra/" + fmt_num(sc.width) + "_" + fmt_num(sc.length) + ".csv", sp);
            entries.push_back(std::move(e));
        }
    }
    const auto rows = coupling_report(entries);
    CsvTable rep{{"rank", "width", "length", "status", "er_db", "alpha_low", "alpha_high", "error"}, {}};
    int ok = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        ok += r.ok;
        rep.rows.push_back({std::to_string(i + 1), fmt_num(r.width), fmt_num(r.length), r.ok ? "ok" : "fit-failed",
                            r.ok ? fmt_num(r.er_db) : "", r.ok ? fmt_num(r.alpha_low) : "",
                            r.ok ? fmt_num(r.alpha_high) : "", csv_text(r.error)});
        say(c, std::to_string(i + 1) + ". width " + fmt_num(r.width) + " length " + fmt_num(r.length) + ": " +
                   (r.ok ? "ER " + fixed(r.er_db, 3) + " dB, alpha " + fixed(r.alpha_low, 4) + " / " +
                               fixed(r.alpha_high, 4)
                         : "fit failed: " + r.error));
    }
    c.out.csv("coupling_report.csv", rep);
    if (c.svg && ok > 0) {
        std::vector<double> x, er;
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i].ok) {
                x.push_back(static_cast<double>(i + 1));
                er.push_back(rows[i].er_db);
            }
        c.out.write("coupling_report.svg", svg_line_chart("Extinction ratio by rank", "rank", x, {{"ER (dB)", er}}));
    }
    c.summary["rows"] = rows.size();
    c.summary["fitted"] = ok;
    return exit_ok;
}

} // namespace

const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names{"calibrate-basic", "calibrate-cascaded", "train-xor", "sweep-231",
                                                "mdm-report"};
    return names;
}

int run_command(const RunOptions& opt, std::ostream& log, std::ostream& err)
{
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), opt.command) == names.end()) {
        err << "unknown command '" << opt.command << "'\n";
        return exit_config;
    }
    if (opt.format != "csv" && opt.format != "svg") {
        err << "format must be csv or svg\n";
        return exit_config;
    }

    ExperimentConfig cfg;
    std::uint64_t seed = 0;
    VirtualParams vp;
    std::string config_bytes;
    try {
        cfg = load_config(opt.config);
        seed = effective_seed(cfg, opt.seed);
        if (opt.command == "calibrate-basic" && cfg.device != DeviceKind::basic)
            throw ConfigError("calibrate-basic needs a device section of kind 'basic'");
        if (opt.command == "calibrate-cascaded" && cfg.device != DeviceKind::cascaded)
            throw ConfigError("calibrate-cascaded needs a device section of kind 'cascaded'");
        if (opt.command == "sweep-231") {
            if (cfg.sweep.params == "reference") {
                vp = reference_network_params();
            } else {
                const auto path = cfg.resolve(cfg.sweep.params);
                std::ifstream in(path);
                if (!in) throw ConfigError("cannot read sweep.params " + path.string());
                try {
                    vp = VirtualParams::from_json(json::parse(in));
                } catch (const std::exception& e) {
                    throw ConfigError("sweep.params " + path.string() + ": " + e.what());
                }
            }
        }
        if (opt.command == "mdm-report") {
            if (cfg.mdm.sweep_dir.empty() && cfg.mdm.synthetic.empty())
                throw ConfigError("mdm-report needs mdm.sweep_dir or mdm.synthetic");
            if (!cfg.mdm.sweep_dir.empty() && !std::filesystem::is_directory(cfg.resolve(cfg.mdm.sweep_dir)))
                throw ConfigError("mdm.sweep_dir is not a directory: " + cfg.resolve(cfg.mdm.sweep_dir).string());
        }
        std::ifstream in(opt.config, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        config_bytes = ss.str();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return exit_config;
    }

    ArtifactWriter out(opt.out);
    Ctx c{cfg, seed, out, opt.quiet ? nullptr : &log, opt.format == "svg"};
    json resolved = config_to_json(cfg);
    resolved["seed"] = seed;
    out.write("config.resolved.json", resolved.dump(2) + "\n");

    int code = exit_ok;
    try {
        if (opt.command == "calibrate-basic")
            code = calibrate_basic(c);
        else if (opt.command == "calibrate-cascaded")
            code = calibrate_cascaded(c);
        else if (opt.command == "train-xor")
            code = train_xor(c);
        else if (opt.command == "sweep-231")
            code = sweep_231(c, vp);
        else
            code = mdm_report(c);
    } catch (const NonConvergence& e) {
        err << "did not converge: " << e.what() << '\n';
        c.summary["error"] = e.what();
        code = exit_nonconvergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        c.summary["error"] = e.what();
        code = 1;
    }
    c.summary["command"] = opt.command;
    c.summary["seed"] = seed;
    c.summary["config_sha256"] = sha256_hex(config_bytes);
    c.summary["exit_code"] = code;
    out.finish(c.summary);
    return code;
}

int export_plot(const std::filesystem::path& csv, const std::filesystem::path& out, const std::string& format,
                std::ostream& err)
{
    std::ifstream in(csv, std::ios::binary);
    if (!in) {
        err << "cannot read " << csv.string() << '\n';
        return exit_config;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    CsvTable t;
    try {
        t = CsvTable::parse(ss.str());
    } catch (const std::exception& e) {
        err << csv.string() << ": " << e.what() << '\n';
        return exit_config;
    }
    std::string body;
    if (format == "csv") {
        body = t.str();
    } else if (format == "svg") {
        if (t.header.size() < 2) {
            err << "need at least two columns to plot\n";
            return exit_config;
        }
        std::vector<Series> ser;
        for (std::size_t k = 1; k < t.header.size(); ++k) {
            Series s{t.header[k], t.column(t.header[k])};
            if (std::any_of(s.y.begin(), s.y.end(), [](double v) { return std::isfinite(v); })) ser.push_back(std::move(s));
        }
        body = svg_line_chart(csv.stem().string(), t.header[0], t.column(t.header[0]), ser);
    } else {
        err << "format must be csv or svg\n";
        return exit_config;
    }
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
    std::ofstream o(out, std::ios::binary | std::ios::trunc);
    if (!o) {
        err << "cannot write " << out.string() << '\n';
        return 1;
    }
    o << body;
    return exit_ok;
}

} // namespace ringsim
