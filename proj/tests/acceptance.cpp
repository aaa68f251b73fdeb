// Acceptance suite: one line per criterion, exit status 0 only when every requested criterion passes.
//   ringsim_acceptance [N ...] [--cli PATH] [--configs DIR]
#include "ringsim/cli.hpp"
#include "ringsim/mdm.hpp"
#include "ringsim/network231.hpp"
#include "ringsim/optics.hpp"
#include "ringsim/rng.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

using namespace ringsim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Context {
    std::string cli;
    fs::path configs;
};

std::string f(const char* fmt, double v)
{
    char b[64];
    std::snprintf(b, sizeof b, fmt, v);
    return b;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Same derivation the CLI uses for device i under root seed 1.
struct DeviceSeeds {
    std::uint64_t device, osa, instrument;
};

DeviceSeeds device_seeds(std::uint64_t root, std::uint64_t i)
{
    const auto noise = substream_seed(root, "noise");
    return {derive_seed(substream_seed(root, "device-gen"), i), derive_seed(noise, 2 * i), derive_seed(noise, 2 * i + 1)};
}

std::vector<double> true_positions(const HiddenPlant& p, const CalibrationModel& m, const DriveState& d)
{
    const DriveState hd = p.device.thermal.from_absolute(m.absolute(d));
    const auto pos = p.device.ring_positions(hd);
    std::vector<double> out;
    for (int ch : m.channel_order) out.push_back(pos[static_cast<std::size_t>(p.device.thermal.channel_index(ch))]);
    return out;
}

RingModel true_ring(const HiddenPlant& p, int channel)
{
    for (const FilterBank* b : p.device.banks())
        for (std::size_t i = 0; i < b->rings.size(); ++i)
            if (b->channels[i] == channel) return b->rings[i];
    throw std::out_of_range("no ring on channel " + std::to_string(channel));
}

Outcome c1_basic(const Context&)
{
    const auto t0 = std::chrono::steady_clock::now();
    int ok = 0;
    std::string fails;
    for (std::uint64_t i = 0; i < 50; ++i) {
        const auto s = device_seeds(1, i);
        try {
            const auto plant = make_basic_device(BasicDeviceParams{}, s.device);
            OsaConfig osa;
            osa.rng_seed = s.osa;
            const auto r = run_basic_calibration(plant, osa, s.instrument);
            if (validate_basic(r.model, plant).pass())
                ++ok;
            else
                fails += " " + std::to_string(i);
        } catch (const std::exception& e) {
            fails += " " + std::to_string(i) + "(" + e.what() + ")";
        }
    }
    const double t = seconds_since(t0);
    return {ok >= 48 && t < 30.0, std::to_string(ok) + "/50 seeds pass all four gates, " + f("%.1f", t) + " s" +
                                      (fails.empty() ? "" : ", failed:" + fails)};
}

Outcome c2_cascaded(const Context&)
{
    int gates = 0, conv = 0;
    double worst_k_off = 0.0, worst_k_diag = 0.0, worst_lam = 0.0;
    for (std::uint64_t i = 0; i < 20; ++i) {
        const auto s = device_seeds(1, i);
        try {
            const auto plant = make_cascaded_device(CascadedDeviceParams{}, s.device);
            OsaConfig osa;
            osa.rng_seed = s.osa;
            const auto r = run_cascaded_calibration(plant, osa, s.instrument);
            const auto g = validate_cascaded(r, plant);
            gates += g.pass();
            conv += r.converged && r.passes_used <= 2;
            worst_k_off = std::max(worst_k_off, g.k_off_err);
            worst_k_diag = std::max(worst_k_diag, g.k_diag_err);
            worst_lam = std::max(worst_lam, g.lam_bias_err);
        } catch (const std::exception&) {
        }
    }
    return {gates >= 18 && conv >= 18,
            std::to_string(gates) + "/20 pass gates, " + std::to_string(conv) + "/20 converge in two passes; worst lam " +
                f("%.4f", worst_lam) + " nm, K diag " + f("%.3f", worst_k_diag) + ", K off " + f("%.3f", worst_k_off)};
}

struct CascadedRun {
    HiddenPlant plant;
    CalibrationModel model;
};

std::vector<CascadedRun> cascaded_runs(int n)
{
    std::vector<CascadedRun> out;
    for (int i = 0; i < n; ++i) {
        const auto s = device_seeds(1, static_cast<std::uint64_t>(i));
        auto plant = make_cascaded_device(CascadedDeviceParams{}, s.device);
        OsaConfig osa;
        osa.rng_seed = s.osa;
        auto r = run_cascaded_calibration(plant, osa, s.instrument);
        out.push_back({std::move(plant), std::move(r.model)});
    }
    return out;
}

std::pair<int, int> role_counts(const CalibrationModel& m)
{
    int nd = 0, na = 0;
    for (auto r : m.roles) (r == RingRole::axon ? na : nd)++;
    return {nd, na};
}

Outcome c3_fidelity(const Context&)
{
    int ok = 0;
    double worst_db = 0.0, worst_lam = 0.0;
    try {
        for (const auto& run : cascaded_runs(10)) {
            const auto& m = run.model;
            const auto [nd, na] = role_counts(m);
            const auto d = weights_to_drive(m, std::vector<double>(nd, 0.5), std::vector<double>(na, 0.5));
            const auto pos = true_positions(run.plant, m, d);
            double db = 0.0, lam = 0.0;
            for (std::size_t j = 0; j < m.channel_order.size(); ++j) {
                RingModel r = true_ring(run.plant, m.channel_order[j]);
                r.lam0 = pos[j];
                if (m.roles[j] == RingRole::axon)
                    lam = std::max(lam, std::abs(pos[j] - (m.ring_wl[j] + 0.5)));
                else
                    db = std::max(db, std::abs(10.0 * std::log10(lorentz_thru(r, m.ring_wl[j]) / 0.5)));
            }
            ok += db <= 0.5 && lam <= 0.02;
            worst_db = std::max(worst_db, db);
            worst_lam = std::max(worst_lam, lam);
        }
    } catch (const std::exception& e) {
        return {false, std::string("calibration failed: ") + e.what()};
    }
    return {ok == 10, std::to_string(ok) + "/10 seeds; worst dendrite error " + f("%.3f", worst_db) +
                          " dB, worst axon error " + f("%.4f", worst_lam) + " nm"};
}

Outcome c4_crosstalk(const Context&)
{
    int ok = 0;
    double sum_full = 0.0, sum_diag = 0.0;
    try {
        for (const auto& run : cascaded_runs(20)) {
            const auto& m = run.model;
            const auto [nd, na] = role_counts(m);
            double e_full = 0.0, e_diag = 0.0;
            for (int k = 0; k < 10; ++k) {
                const double det = -0.5 + 0.7 * k / 9.0;
                for (bool full : {true, false}) {
                    const auto d = weights_to_drive(m, std::vector<double>(nd, 0.5), std::vector<double>(na, det), full);
                    const auto p = true_positions(run.plant, m, d);
                    double e = 0.0;
                    for (std::size_t j = 0; j < p.size(); ++j) {
                        const double target = m.roles[j] == RingRole::axon
                                                  ? m.ring_wl[j] + det
                                                  : m.ring_wl[j] + invert_filter_shape(m.filter_shapes[j], 0.5);
                        e += std::abs(p[j] - target);
                    }
                    (full ? e_full : e_diag) += e;
                }
            }
            ok += e_full < e_diag;
            sum_full += e_full;
            sum_diag += e_diag;
        }
    } catch (const std::exception& e) {
        return {false, std::string("calibration failed: ") + e.what()};
    }
    return {ok >= 18, std::to_string(ok) + "/20 seeds full K better; mean total error full " + f("%.4f", sum_full / 20) +
                          " nm vs diagonal " + f("%.4f", sum_diag / 20) + " nm"};
}

Outcome c5_training(const Context&)
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto data = generate_xor(substream_seed(1, "data-gen"));
    TrainingConfig cfg;
    cfg.eta = 0.01;
    cfg.epochs = 20000;
    cfg.stop_accuracy = 0.98;
    double best = 0.0;
    int best_seed = -1, epochs = 0;
    for (int i = 0; i < 5; ++i) {
        cfg.seed = derive_seed(1, static_cast<std::uint64_t>(i));
        try {
            const auto r = train(data, cfg, Activation{});
            if (r.accuracy > best) {
                best = r.accuracy;
                best_seed = i;
                epochs = static_cast<int>(r.curve.size()) - 1;
            }
        } catch (const TrainingDiverged&) {
        }
    }
    const double t = seconds_since(t0);
    return {best >= 0.98 && t < 60.0, "best accuracy " + f("%.4f", best) + " (seed " + std::to_string(best_seed) + ", " +
                                         std::to_string(epochs) + " epochs), " + f("%.1f", t) + " s"};
}

Outcome c6_frozen(const Context&)
{
    const Activation act;
    const auto vp = reference_xor_params();
    const double acc = accuracy(vp, act, generate_xor(substream_seed(1, "data-gen")));
    auto y_at = [&](int i, int j) { return forward(vp, act, Eigen::Vector2d(0.8 * i / 31.0, 0.8 * j / 31.0)).y; };
    // Cells 8 and 23 of a 32-point axis over [0, 0.8] sit at the cluster centres 0.2 and 0.6.
    const bool quad = y_at(8, 8) > 0 && y_at(23, 23) > 0 && y_at(8, 23) < 0 && y_at(23, 8) < 0;
    return {acc >= 0.98 && quad, "accuracy " + f("%.4f", acc) + " (need 0.98), quadrant signs " +
                                     (quad ? "match" : "do not match")};
}

Outcome c7_physical(const Context&)
{
    const auto cfg = reference_network_config();
    const auto vp = reference_network_params();
    const auto pp = virtual_to_physical(vp, cfg.circuit);
    const double w31[3] = {-0.30836081, 0.83321868, -0.66768272};
    double werr = std::abs(pp.w23(0, 0) - 0.5782645);
    for (int k = 0; k < 3; ++k) werr = std::max(werr, std::abs(pp.w31[k] - w31[k]));
    const auto net = make_network231(cfg);
    const auto st = simulate_network(net, pp, weights_to_network_drive(net, pp), reference_input_drive());
    const double herr = (st.hidden_current - reference_hidden_target()).cwiseAbs().maxCoeff();
    return {werr <= 1e-6 && herr <= 0.05, "weight error " + f("%.2e", werr) + ", hidden current error " +
                                              f("%.4f", herr) + " mA"};
}

Outcome c8_gradients(const Context&)
{
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> ux(-2.0, 3.0), uin(0.0, 0.8);
    const Activation act;
    int bad_act = 0, bad_upd = 0;
    for (int k = 0; k < 100; ++k) {
        const double x = ux(gen), h = 1e-5;
        const double fd = (activation_f(act, x + h) - activation_f(act, x - h)) / (2 * h);
        if (std::abs(activation_df(act, x) - fd) > 1e-3 * std::max(std::abs(fd), 1e-6)) ++bad_act;
    }
    auto flat = [](const VirtualParams& v) {
        std::vector<double> o(v.W0.data(), v.W0.data() + 6);
        o.insert(o.end(), v.B0.data(), v.B0.data() + 3);
        o.insert(o.end(), v.W1.data(), v.W1.data() + 3);
        o.push_back(v.B1);
        return o;
    };
    auto unflat = [](const std::vector<double>& o) {
        VirtualParams v;
        std::copy(o.begin(), o.begin() + 6, v.W0.data());
        std::copy(o.begin() + 6, o.begin() + 9, v.B0.data());
        std::copy(o.begin() + 9, o.begin() + 12, v.W1.data());
        v.B1 = o[12];
        return v;
    };
    for (int k = 0; k < 100; ++k) {
        const auto vp = random_params(derive_seed(88, static_cast<std::uint64_t>(k)));
        const Eigen::Vector2d x(uin(gen), uin(gen));
        const int d = k % 2 ? 1 : -1;
        const auto dir = flat(update_direction(vp, act, x, d, CostMode::squared_error));
        const auto p = flat(vp);
        std::vector<double> fd(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double h = 1e-6 * std::max(1.0, std::abs(p[i]));
            auto a = p, b = p;
            a[i] += h;
            b[i] -= h;
            fd[i] = -(sample_cost(unflat(a), act, x, d, CostMode::squared_error) -
                      sample_cost(unflat(b), act, x, d, CostMode::squared_error)) /
                    (2 * h);
        }
        for (auto [lo, hi] : {std::pair{0, 6}, std::pair{6, 9}, std::pair{9, 12}, std::pair{12, 13}}) {
            double num = 0, den = 0;
            for (int i = lo; i < hi; ++i) {
                num += (dir[i] - fd[i]) * (dir[i] - fd[i]);
                den += fd[i] * fd[i];
            }
            if (std::sqrt(num) > 1e-3 * std::max(std::sqrt(den), 1e-9)) ++bad_upd;
        }
    }
    return {bad_act == 0 && bad_upd == 0, std::to_string(100 - bad_act) + "/100 activation points, " +
                                              std::to_string(400 - bad_upd) + "/400 parameter blocks agree"};
}

Outcome c9_physics(const Context&)
{
    double cons = 0.0;
    for (double r : {0.5, 0.9, 0.99})
        for (int k = 0; k <= 1000; ++k) {
            const RingPhysical ring{r, 2.0, 775000.0, 1000};
            const double lam = 1548.0 + 0.004 * k;
            cons = std::max(cons, std::abs(exact_thru_transmission(ring, lam) + exact_drop_transmission(ring, lam) - 1.0));
        }
    double lor = 0.0;
    for (double r : {0.9, 0.95, 0.99}) {
        const RingPhysical ring{r, 2.0, 775000.0, 1000};
        const double g = gamma_from_physical(ring);
        const RingModel m{ring.resonance(), g, 1.0};
        for (int k = 0; k <= 400; ++k) {
            const double lam = ring.resonance() - 2 * g + g * k / 100.0;
            const double ex = exact_drop_transmission(ring, lam);
            lor = std::max(lor, std::abs(lorentz_drop(m, lam) - ex) / ex);
        }
    }
    int argmax = 0;
    double best = -1.0;
    for (int k = 0; k <= 100; ++k) {
        const double er = extinction_ratio(interferometer_spectrum({0.01 * k, 1.2e6}, {1540.0, 1560.0}, 0.01));
        if (er > best + 1e-9) {
            best = er;
            argmax = k;
        }
    }
    std::mt19937_64 gen(9);
    std::normal_distribution<double> n(0.0, 1.0);
    double rt = 0.0;
    for (int t = 0; t < 20; ++t) {
        ComplexMatrix G(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) G(i, j) = {n(gen), n(gen)};
        const ComplexMatrix Q = Eigen::HouseholderQR<ComplexMatrix>(G).householderQ();
        ComplexVector v(4);
        for (int i = 0; i < 4; ++i) v[i] = {n(gen), n(gen)};
        rt = std::max(rt, (Q * compensate_mixing(Q, v) - v).cwiseAbs().maxCoeff());
    }
    const bool ok = cons <= 1e-12 && lor <= 0.05 && argmax == 50 && rt <= 1e-9;
    return {ok, "thru+drop " + f("%.1e", cons) + ", Lorentzian " + f("%.2f", 100 * lor) + "%, ER argmax alpha " +
                    f("%.2f", 0.01 * argmax) + ", mixing round trip " + f("%.1e", rt)};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome c10_determinism(const Context& ctx)
{
    if (ctx.cli.empty()) return {false, "no --cli binary given"};
    const std::pair<const char*, const char*> runs[] = {{"calibrate-basic", "calibrate_basic.yaml"},
                                                        {"calibrate-cascaded", "calibrate_cascaded.yaml"},
                                                        {"train-xor", "train_xor.yaml"},
                                                        {"sweep-231", "sweep_231.yaml"},
                                                        {"mdm-report", "mdm_report.yaml"}};
    const fs::path root = fs::temp_directory_path() / "ringsim_acceptance_10";
    fs::remove_all(root);
    int identical = 0, compared = 0;
    std::string problems;
    for (const auto& [cmd, cfg] : runs) {
        std::vector<fs::path> outs;
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path out = root / (std::string(cmd) + "_" + std::to_string(rep));
            const std::string line = "\"" + ctx.cli + "\" " + cmd + " -c \"" + (ctx.configs / cfg).string() + "\" -o \"" +
                                     out.string() + "\" -q > /dev/null 2>&1";
            const int rc = std::system(line.c_str());
            if (rc != 0) problems += std::string(" ") + cmd + "(exit " + std::to_string(rc) + ")";
            outs.push_back(out);
        }
        if (!fs::exists(outs[0])) continue;
        for (const auto& e : fs::recursive_directory_iterator(outs[0])) {
            if (e.path().extension() != ".csv") continue;
            const auto rel = fs::relative(e.path(), outs[0]);
            ++compared;
            if (slurp(e.path()) == slurp(outs[1] / rel))
                ++identical;
            else
                problems += " " + std::string(cmd) + "/" + rel.string();
        }
    }
    fs::remove_all(root);
    return {compared > 0 && identical == compared && problems.empty(),
            std::to_string(identical) + "/" + std::to_string(compared) + " CSVs byte-identical across reruns" +
                (problems.empty() ? "" : "; problems:" + problems)};
}

struct Criterion {
    const char* name;
    std::function<Outcome(const Context&)> run;
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"ringsim acceptance suite"};
    std::vector<int> which;
    Context ctx;
    std::string configs = "configs";
    app.add_option("criteria", which, "criterion numbers 1-10 (default: all)")->check(CLI::Range(1, 10));
    app.add_option("--cli", ctx.cli, "path to the ringsim binary");
    app.add_option("--configs", configs, "reference config directory");
    CLI11_PARSE(app, argc, argv);
    ctx.configs = configs;

    const Criterion all[] = {{"basic calibration", c1_basic},
                             {"cascaded calibration", c2_cascaded},
                             {"requested transmission", c3_fidelity},
                             {"crosstalk benefit", c4_crosstalk},
                             {"XOR training", c5_training},
                             {"frozen parameters", c6_frozen},
                             {"physical conversion", c7_physical},
                             {"gradients", c8_gradients},
                             {"physics identities", c9_physics},
                             {"determinism", c10_determinism}};
    if (which.empty())
        for (int i = 1; i <= 10; ++i) which.push_back(i);

    bool all_pass = true;
    for (int n : which) {
        const auto& c = all[n - 1];
        Outcome o;
        try {
            o = c.run(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        std::cout << "criterion " << n << " [" << c.name << "]: " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail << ")"
                  << std::endl;
        all_pass = all_pass && o.pass;
    }
    return all_pass ? 0 : 1;
}
