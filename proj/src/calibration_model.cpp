#include "ringsim/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ringsim {

namespace {

std::vector<double> lams_of(const std::vector<ResonanceFeature>& f)
{
    std::vector<double> v;
    for (const auto& r : f) v.push_back(r.lam);
    return v;
}

constexpr const char* kModelSchema = "ringsim.calibration/1";

} // namespace

void CalibrationModel::validate() const
{
    const std::size_t n = channel_order.size();
    if (roles.size() != n || ring_wl.size() != n || heat_bias.size() != n || lam_bias.size() != n)
        throw std::invalid_argument("calibration model: per-ring fields disagree in length");
    if (K_est.rows() != static_cast<Eigen::Index>(n) || K_est.cols() != static_cast<Eigen::Index>(n))
        throw std::invalid_argument("calibration model: K_est must be ring x ring");
    if (!filter_shapes.empty() && filter_shapes.size() != n)
        throw std::invalid_argument("calibration model: one filter shape per ring");
}

PowerMap CalibrationModel::absolute(const DriveState& delta) const
{
    if (delta.unit != DriveUnit::mW) throw std::invalid_argument("calibration drives are in mW");
    PowerMap p;
    for (std::size_t j = 0; j < channel_order.size(); ++j) p[channel_order[j]] = heat_bias[j];
    for (const auto& [ch, v] : delta.values) {
        auto it = p.find(ch);
        if (it == p.end()) throw std::out_of_range("drive names a channel outside the model");
        it->second += v;
    }
    return p;
}

nlohmann::json CalibrationModel::to_json() const
{
    nlohmann::json j;
    j["schema"] = kModelSchema;
    j["channel_order"] = channel_order;
    std::vector<std::string> r;
    for (auto x : roles) r.push_back(x == RingRole::axon ? "axon" : "dendrite");
    j["roles"] = r;
    j["ring_wl"] = ring_wl;
    j["heat_bias"] = heat_bias;
    j["lam_bias"] = lam_bias;
    nlohmann::json K = nlohmann::json::array();
    for (Eigen::Index a = 0; a < K_est.rows(); ++a) {
        std::vector<double> row(static_cast<std::size_t>(K_est.cols()));
        for (Eigen::Index b = 0; b < K_est.cols(); ++b) row[static_cast<std::size_t>(b)] = K_est(a, b);
        K.push_back(row);
    }
    j["K_est"] = K;
    nlohmann::json shapes = nlohmann::json::array();
    for (const auto& s : filter_shapes) shapes.push_back({{"rel_nm", s.rel_nm}, {"transmission", s.transmission}});
    j["filter_shapes"] = shapes;
    j["attenuation_est"] = attenuation_est;
    return j;
}

CalibrationModel CalibrationModel::from_json(const nlohmann::json& j)
{
    if (j.value("schema", "") != kModelSchema) throw std::invalid_argument("unsupported calibration model schema");
    CalibrationModel m;
    m.channel_order = j.at("channel_order").get<std::vector<int>>();
    for (const auto& s : j.at("roles").get<std::vector<std::string>>()) {
        if (s == "axon")
            m.roles.push_back(RingRole::axon);
        else if (s == "dendrite")
            m.roles.push_back(RingRole::dendrite);
        else
            throw std::invalid_argument("unknown ring role '" + s + "'");
    }
    m.ring_wl = j.at("ring_wl").get<std::vector<double>>();
    m.heat_bias = j.at("heat_bias").get<std::vector<double>>();
    m.lam_bias = j.at("lam_bias").get<std::vector<double>>();
    const auto rows = j.at("K_est").get<std::vector<std::vector<double>>>();
    m.K_est = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                    rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t a = 0; a < rows.size(); ++a) {
        if (rows[a].size() != rows[0].size()) throw std::invalid_argument("K_est rows differ in length");
        for (std::size_t b = 0; b < rows[a].size(); ++b)
            m.K_est(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = rows[a][b];
    }
    for (const auto& s : j.at("filter_shapes")) {
        FilterShape f;
        f.rel_nm = s.at("rel_nm").get<std::vector<double>>();
        f.transmission = s.at("transmission").get<std::vector<double>>();
        if (f.rel_nm.size() != f.transmission.size() || f.rel_nm.size() < 3)
            throw std::invalid_argument("malformed filter shape");
        m.filter_shapes.push_back(std::move(f));
    }
    m.attenuation_est = j.at("attenuation_est").get<double>();
    m.validate();
    return m;
}

double invert_filter_shape(const FilterShape& shape, double t)
{
    if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("transmission must lie in [0, 1]");
    const auto& T = shape.transmission;
    const auto& x = shape.rel_nm;
    std::size_t i0 = 0;
    for (std::size_t i = 1; i < T.size(); ++i)
        if (T[i] < T[i0]) i0 = i;
    const double tmin = T[i0];
    if (t < tmin - 1e-9) throw std::domain_error("transmission below the filter's on-resonance floor");
    if (t <= tmin) return std::max(0.0, x[i0]);
    const double a = 1.0 - tmin;
    const double level = (1.0 + tmin) / 2.0;
    double gamma = x.back() - x[i0];
    for (std::size_t j = i0 + 1; j < T.size(); ++j)
        if (T[j] >= level) {
            const double u = (level - T[j - 1]) / (T[j] - T[j - 1]);
            gamma = x[j - 1] + u * (x[j] - x[j - 1]);
            break;
        }
    const double cap = 10.0 * gamma; // 5 fwhm
    if (t >= 1.0) return cap;
    for (std::size_t j = i0 + 1; j < T.size(); ++j) {
        if (T[j] >= t) {
            const double u = (t - T[j - 1]) / (T[j] - T[j - 1]);
            return std::max(0.0, x[j - 1] + u * (x[j] - x[j - 1]));
        }
    }
    // Beyond the table: continue with the Lorentzian implied by the table.
    const double d = gamma * std::sqrt(std::max(0.0, a / (1.0 - t) - 1.0));
    return std::clamp(d, x.back(), cap);
}

DriveState weights_to_drive(const CalibrationModel& model, const std::vector<double>& dendrite_transmission,
                            const std::vector<double>& axon_detunes, bool full_K)
{
    model.validate();
    const std::size_t n = model.channel_order.size();
    Eigen::VectorXd shift(static_cast<Eigen::Index>(n));
    std::size_t di = 0, ai = 0;
    for (std::size_t j = 0; j < n; ++j) {
        double target;
        if (model.roles[j] == RingRole::dendrite) {
            if (di >= dendrite_transmission.size()) throw std::invalid_argument("too few dendrite weights");
            if (model.filter_shapes.empty()) throw std::invalid_argument("model has no filter shapes");
            target = model.ring_wl[j] + invert_filter_shape(model.filter_shapes[j], dendrite_transmission[di++]);
        } else {
            if (ai >= axon_detunes.size()) throw std::invalid_argument("too few axon detunes");
            target = model.ring_wl[j] + axon_detunes[ai++];
        }
        shift[static_cast<Eigen::Index>(j)] = target - model.lam_bias[j];
    }
    if (di != dendrite_transmission.size() || ai != axon_detunes.size())
        throw std::invalid_argument("weight/detune counts do not match the model's rings");
    const Eigen::MatrixXd K = full_K ? model.K_est : Eigen::MatrixXd(model.K_est.diagonal().asDiagonal());
    return drive_for_shifts(K, model.channel_order, model.heat_bias, shift);
}

namespace {

void build_background(Instrument& inst, SpectrumAssistant& sa, const AscriptionResult& asc, const PowerMap& base,
                      double detune_fwhms, int avg)
{
    inst.set_power(base);
    const auto fw = sa.resonances(inst, 1);
    const Spectrum base_raw = sa.raw(inst, avg);
    PowerMap displaced = base;
    for (std::size_t j = 0; j < fw.size(); ++j) {
        const int ch = asc.trough_channel[j];
        displaced[ch] += detune_fwhms * fw[j].fwhm / asc.k_diag.at(ch);
    }
    inst.set_power(displaced);
    Spectrum displaced_raw = sa.raw(inst, avg);
    std::vector<ResonanceFeature> fd;
    try {
        fd = sa.resonances(inst, 1);
    } catch (const ResonanceCountError&) {
    }
    inst.set_power(base);
    // Each spectrum still carries the far wings of its own troughs where the other one is used.
    const Spectrum base_clean = remove_trough_wings(base_raw, fw);
    if (!fd.empty()) displaced_raw = remove_trough_wings(displaced_raw, fd);
    sa.background = build_tuned_background(base_clean, displaced_raw);
    sa.tuned = true;
}

} // namespace

BasicCalibrationResult run_basic_calibration(const HiddenPlant& plant, const OsaConfig& osa, std::uint64_t noise_seed,
                                             const BasicCalibrationOptions& opt)
{
    Instrument inst(plant.device, plant.tap, osa, noise_seed);
    SpectrumAssistant sa;
    sa.n_chan = static_cast<int>(plant.wl_channels.size());
    sa.min_separation = opt.min_separation;
    sa.window = opt.window;

    BasicCalibrationResult res;
    res.ascription = ascribe(inst, sa, plant.channels, plant.base_drive, opt.tune_by);
    const auto& order = res.ascription.trough_channel;

    build_background(inst, sa, res.ascription, plant.base_drive, opt.detune_fwhms, opt.bg_avg);
    const double atten = sa.background.attenuation(inst.pump_power());

    res.track = track_to_bias(inst, sa, order, plant.wl_channels, opt.track, res.ascription.k_diag, plant.base_drive);

    inst.set_power(res.track.drive);
    const Spectrum sp = sa.measure(inst, opt.shape_avg);
    const auto feats = sa.resonances(sp);

    CalibrationModel& m = res.model;
    m.channel_order = order;
    m.roles.assign(order.size(), RingRole::dendrite);
    m.ring_wl = plant.wl_channels;
    for (int ch : order) m.heat_bias.push_back(res.track.drive.at(ch));
    m.lam_bias = res.track.lam;
    for (const auto& f : feats) m.filter_shapes.push_back(extract_filter_shape(sp, f, opt.shape_window_fwhms));
    m.attenuation_est = atten;
    m.K_est = estimate_K(inst, sa, order, res.track.drive, res.track.lam, res.ascription.k_diag, opt.k_span,
                         opt.k_pts, opt.k_avg);
    m.validate();
    res.measurements = inst.measurements();
    return res;
}

bool BasicGates::pass(double heat_tol, double lam_tol, double k_tol) const
{
    return ascription && heat_bias_err <= heat_tol && lam_bias_err <= lam_tol && k_rel_err_pct <= k_tol;
}

BasicGates validate_basic(const CalibrationModel& model, const HiddenPlant& plant)
{
    const ThermalGroup& th = plant.device.thermal;
    BasicGates g;
    g.ascription = model.channel_order == th.channels();
    const std::size_t n = model.channel_order.size();
    for (std::size_t j = 0; j < n; ++j) {
        const int k = th.channel_index(model.channel_order[j]);
        g.heat_bias_err = std::max(g.heat_bias_err, std::abs(model.heat_bias[j] - th.heat_bias()[static_cast<std::size_t>(k)]));
        g.lam_bias_err = std::max(g.lam_bias_err, std::abs(model.lam_bias[j] - plant.wl_channels[j]));
    }
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            const double truth = th.K()(static_cast<Eigen::Index>(r), th.channel_index(model.channel_order[c]));
            if (truth < 10.0) continue;
            const double e = 100.0 * std::abs(model.K_est(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) - truth) / truth;
            g.k_rel_err_pct = std::max(g.k_rel_err_pct, e);
        }
    return g;
}

CascadedCalibrationResult run_cascaded_calibration(const HiddenPlant& plant, const OsaConfig& osa,
                                                   std::uint64_t noise_seed, const CascadedCalibrationOptions& opt)
{
    const std::size_t n = plant.wl_channels.size();
    Instrument inst(plant.device, plant.tap, osa, noise_seed);
    SpectrumAssistant sa;
    sa.n_chan = static_cast<int>(2 * n);
    sa.min_separation = opt.min_separation;
    sa.window = opt.window;

    CascadedCalibrationResult res;
    std::vector<int> all = plant.axon_channels;
    all.insert(all.end(), plant.dendrite_channels.begin(), plant.dendrite_channels.end());
    res.ascription = ascribe(inst, sa, all, plant.base_drive, opt.tune_by);
    const auto& order = res.ascription.trough_channel;
    const auto& k = res.ascription.k_diag;

    auto is_axon = [&](int ch) {
        return std::find(plant.axon_channels.begin(), plant.axon_channels.end(), ch) != plant.axon_channels.end();
    };
    std::vector<int> cal_axon, cal_dend;
    for (int ch : order) (is_axon(ch) ? cal_axon : cal_dend).push_back(ch);
    if (cal_axon.size() != n || cal_dend.size() != n)
        throw AscriptionError("ascription did not find one axon and one dendrite per channel");

    build_background(inst, sa, res.ascription, plant.base_drive, opt.detune_fwhms, opt.bg_avg);
    const double atten = sa.background.attenuation(inst.pump_power());

    const Spectrum base_sp = sa.measure(inst, opt.shape_avg);
    const auto base_feats = sa.resonances(base_sp);
    std::map<int, FilterShape> shapes;
    double max_fwhm = 0.0;
    for (std::size_t p = 0; p < base_feats.size(); ++p) {
        shapes[order[p]] = extract_filter_shape(base_sp, base_feats[p], opt.shape_window_fwhms);
        max_fwhm = std::max(max_fwhm, base_feats[p].fwhm);
    }

    std::vector<double> targets;
    for (double wl : plant.wl_channels) {
        targets.push_back(wl - max_fwhm);
        targets.push_back(wl + max_fwhm);
    }
    const TrackResult tr = track_to_bias(inst, sa, order, targets, opt.track, k, plant.base_drive);

    PowerMap drive = tr.drive;
    std::vector<double> merged_lams;
    SpectrumAssistant merged_sa = sa;
    merged_sa.n_chan = static_cast<int>(n);
    merged_sa.set_window(opt.window);
    for (int pass = 0; pass < opt.max_passes; ++pass) {
        bool all_ok = true;
        for (std::size_t i = 0; i < n; ++i) {
            MergeResult m = merge_troughs(inst, sa, plant.wl_channels[i], order[2 * i], order[2 * i + 1], opt.merge, k,
                                          max_fwhm, drive, pass > 0);
            drive = m.drive;
            all_ok = all_ok && m.converged;
            res.merges.push_back(std::move(m));
        }
        res.passes_used = pass + 1;
        if (pass + 1 < opt.passes) continue;
        inst.set_power(drive);
        try {
            merged_lams = lams_of(merged_sa.resonances(inst, opt.merge.avg_count));
        } catch (const ResonanceCountError&) {
            merged_lams.clear();
            all_ok = false;
        }
        for (std::size_t i = 0; i < merged_lams.size(); ++i)
            if (std::abs(merged_lams[i] - plant.wl_channels[i]) >= 2.0 * opt.merge.precision) all_ok = false;
        if (all_ok) {
            res.converged = true;
            break;
        }
    }
    if (merged_lams.size() != n) throw NonConvergence("merged troughs could not be resolved after all passes");

    std::map<int, double> ring_lam;
    for (std::size_t i = 0; i < n; ++i) {
        ring_lam[order[2 * i]] = merged_lams[i];
        ring_lam[order[2 * i + 1]] = merged_lams[i];
    }
    if (opt.resolve_pairs)
        for (std::size_t i = 0; i < n; ++i) {
            const auto pr = resolve_pair(inst, sa, plant.wl_channels[i], order[2 * i], order[2 * i + 1], k, drive,
                                         opt.resolve);
            drive = pr.drive;
            for (const auto& [ch, lam] : pr.lam) ring_lam[ch] = lam;
        }

    CalibrationModel& m = res.model;
    m.channel_order = cal_axon;
    m.channel_order.insert(m.channel_order.end(), cal_dend.begin(), cal_dend.end());
    m.roles.assign(n, RingRole::axon);
    m.roles.insert(m.roles.end(), n, RingRole::dendrite);
    m.ring_wl = plant.wl_channels;
    m.ring_wl.insert(m.ring_wl.end(), plant.wl_channels.begin(), plant.wl_channels.end());
    for (int ch : m.channel_order) {
        m.heat_bias.push_back(drive.at(ch));
        m.filter_shapes.push_back(shapes.at(ch));
    }
    for (int ch : m.channel_order) m.lam_bias.push_back(ring_lam.at(ch));
    m.attenuation_est = atten;
    inst.set_power(drive);
    m.K_est = estimate_K_cascaded(inst, sa, plant.wl_channels, cal_axon, cal_dend, k, drive, opt.k, &res.k_retries);
    m.validate();
    res.measurements = inst.measurements();
    return res;
}

bool CascadedGates::pass() const
{
    return ascription && heat_bias_err <= 0.01 && lam_bias_err <= 0.01 && atten_err_pct <= 4.0 && k_diag_err <= 0.1 &&
           k_off_err <= 1.2;
}

CascadedGates validate_cascaded(const CascadedCalibrationResult& r, const HiddenPlant& plant)
{
    const ThermalGroup& th = plant.device.thermal;
    const CalibrationModel& m = r.model;
    CascadedGates g;
    g.ascription = m.channel_order == th.channels();
    const std::size_t n = m.channel_order.size();
    for (std::size_t j = 0; j < n; ++j) {
        const int kx = th.channel_index(m.channel_order[j]);
        g.heat_bias_err = std::max(g.heat_bias_err, std::abs(m.heat_bias[j] - th.heat_bias()[static_cast<std::size_t>(kx)]));
        g.lam_bias_err = std::max(g.lam_bias_err, std::abs(m.lam_bias[j] - m.ring_wl[j]));
    }
    g.atten_err_pct = 100.0 * std::abs(m.attenuation_est - plant.device.attenuation) / plant.device.attenuation;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            const double truth = th.K()(static_cast<Eigen::Index>(a), th.channel_index(m.channel_order[b]));
            const double e = std::abs(m.K_est(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) - truth);
            if (a == b)
                g.k_diag_err = std::max(g.k_diag_err, e);
            else
                g.k_off_err = std::max(g.k_off_err, e);
        }
    return g;
}

} // namespace ringsim
