#include "ringsim/calibration.hpp"

#include "ringsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ringsim {

namespace {

double slope(const std::vector<double>& x, const std::vector<double>& y)
{
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

std::vector<double> linspace(double a, double b, int n)
{
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return v;
}

std::vector<double> lams_of(const std::vector<ResonanceFeature>& f)
{
    std::vector<double> v;
    for (const auto& r : f) v.push_back(r.lam);
    return v;
}

void set_checked(Instrument& inst, const PowerMap& p)
{
    for (const auto& [ch, v] : p)
        if (v < 0.0) throw RangeError("drive for channel " + std::to_string(ch) + " fell below zero power");
    inst.set_power(p);
}

} // namespace

void ControllerConfig::validate() const
{
    if (!(kp > 0.0)) throw std::invalid_argument("kp must be positive");
    if (!(precision > 0.0)) throw std::invalid_argument("precision must be positive");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
    if (avg_count < 1) throw std::invalid_argument("avg_count must be >= 1");
}

Instrument::Instrument(const Device& dev, int tap, OsaConfig osa, std::uint64_t noise_seed)
    : dev_(dev), tap_(tap), osa_(osa), seed_(noise_seed)
{
    osa_.validate();
    for (int ch : dev_.thermal.channels()) power_[ch] = 0.0;
}

void Instrument::set_power(const PowerMap& p)
{
    for (const auto& [ch, v] : p) {
        if (dev_.thermal.channel_index(ch) < 0) throw std::out_of_range("unknown heater channel " + std::to_string(ch));
        if (v < 0.0) throw RangeError("negative heater power on channel " + std::to_string(ch));
        power_[ch] = v;
    }
}

Spectrum Instrument::spectrum(Window w, int avg_count)
{
    OsaConfig o = osa_;
    o.rng_seed = derive_seed(seed_, count_++);
    return simulate_spectrum(dev_, dev_.thermal.from_absolute(power_), tap_, w, o, avg_count);
}

Spectrum SpectrumAssistant::raw(Instrument& inst, int avg_count) const { return inst.spectrum(window, avg_count); }

Spectrum SpectrumAssistant::measure(Instrument& inst, int avg_count) const
{
    const Spectrum r = raw(inst, avg_count);
    if (tuned) return background.remove(r);
    return smoothed_background(r).remove(r);
}

std::vector<ResonanceFeature> SpectrumAssistant::resonances(const Spectrum& removed) const
{
    FindOptions o;
    o.baseline_db = 0.0;
    return find_resonances(removed, n_chan, min_separation, o);
}

std::vector<ResonanceFeature> SpectrumAssistant::resonances(Instrument& inst, int avg_count) const
{
    return resonances(measure(inst, avg_count));
}

void SpectrumAssistant::set_window(Window w)
{
    if (tuned) {
        w.low = std::max(w.low, background.background.start);
        w.high = std::min(w.high, background.background.stop());
    }
    if (!(w.high > w.low)) throw std::invalid_argument("analysis window is empty");
    window = w;
}

AscriptionResult ascribe(Instrument& inst, const SpectrumAssistant& sa, const std::vector<int>& channels,
                         const PowerMap& base_drive, double tune_by)
{
    if (!(tune_by > 0.0)) throw std::invalid_argument("tune_by must be positive");
    set_checked(inst, base_drive);
    const auto base = lams_of(sa.resonances(inst, 1));
    AscriptionResult res;
    res.trough_channel.assign(base.size(), -1);
    for (int ch : channels) {
        double step = tune_by;
        std::vector<double> now;
        for (int attempt = 0;; ++attempt) {
            PowerMap p = base_drive;
            p[ch] += step;
            set_checked(inst, p);
            try {
                now = lams_of(sa.resonances(inst, 1));
                break;
            } catch (const ResonanceCountError&) {
                if (attempt >= 3) {
                    set_checked(inst, base_drive);
                    throw AscriptionError("troughs merged while ascribing channel " + std::to_string(ch));
                }
                step /= 2.0;
                ++res.retries;
            }
        }
        set_checked(inst, base_drive);
        std::size_t best = 0;
        for (std::size_t i = 1; i < now.size(); ++i)
            if (now[i] - base[i] > now[best] - base[best]) best = i;
        if (res.trough_channel[best] != -1)
            throw AscriptionError("channels " + std::to_string(res.trough_channel[best]) + " and " +
                                  std::to_string(ch) + " ascribed to the same trough");
        res.trough_channel[best] = ch;
        res.k_diag[ch] = (now[best] - base[best]) / step;
    }
    for (int c : res.trough_channel)
        if (c < 0) throw AscriptionError("a trough has no heater channel");
    return res;
}

TrackResult track_to_bias(Instrument& inst, SpectrumAssistant& sa, const std::vector<int>& trough_channel,
                          const std::vector<double>& targets, const ControllerConfig& cfg,
                          const std::map<int, double>& k_diag, const PowerMap& start, bool recenter)
{
    cfg.validate();
    if (targets.size() != trough_channel.size()) throw std::invalid_argument("one target per trough required");
    TrackResult r;
    r.drive = start;
    set_checked(inst, r.drive);
    for (int it = 0; it < cfg.max_iter; ++it) {
        const auto lams = lams_of(sa.resonances(inst, cfg.avg_count));
        double worst = 0.0;
        std::vector<double> err(lams.size());
        for (std::size_t p = 0; p < lams.size(); ++p) {
            err[p] = targets[p] - lams[p];
            worst = std::max(worst, std::abs(err[p]));
        }
        r.error_history.push_back(worst);
        r.iterations = it + 1;
        if (worst < cfg.precision) {
            r.lam = lams;
            return r;
        }
        if (recenter) {
            double lo = std::numeric_limits<double>::max(), hi = -lo;
            for (std::size_t p = 0; p < lams.size(); ++p) {
                lo = std::min({lo, lams[p], targets[p]});
                hi = std::max({hi, lams[p], targets[p]});
            }
            const double mid = (lo + hi) / 2.0;
            const double span = hi - lo;
            sa.set_window({mid - span, mid + span});
        }
        for (std::size_t p = 0; p < lams.size(); ++p) {
            const int ch = trough_channel[p];
            r.drive[ch] += cfg.kp * err[p] / k_diag.at(ch);
        }
        set_checked(inst, r.drive);
    }
    throw NonConvergence("tracking did not converge in " + std::to_string(cfg.max_iter) + " iterations");
}

Eigen::MatrixXd estimate_K(Instrument& inst, const SpectrumAssistant& sa, const std::vector<int>& trough_channel,
                           const PowerMap& bias, const std::vector<double>& lam_bias,
                           const std::map<int, double>& k_diag, double span_nm, int n_pts, int avg_count)
{
    if (n_pts < 2) throw std::invalid_argument("n_pts must be >= 2");
    const auto n = static_cast<Eigen::Index>(trough_channel.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index ic = 0; ic < n; ++ic) {
        const int ch = trough_channel[static_cast<std::size_t>(ic)];
        const double b = bias.at(ch);
        const double dB = span_nm / k_diag.at(ch);
        const auto x = linspace(std::max(0.0, b - dB), b + dB, n_pts);
        std::vector<std::vector<double>> y(static_cast<std::size_t>(n), std::vector<double>(x.size()));
        PowerMap now = bias;
        for (std::size_t ip = 0; ip < x.size(); ++ip) {
            now[ch] = x[ip];
            set_checked(inst, now);
            std::vector<double> lams;
            try {
                lams = lams_of(sa.resonances(inst, avg_count));
            } catch (const ResonanceCountError& e) {
                set_checked(inst, bias);
                throw TroughIdentityLost(std::string("K sweep lost a trough: ") + e.what());
            }
            for (Eigen::Index r = 0; r < n; ++r)
                y[static_cast<std::size_t>(r)][ip] = lams[static_cast<std::size_t>(r)] - lam_bias[static_cast<std::size_t>(r)];
        }
        set_checked(inst, bias);
        for (Eigen::Index r = 0; r < n; ++r) K(r, ic) = std::max(0.0, slope(x, y[static_cast<std::size_t>(r)]));
    }
    return K;
}

MergeResult merge_troughs(Instrument& inst, const SpectrumAssistant& sa_in, double target_nm, int left_channel,
                          int right_channel, const MergeConfig& cfg, const std::map<int, double>& k_diag,
                          double max_fwhm, const PowerMap& start, bool skip_start)
{
    SpectrumAssistant sa = sa_in;
    sa.set_window({target_nm - 2.0 * max_fwhm, target_nm + 2.0 * max_fwhm});
    sa.n_chan = 2;
    MergeResult r;
    r.drive = start;
    set_checked(inst, r.drive);
    const int chans[2] = {left_channel, right_channel};

    for (int it = 0; it < cfg.max_iter && !skip_start; ++it) {
        r.phase1_iterations = it + 1;
        std::vector<ResonanceFeature> f;
        try {
            f = sa.resonances(inst, cfg.avg_count);
        } catch (const ResonanceCountError&) {
            break;
        }
        bool merged = false;
        for (const auto& x : f)
            if (x.fwhm > 2.0 * max_fwhm) merged = true;
        if (merged) break;
        double worst = 0.0;
        double err[2];
        for (int p = 0; p < 2; ++p) {
            err[p] = target_nm - f[static_cast<std::size_t>(p)].lam;
            worst = std::max(worst, std::abs(err[p]));
        }
        if (worst < cfg.precision) break;
        for (int p = 0; p < 2; ++p) r.drive[chans[p]] += cfg.kp_track * err[p] / k_diag.at(chans[p]);
        set_checked(inst, r.drive);
    }

    sa.n_chan = 1;
    SpectrumAssistant pair = sa;
    pair.n_chan = 2;
    int left = left_channel, right = right_channel;
    double err_fwhm = std::numeric_limits<double>::infinity();
    PowerMap prev = r.drive;
    bool strike = false;
    for (int it = 0; it < cfg.max_iter && r.reason.empty(); ++it) {
        r.phase2_iterations = it + 1;
        const Spectrum sp = sa.measure(inst, cfg.avg_count);
        // Still two resolvable troughs: pull both onto the target first.
        std::vector<ResonanceFeature> two;
        try {
            two = pair.resonances(sp);
        } catch (const ResonanceCountError&) {
        }
        if (two.size() == 2) {
            const int by_wl[2] = {left, right};
            for (int p = 0; p < 2; ++p)
                r.drive[by_wl[p]] += cfg.kp_track * (target_nm - two[static_cast<std::size_t>(p)].lam) / k_diag.at(by_wl[p]);
            set_checked(inst, r.drive);
            err_fwhm = std::numeric_limits<double>::infinity();
            prev = r.drive;
            continue;
        }
        const auto f = sa.resonances(sp).front();
        r.final_fwhm = f.fwhm;
        r.final_center = f.lam;
        const double prev_err = err_fwhm;
        err_fwhm = f.fwhm - max_fwhm;
        const double err_center = f.lam - target_nm;
        if (err_fwhm > prev_err) {
            r.drive = prev;
            set_checked(inst, r.drive);
            if (strike) {
                r.converged = true;
                r.reason = "width minimum bracketed";
                break;
            }
            strike = true;
            std::swap(left, right);
        }
        if (std::abs(err_fwhm) < cfg.precision) {
            r.converged = true;
            r.reason = "width within precision";
            break;
        }
        prev = r.drive;
        r.drive[left] += cfg.kp_merge * (err_fwhm - err_center) / k_diag.at(left);
        r.drive[right] -= cfg.kp_merge * (err_fwhm - err_center) / k_diag.at(right);
        set_checked(inst, r.drive);
    }
    if (r.reason.empty()) {
        r.reason = "iteration limit";
        return r;
    }

    // Common-mode trim of the merged centre.
    for (int it = 0; it < cfg.max_iter; ++it) {
        const auto f = sa.resonances(inst, cfg.avg_count).front();
        r.final_fwhm = f.fwhm;
        r.final_center = f.lam;
        const double err = target_nm - f.lam;
        if (std::abs(err) < cfg.precision) break;
        r.trim_iterations = it + 1;
        for (int ch : {left, right}) r.drive[ch] += cfg.kp_center * err / k_diag.at(ch);
        set_checked(inst, r.drive);
    }
    return r;
}

PairResolveResult resolve_pair(Instrument& inst, const SpectrumAssistant& sa_in, double target_nm, int ch_a, int ch_b,
                               const std::map<int, double>& k_diag, const PowerMap& start, const PairResolveConfig& cfg)
{
    SpectrumAssistant sa = sa_in;
    sa.set_window({target_nm - cfg.window_half, target_nm + cfg.window_half});
    sa.n_chan = 2;
    PairResolveResult r;
    r.drive = start;
    const int chans[2] = {ch_a, ch_b};
    for (int round = 0; round <= cfg.rounds; ++round) {
        double worst = 0.0;
        for (int p = 0; p < 2; ++p) {
            const int self = chans[p], other = chans[1 - p];
            double sum = 0.0;
            for (double side : {1.0, -1.0}) {
                PowerMap split = r.drive;
                split[other] += side * cfg.split_nm / k_diag.at(other);
                set_checked(inst, split);
                const auto f = sa.resonances(inst, cfg.avg_count);
                const auto near = std::min_element(f.begin(), f.end(), [&](const auto& x, const auto& y) {
                    return std::abs(x.lam - target_nm) < std::abs(y.lam - target_nm);
                });
                sum += near->lam;
            }
            r.lam[self] = 0.5 * sum;
            worst = std::max(worst, std::abs(target_nm - r.lam[self]));
        }
        r.rounds = round;
        if (worst < cfg.precision || round == cfg.rounds) break;
        for (int ch : chans) r.drive[ch] += (target_nm - r.lam[ch]) / k_diag.at(ch);
    }
    set_checked(inst, r.drive);
    return r;
}

Eigen::MatrixXd alternating_to_grouped(const Eigen::MatrixXd& K)
{
    const Eigen::Index n2 = K.rows();
    if (K.cols() != n2 || n2 % 2 != 0) throw std::invalid_argument("expected a square matrix of even size");
    const Eigen::Index n = n2 / 2;
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n2));
    for (Eigen::Index i = 0; i < n; ++i) {
        perm[static_cast<std::size_t>(i)] = 2 * i;
        perm[static_cast<std::size_t>(n + i)] = 2 * i + 1;
    }
    Eigen::MatrixXd out(n2, n2);
    for (Eigen::Index r = 0; r < n2; ++r)
        for (Eigen::Index c = 0; c < n2; ++c)
            out(r, c) = K(perm[static_cast<std::size_t>(r)], perm[static_cast<std::size_t>(c)]);
    return out;
}

namespace {

// One 2x2 block of the cascaded K: rows (axon_j, dendrite_j), columns (axon_num, dendrite_num).
struct SquareSweep {
    Instrument& inst;
    SpectrumAssistant& sa;
    const std::map<int, double>& k_diag;
    int avg;

    // Primary square; on return bias/bias_wl hold the separated reference state.
    Eigen::Matrix2d primary(int a, int d, PowerMap& bias, std::vector<double>& bias_wl, double span, int npts)
    {
        Eigen::Matrix2d sq = Eigen::Matrix2d::Zero();
        PowerMap now = bias;
        const int chs[2] = {a, d};
        std::vector<double> last_wl;
        for (int ich = 0; ich < 2; ++ich) {
            const int ch = chs[ich];
            const double b = bias.at(ch);
            const double dB = span / k_diag.at(ch);
            const auto x = linspace(std::max(0.0, b - dB), b + dB, npts);
            std::vector<double> y0(x.size(), 0.0), y1(x.size(), 0.0);
            for (std::size_t ip = 0; ip < x.size(); ++ip) {
                if (static_cast<int>(ip) == npts / 2 && npts % 2 == 1) continue;
                now[ch] = x[ip];
                set_checked(inst, now);
                const auto wl = lams_of(sa.resonances(inst, avg));
                double diff[2] = {wl[0] - bias_wl[0], wl[1] - bias_wl[1]};
                std::sort(diff, diff + 2);
                if (std::abs(diff[1]) < std::abs(diff[0])) std::swap(diff[0], diff[1]);
                (ich == 0 ? y0 : y1)[ip] = diff[1];
                (ich == 0 ? y1 : y0)[ip] = diff[0];
                last_wl = wl;
            }
            sq(0, ich) = std::max(0.0, slope(x, y0));
            sq(1, ich) = std::max(0.0, slope(x, y1));
            if (ich == 1) {
                bias = now;
                bias_wl = last_wl;
            }
            now[ch] = bias.at(ch);
        }
        set_checked(inst, bias);
        return sq;
    }

    Eigen::Matrix2d other(int a, int d, const PowerMap& bias, const std::vector<double>& bias_wl, double span, int npts)
    {
        Eigen::Matrix2d sq = Eigen::Matrix2d::Zero();
        PowerMap now = bias;
        const int chs[2] = {a, d};
        for (int ich = 0; ich < 2; ++ich) {
            const int ch = chs[ich];
            const double b = bias.at(ch);
            const double dB = span / k_diag.at(ch);
            const auto x = linspace(std::max(0.0, b - dB), b + dB, npts);
            std::vector<double> y0(x.size(), 0.0), y1(x.size(), 0.0);
            for (std::size_t ip = 0; ip < x.size(); ++ip) {
                if (static_cast<int>(ip) == npts / 2 && npts % 2 == 1) continue;
                now[ch] = x[ip];
                set_checked(inst, now);
                const auto wl = lams_of(sa.resonances(inst, avg));
                y0[ip] = wl[0] - bias_wl[0];
                y1[ip] = wl[1] - bias_wl[1];
            }
            sq(0, ich) = std::max(0.0, slope(x, y0));
            sq(1, ich) = std::max(0.0, slope(x, y1));
            now[ch] = b;
        }
        set_checked(inst, bias);
        return sq;
    }
};

} // namespace

Eigen::MatrixXd estimate_K_cascaded(Instrument& inst, const SpectrumAssistant& sa_in,
                                    const std::vector<double>& wl_channels, const std::vector<int>& axons,
                                    const std::vector<int>& dendrites, const std::map<int, double>& k_diag,
                                    const PowerMap& bias, const CascadedKConfig& cfg, int* retries)
{
    const std::size_t n = wl_channels.size();
    if (axons.size() != n || dendrites.size() != n) throw std::invalid_argument("one axon and dendrite per channel");
    Eigen::MatrixXd alt = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * n), static_cast<Eigen::Index>(2 * n));
    int retry_count = 0;

    for (std::size_t j = 0; j < n; ++j) {
        SpectrumAssistant sa = sa_in;
        sa.set_window({wl_channels[j] - cfg.window_half, wl_channels[j] + cfg.window_half});
        sa.n_chan = 2;
        SquareSweep sweep{inst, sa, k_diag, cfg.avg_count};

        for (int attempt = 0;; ++attempt) {
            const double shrink = attempt == 0 ? 1.0 : 2.0 / 3.0;
            try {
                PowerMap b = bias;
                std::vector<double> bwl{wl_channels[j], wl_channels[j]};
                std::vector<Eigen::Matrix2d> squares(n);
                squares[j] = sweep.primary(axons[j], dendrites[j], b, bwl, cfg.prim_span * shrink, cfg.prim_pts);
                for (std::size_t num = 0; num < n; ++num) {
                    if (num == j) continue;
                    squares[num] = sweep.other(axons[num], dendrites[num], b, bwl, cfg.other_span * shrink, cfg.other_pts);
                }
                for (std::size_t num = 0; num < n; ++num)
                    alt.block<2, 2>(static_cast<Eigen::Index>(2 * j), static_cast<Eigen::Index>(2 * num)) = squares[num];
                break;
            } catch (const ResonanceCountError& e) {
                set_checked(inst, bias);
                if (attempt >= 1)
                    throw TroughIdentityLost("cascaded K sweep lost trough identity near " +
                                             std::to_string(wl_channels[j]) + " nm: " + e.what());
                ++retry_count;
            }
        }
        set_checked(inst, bias);
    }
    if (retries) *retries = retry_count;
    return alternating_to_grouped(alt);
}

} // namespace ringsim
