#include "ringsim/analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ringsim {

namespace {

double percentile(std::vector<double> v, double q)
{
    const auto k = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

std::size_t odd_width(double nm, double spacing)
{
    auto w = static_cast<std::size_t>(std::lround(nm / spacing));
    if (w < 1) w = 1;
    if (w % 2 == 0) ++w;
    return w;
}

// Linear crossing of `level` walking from i0 in direction dir; nullopt past [lo, hi].
std::optional<double> crossing(const std::vector<double>& t, std::size_t i0, int dir, double level, std::size_t lo,
                               std::size_t hi)
{
    std::ptrdiff_t i = static_cast<std::ptrdiff_t>(i0);
    while (true) {
        const std::ptrdiff_t j = i + dir;
        if (j < static_cast<std::ptrdiff_t>(lo) || j > static_cast<std::ptrdiff_t>(hi)) return std::nullopt;
        if (t[static_cast<std::size_t>(j)] >= level) {
            const double a = t[static_cast<std::size_t>(i)];
            const double b = t[static_cast<std::size_t>(j)];
            const double u = b > a ? (level - a) / (b - a) : 0.0;
            return static_cast<double>(i) + dir * u;
        }
        i = j;
    }
}

// [bl, bh] bounds the trough's basin: the ridge to each neighbouring trough.
ResonanceFeature refine(const Spectrum& s, const std::vector<double>& t, std::size_t near, std::size_t halfw,
                        std::size_t bl, std::size_t bh)
{
    const std::size_t a = std::max(bl, near > halfw ? near - halfw : 0);
    const std::size_t b = std::min(bh, near + halfw);
    std::size_t imin = a;
    for (std::size_t i = a; i <= b; ++i)
        if (t[i] < t[imin]) imin = i;

    const double tmin_raw = std::max(t[imin], 0.0);
    const double level0 = (1.0 + tmin_raw) / 2.0;
    std::size_t lo = imin, hi = imin;
    while (lo > bl && t[lo - 1] < level0) --lo;
    while (hi < bh && t[hi + 1] < level0) ++hi;
    if (hi - lo < 2) {
        lo = imin > bl ? imin - 1 : bl;
        hi = std::min(bh, lo + 2);
        lo = hi >= bl + 2 ? hi - 2 : bl;
    }

    // 1/(1 - T) of a Lorentzian trough is a parabola in wavelength.
    const std::size_t m = hi - lo + 1;
    Eigen::MatrixXd A(static_cast<Eigen::Index>(m), 3);
    Eigen::VectorXd y(static_cast<Eigen::Index>(m));
    const double x0 = s.wavelength(imin);
    for (std::size_t k = 0; k < m; ++k) {
        const double x = s.wavelength(lo + k) - x0;
        const double d = std::max(1.0 - t[lo + k], 1e-6);
        A(static_cast<Eigen::Index>(k), 0) = 1.0;
        A(static_cast<Eigen::Index>(k), 1) = x;
        A(static_cast<Eigen::Index>(k), 2) = x * x;
        y[static_cast<Eigen::Index>(k)] = 1.0 / d;
    }
    const Eigen::Vector3d c = A.colPivHouseholderQr().solve(y);
    double lam = x0;
    double tmin = tmin_raw;
    if (c[2] > 0.0) {
        const double v = -c[1] / (2.0 * c[2]);
        const double xl = s.wavelength(lo) - x0;
        const double xh = s.wavelength(hi) - x0;
        if (v >= xl && v <= xh) {
            lam = x0 + v;
            const double inv = c[0] - c[1] * c[1] / (4.0 * c[2]);
            if (inv > 0.0) tmin = std::clamp(1.0 - 1.0 / inv, 0.0, 1.0);
        }
    }

    const double level = (1.0 + tmin) / 2.0;
    const auto left = crossing(t, imin, -1, level, bl, bh);
    const auto right = crossing(t, imin, +1, level, bl, bh);
    double fwhm;
    const double ci = static_cast<double>(imin) + (lam - x0) / s.spacing;
    if (left && right)
        fwhm = (*right - *left) * s.spacing;
    else if (left)
        fwhm = 2.0 * (ci - *left) * s.spacing;
    else if (right)
        fwhm = 2.0 * (*right - ci) * s.spacing;
    else
        fwhm = static_cast<double>(bh - bl) * s.spacing;
    fwhm = std::max(fwhm, 1e-6);

    return {lam, fwhm, std::max(-10.0 * std::log10(std::max(tmin, 1e-9)), 1e-9)};
}

} // namespace

std::vector<ResonanceFeature> find_resonances(const Spectrum& s, int expected_count, double min_separation,
                                              const FindOptions& opt)
{
    if (expected_count < 1) throw std::invalid_argument("expected_count must be >= 1");
    if (!(min_separation > 0.0)) throw std::invalid_argument("min_separation must be positive");
    s.validate();
    const std::size_t n = s.size();
    if (n < 5) throw ResonanceCountError("spectrum too short to hold a trough", 0);

    std::vector<double> db = s.power;
    const double base_db = opt.baseline_db ? *opt.baseline_db : percentile(db, 0.9);
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::pow(10.0, (db[i] - base_db) / 10.0);

    const std::size_t w = odd_width(min_separation / 4.0, s.spacing);
    const auto sm = moving_average(t, w);
    const double floor_t = std::pow(10.0, -opt.min_depth_db / 10.0);

    std::vector<std::size_t> cand;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(sm[i] < floor_t)) continue;
        if (!(sm[i] <= sm[i - 1] && sm[i] < sm[i + 1])) continue;
        cand.push_back(i);
    }
    std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return sm[a] < sm[b]; });

    std::vector<std::size_t> kept;
    for (std::size_t i : cand) {
        bool ok = true;
        for (std::size_t k : kept)
            if (std::abs(s.wavelength(i) - s.wavelength(k)) < min_separation) {
                ok = false;
                break;
            }
        if (ok) kept.push_back(i);
    }
    if (static_cast<int>(kept.size()) < expected_count)
        throw ResonanceCountError("found " + std::to_string(kept.size()) + " troughs, expected " +
                                      std::to_string(expected_count),
                                  static_cast<int>(kept.size()));
    std::vector<std::size_t> all = kept;
    std::sort(all.begin(), all.end());
    kept.resize(static_cast<std::size_t>(expected_count));
    std::sort(kept.begin(), kept.end());

    auto ridge = [&](std::size_t a, std::size_t b) {
        std::size_t m = a;
        for (std::size_t k = a; k <= b; ++k)
            if (sm[k] > sm[m]) m = k;
        return m;
    };
    std::vector<ResonanceFeature> out;
    for (std::size_t i : kept) {
        const auto pos = static_cast<std::size_t>(std::lower_bound(all.begin(), all.end(), i) - all.begin());
        const std::size_t bl = pos == 0 ? 0 : ridge(all[pos - 1], i);
        const std::size_t bh = pos + 1 == all.size() ? n - 1 : ridge(i, all[pos + 1]);
        out.push_back(refine(s, t, i, w, bl, bh));
    }
    return out;
}

Spectrum BackgroundModel::remove(const Spectrum& raw) const
{
    Spectrum out = raw;
    for (std::size_t i = 0; i < raw.size(); ++i) out.power[i] = raw.power[i] - background.at(raw.wavelength(i));
    return out;
}

double BackgroundModel::attenuation(double pump_mW) const
{
    return dbm_to_mw(percentile(background.power, 0.5)) / pump_mW;
}

BackgroundModel smoothed_background(const Spectrum& raw, double width_nm)
{
    raw.validate();
    const std::size_t w = odd_width(width_nm, raw.spacing);
    const std::size_t n = raw.size();
    const std::size_t h = w / 2;
    std::vector<double> env(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i > h ? i - h : 0;
        const std::size_t b = std::min(n - 1, i + h);
        env[i] = *std::max_element(raw.power.begin() + static_cast<std::ptrdiff_t>(a),
                                   raw.power.begin() + static_cast<std::ptrdiff_t>(b) + 1);
    }
    BackgroundModel m;
    m.mode = BackgroundModel::Mode::smoothed;
    m.background = raw;
    m.background.power = moving_average(env, w);
    return m;
}

Spectrum remove_trough_wings(const Spectrum& s, const std::vector<ResonanceFeature>& troughs)
{
    Spectrum out = s;
    for (const auto& f : troughs) {
        if (!(f.fwhm > 0.0) || !(f.depth > 0.0)) continue;
        const double a = 1.0 - std::pow(10.0, -f.depth / 10.0);
        const double g2 = 0.25 * f.fwhm * f.fwhm;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double d = out.wavelength(i) - f.lam;
            if (std::abs(d) <= f.fwhm) continue;
            out.power[i] -= 10.0 * std::log10(1.0 - a * g2 / (g2 + d * d));
        }
    }
    return out;
}

BackgroundModel build_tuned_background(const Spectrum& base, const Spectrum& displaced, double smooth_nm)
{
    base.validate();
    displaced.validate();
    if (base.size() != displaced.size() || std::abs(base.start - displaced.start) > 1e-9 ||
        std::abs(base.spacing - displaced.spacing) > 1e-12)
        throw std::invalid_argument("tuned background needs spectra on the same grid");
    const std::size_t w = odd_width(smooth_nm, base.spacing);
    const auto a = moving_average(base.power, w);
    const auto b = moving_average(displaced.power, w);
    std::vector<double> env(a.size());
    for (std::size_t i = 0; i < env.size(); ++i) env[i] = std::max(a[i], b[i]);
    BackgroundModel m;
    m.mode = BackgroundModel::Mode::tuned;
    m.background = base;
    m.background.power = moving_average(env, w);
    return m;
}

double FilterShape::at(double rel) const
{
    if (rel_nm.empty()) throw std::logic_error("empty filter shape");
    if (rel <= rel_nm.front()) return transmission.front();
    if (rel >= rel_nm.back()) return transmission.back();
    const auto it = std::upper_bound(rel_nm.begin(), rel_nm.end(), rel);
    const auto j = static_cast<std::size_t>(it - rel_nm.begin());
    const double u = (rel - rel_nm[j - 1]) / (rel_nm[j] - rel_nm[j - 1]);
    return transmission[j - 1] * (1.0 - u) + transmission[j] * u;
}

double FilterShape::min_transmission() const
{
    return *std::min_element(transmission.begin(), transmission.end());
}

FilterShape extract_filter_shape(const Spectrum& s, const ResonanceFeature& feature, double window_fwhms)
{
    if (!(window_fwhms > 0.0)) throw std::invalid_argument("window_fwhms must be positive");
    const double half = window_fwhms * feature.fwhm / 2.0;
    if (feature.lam - half < s.start - 1e-9 || feature.lam + half > s.stop() + 1e-9)
        throw std::out_of_range("filter-shape window exceeds the spectrum");
    FilterShape f;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double rel = s.wavelength(i) - feature.lam;
        if (rel < -half - 1e-12 || rel > half + 1e-12) continue;
        f.rel_nm.push_back(rel);
        f.transmission.push_back(std::clamp(dbm_to_mw(s.power[i]), 0.0, 1.0));
    }
    if (f.rel_nm.size() < 3) throw std::out_of_range("filter-shape window holds fewer than 3 samples");
    return f;
}

} // namespace ringsim
