#include "ringsim/spectrum.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>
#include <stdexcept>

namespace ringsim {

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

double mw_to_dbm(double mw) { return 10.0 * std::log10(std::max(mw, 1e-300)); }

std::vector<double> Spectrum::wavelengths() const
{
    std::vector<double> w(size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = wavelength(i);
    return w;
}

std::vector<double> Spectrum::linear() const
{
    std::vector<double> v(size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = dbm_to_mw(power[i]);
    return v;
}

void Spectrum::validate() const
{
    if (power.empty()) throw std::invalid_argument("spectrum is empty");
    if (!(spacing > 0.0)) throw std::invalid_argument("spectrum spacing must be positive");
    for (double p : power)
        if (!std::isfinite(p)) throw std::invalid_argument("spectrum contains non-finite power");
}

std::size_t Spectrum::index_of(double lam) const
{
    const double f = std::round((lam - start) / spacing);
    if (f <= 0.0) return 0;
    return std::min(size() - 1, static_cast<std::size_t>(f));
}

double Spectrum::at(double lam) const
{
    const double f = (lam - start) / spacing;
    if (f <= 0.0) return power.front();
    if (f >= static_cast<double>(size() - 1)) return power.back();
    const auto i = static_cast<std::size_t>(f);
    const double u = f - static_cast<double>(i);
    return power[i] * (1.0 - u) + power[i + 1] * u;
}

Spectrum Spectrum::slice(double low, double high) const
{
    const std::size_t a = index_of(low);
    const std::size_t b = index_of(high);
    if (b <= a) throw std::invalid_argument("slice window is empty");
    Spectrum s;
    s.start = wavelength(a);
    s.spacing = spacing;
    s.power.assign(power.begin() + static_cast<std::ptrdiff_t>(a), power.begin() + static_cast<std::ptrdiff_t>(b) + 1);
    return s;
}

namespace {
std::mutex fftw_planner_mutex;
}

std::vector<double> power_spectrum(const std::vector<double>& v)
{
    if (v.empty()) throw std::invalid_argument("power_spectrum of empty vector");
    std::vector<double> in(v);
    const std::size_t nf = v.size() / 2 + 1;
    auto* spec = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nf));
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex);
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(in.size()), in.data(), spec, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::vector<double> out(nf);
    for (std::size_t k = 0; k < nf; ++k) out[k] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex);
        fftw_destroy_plan(plan);
    }
    fftw_free(spec);
    return out;
}

std::vector<double> pink_noise(std::size_t n, double amplitude, std::uint64_t seed)
{
    if (n < 1) throw std::invalid_argument("pink_noise needs n >= 1");
    std::vector<double> out(n, 0.0);
    if (amplitude == 0.0 || n < 2) return out;

    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : out) v = normal(gen);

    const std::size_t nf = n / 2 + 1;
    auto* spec = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nf));
    fftw_plan fwd, inv;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex);
        fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), out.data(), spec, FFTW_ESTIMATE);
        inv = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec, out.data(), FFTW_ESTIMATE);
    }
    fftw_execute(fwd);
    spec[0][0] = spec[0][1] = 0.0;
    for (std::size_t k = 1; k < nf; ++k) {
        const double g = 1.0 / std::sqrt(static_cast<double>(k));
        spec[k][0] *= g;
        spec[k][1] *= g;
    }
    fftw_execute(inv);
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex);
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(inv);
    }
    fftw_free(spec);

    double mean = 0.0;
    for (double v : out) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (auto& v : out) {
        v -= mean;
        ss += v * v;
    }
    const double rms = std::sqrt(ss / static_cast<double>(n));
    if (rms > 0.0)
        for (auto& v : out) v *= amplitude / rms;
    return out;
}

std::vector<double> moving_average(const std::vector<double>& v, std::size_t width)
{
    if (width <= 1 || v.size() < 2) return v;
    const std::size_t n = v.size();
    const std::size_t half = width / 2;
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + v[i];
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i >= half ? i - half : 0;
        const std::size_t b = std::min(n - 1, i + half);
        out[i] = (prefix[b + 1] - prefix[a]) / static_cast<double>(b - a + 1);
    }
    return out;
}

} // namespace ringsim
