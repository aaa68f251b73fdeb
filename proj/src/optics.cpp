#include "ringsim/optics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ringsim {

CouplerMatrix make_coupler(double r)
{
    if (!(r >= 0.0 && r <= 1.0))
        throw std::invalid_argument("coupler self-coupling must lie in [0, 1]");
    return {r, std::sqrt(1.0 - r * r)};
}

std::pair<std::complex<double>, std::complex<double>>
apply_coupler(const CouplerMatrix& c, std::complex<double> a1, std::complex<double> a2)
{
    const std::complex<double> it(0.0, c.t);
    return {c.r * a1 + it * a2, it * a1 + c.r * a2};
}

void RingPhysical::validate() const
{
    if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("ring r must lie in (0, 1)");
    if (!(n > 0.0)) throw std::invalid_argument("ring index must be positive");
    if (!(L > 0.0)) throw std::invalid_argument("ring perimeter must be positive");
    if (m < 1) throw std::invalid_argument("resonance order must be >= 1");
}

void RingModel::validate() const
{
    if (!(gamma > 0.0)) throw std::invalid_argument("ring gamma must be positive");
    if (!(atten > 0.0 && atten <= 1.0)) throw std::invalid_argument("ring atten must lie in (0, 1]");
    if (!std::isfinite(lam0)) throw std::invalid_argument("ring lam0 must be finite");
}

RingModel RingModel::from_fwhm(double lam0, double fwhm, double atten)
{
    RingModel r{lam0, fwhm / 2.0, atten};
    r.validate();
    return r;
}

double exact_thru_transmission(const RingPhysical& ring, double lam)
{
    if (!(lam > 0.0)) throw std::domain_error("wavelength must be positive");
    ring.validate();
    const double phi = 2.0 * std::numbers::pi * ring.n * ring.L / lam;
    const double r2 = ring.r * ring.r;
    const double c = std::cos(phi);
    return 2.0 * r2 * (1.0 - c) / (1.0 + r2 * r2 - 2.0 * r2 * c);
}

double exact_drop_transmission(const RingPhysical& ring, double lam)
{
    return 1.0 - exact_thru_transmission(ring, lam);
}

double lorentz_drop(const RingModel& ring, double lam)
{
    const double g2 = ring.gamma * ring.gamma;
    const double d = lam - ring.lam0;
    return ring.atten * g2 / (g2 + d * d);
}

double lorentz_thru(const RingModel& ring, double lam) { return 1.0 - lorentz_drop(ring, lam); }

double gamma_from_physical(const RingPhysical& ring)
{
    ring.validate();
    const double m = ring.m;
    return (1.0 - ring.r * ring.r) * ring.n * ring.L / (2.0 * std::numbers::pi * ring.r * m * m);
}

std::vector<double> resonant_wavelengths(const RingPhysical& ring, double low, double high)
{
    if (!(low < high)) throw std::invalid_argument("window low must be below high");
    if (!(low > 0.0)) throw std::invalid_argument("window must be at positive wavelengths");
    const double nl = ring.n * ring.L;
    std::vector<double> out;
    // nL/m' descends with m', so walk m' downward to get ascending wavelengths.
    const auto m_hi = static_cast<long long>(std::floor(nl / low));
    const auto m_lo = std::max<long long>(1, static_cast<long long>(std::ceil(nl / high)));
    for (long long m = m_hi; m >= m_lo; --m) {
        const double lam = nl / static_cast<double>(m);
        if (lam >= low && lam <= high) out.push_back(lam);
    }
    return out;
}

} // namespace ringsim
