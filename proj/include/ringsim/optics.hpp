#pragma once

#include <complex>
#include <utility>
#include <vector>

namespace ringsim {

struct CouplerMatrix {
    double r = 1.0;
    double t = 0.0;
};

CouplerMatrix make_coupler(double r);

// Applies [[r, i t], [i t, r]] to the input field pair.
std::pair<std::complex<double>, std::complex<double>>
apply_coupler(const CouplerMatrix& c, std::complex<double> a1, std::complex<double> a2);

struct RingPhysical {
    double r = 0.9;
    double n = 2.0;
    double L = 775000.0; // nm
    int m = 1000;

    void validate() const;
    double resonance() const { return n * L / m; }
};

struct RingModel {
    double lam0 = 1550.0;
    double gamma = 0.1;
    double atten = 0.98;

    double fwhm() const { return 2.0 * gamma; }
    void validate() const;
    static RingModel from_fwhm(double lam0, double fwhm, double atten);
};

double exact_thru_transmission(const RingPhysical& ring, double lam);
double exact_drop_transmission(const RingPhysical& ring, double lam);

double lorentz_drop(const RingModel& ring, double lam);
double lorentz_thru(const RingModel& ring, double lam);

double gamma_from_physical(const RingPhysical& ring);

std::vector<double> resonant_wavelengths(const RingPhysical& ring, double low, double high);

} // namespace ringsim
