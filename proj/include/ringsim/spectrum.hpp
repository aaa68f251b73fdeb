#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ringsim {

double dbm_to_mw(double dbm);
double mw_to_dbm(double mw);

struct Spectrum {
    double start = 0.0;   // nm
    double spacing = 0.01; // nm
    std::vector<double> power; // dBm

    std::size_t size() const { return power.size(); }
    double wavelength(std::size_t i) const { return start + spacing * static_cast<double>(i); }
    double stop() const { return wavelength(size() - 1); }
    std::vector<double> wavelengths() const;
    std::vector<double> linear() const;
    void validate() const;

    // Nearest sample index, clamped to the grid.
    std::size_t index_of(double lam) const;
    // Linear interpolation in dB; clamps outside the grid.
    double at(double lam) const;
    Spectrum slice(double low, double high) const;
};

struct Window {
    double low = 0.0;
    double high = 0.0;
};

std::vector<double> pink_noise(std::size_t n, double amplitude, std::uint64_t seed);

// |X_k|^2 of the real DFT, k = 0..n/2.
std::vector<double> power_spectrum(const std::vector<double>& v);

std::vector<double> moving_average(const std::vector<double>& v, std::size_t width);

} // namespace ringsim
