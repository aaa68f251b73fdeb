#pragma once

#include "ringsim/spectrum.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ringsim {

// Asymmetric Mach-Zehnder with two identical couplers of cross-power alpha.
struct InterferometerModel {
    double alpha = 0.5;
    double dL = 1.2e6; // nm

    void validate() const;
};

double interferometer_transmission(const InterferometerModel& m, double lam);

// Model spectrum in dBm with optional pink noise (dB RMS).
Spectrum interferometer_spectrum(const InterferometerModel& m, Window w, double spacing, double pump_mW = 1.0,
                                 double noise_db = 0.0, std::uint64_t seed = 0);

class NonSinusoidal : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// offset + amplitude * cos(2 pi * freq / lam + phase), in linear power.
struct SinusoidFit {
    double offset = 0.0;
    double amplitude = 0.0;
    double freq = 0.0; // nm, the optical path difference
    double phase = 0.0;
    double residual_rms = 0.0;
};

SinusoidFit fit_sinusoid(const Spectrum& s);

// 10 log10(max/min) of the fitted sinusoid; min is clamped to 1e-3 of the offset.
double extinction_ratio(const Spectrum& s);
double extinction_ratio(const SinusoidFit& f);

// Both coupling branches consistent with an extinction ratio: alpha <= 0.5 and 1 - alpha.
std::pair<double, double> alpha_from_er(double er_db);

struct SweepEntry {
    double width = 0.0;
    double length = 0.0;
    std::optional<Spectrum> spectrum;
    std::string error; // load failure, if any
};

struct CouplingRow {
    double width = 0.0;
    double length = 0.0;
    bool ok = false;
    double alpha_low = 0.0;
    double alpha_high = 0.0;
    double er_db = 0.0;
    std::string error;
};

// Rows sorted by descending extinction ratio; failed rows follow in input order.
std::vector<CouplingRow> coupling_report(const std::vector<SweepEntry>& sweep);

// Reads width_length.csv files holding (nm, dBm) rows on a uniform grid.
std::vector<SweepEntry> read_sweep_directory(const std::filesystem::path& dir);
Spectrum read_spectrum_csv(const std::filesystem::path& file);

class NonUnitary : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

void check_unitary(const ComplexMatrix& M, double tol = 1e-9);

// Pre-weights p with M p = desired.
ComplexVector compensate_mixing(const ComplexMatrix& M, const ComplexVector& desired);

} // namespace ringsim
