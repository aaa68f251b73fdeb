#pragma once

#include "ringsim/spectrum.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ringsim {

struct ResonanceFeature {
    double lam = 0.0;
    double fwhm = 0.0;
    double depth = 0.0; // dB below background
};

// Fewer troughs than expected could be told apart.
class ResonanceCountError : public std::runtime_error {
public:
    ResonanceCountError(const std::string& what, int found) : std::runtime_error(what), found_(found) {}
    int found() const { return found_; }

private:
    int found_;
};

struct FindOptions {
    double min_depth_db = 3.0;
    // Background level in dB; estimated from the spectrum when absent.
    std::optional<double> baseline_db;
};

std::vector<ResonanceFeature> find_resonances(const Spectrum& s, int expected_count, double min_separation,
                                              const FindOptions& opt = {});

struct BackgroundModel {
    enum class Mode { smoothed, tuned };
    Mode mode = Mode::smoothed;
    Spectrum background;

    Spectrum remove(const Spectrum& raw) const;
    // Baseline transmission relative to the pump power (linear).
    double attenuation(double pump_mW) const;
};

BackgroundModel smoothed_background(const Spectrum& raw, double width_nm = 2.0);
// Divides out the Lorentzian wings of known troughs; samples within one fwhm of a trough are left as they are.
Spectrum remove_trough_wings(const Spectrum& s, const std::vector<ResonanceFeature>& troughs);
BackgroundModel build_tuned_background(const Spectrum& base, const Spectrum& displaced, double smooth_nm = 0.05);

struct FilterShape {
    std::vector<double> rel_nm;
    std::vector<double> transmission;

    double at(double rel) const; // clamps to the edge values outside the table
    double min_transmission() const;
};

FilterShape extract_filter_shape(const Spectrum& s, const ResonanceFeature& feature, double window_fwhms);

} // namespace ringsim
