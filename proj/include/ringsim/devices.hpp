#pragma once

#include "ringsim/device.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace ringsim {

// A hidden plant plus what an operator knows up front: the channel list, the
// target wavelengths and a hand-set starting drive that separates the troughs.
struct HiddenPlant {
    Device device;
    int tap = 0;
    std::vector<double> wl_channels;
    std::vector<int> channels;            // sorted, as an operator sees them
    std::map<int, double> base_drive;     // absolute mW
    std::vector<int> axon_channels;       // cascaded only, sorted
    std::vector<int> dendrite_channels;   // cascaded only, sorted
};

struct BasicDeviceParams {
    std::vector<double> wl_channels{1550.0, 1552.0, 1554.0, 1556.0};
    std::vector<int> heater_channels{5, 3, 6, 4};
    std::vector<double> heat_bias{2.5, 2.0, 1.5, 1.0};
    double fwhm = 0.2;
    double atten = 0.98;
    double attenuation = 1e-4;
    double pretune = 0.005; // mW below bias for the starting drive
    bool zero_crosstalk = false;
};

// K = |0.1 N(0,1) + 0.1 + 0.5 I| * 200, redrawn until diagonally dominant.
Eigen::MatrixXd basic_random_K(int n, std::uint64_t seed);
HiddenPlant make_basic_device(const BasicDeviceParams& p, std::uint64_t seed);

struct CascadedDeviceParams {
    std::vector<double> wl_channels{1550.0, 1552.0, 1554.0};
    std::vector<int> axon_heaters{1, 2, 0};
    std::vector<int> dendrite_heaters{4, 5, 3};
    double axon_bias = 2.0;
    double dendrite_bias = 1.5;
    double fwhm = 0.1;
    double atten = 0.98;
    double attenuation = 1e-4;
    double axon_pretune = 0.03;
    double dendrite_pretune = 0.06;
    bool zero_crosstalk = false;
};

// K = |N(0,1) + 20 I|.
Eigen::MatrixXd cascaded_random_K(int n, std::uint64_t seed);
HiddenPlant make_cascaded_device(const CascadedDeviceParams& p, std::uint64_t seed);

} // namespace ringsim
