#pragma once

#include "ringsim/optics.hpp"
#include "ringsim/spectrum.hpp"
#include "ringsim/thermal.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ringsim {

enum class BankMode { dendrite, axon };

struct FilterBank {
    std::string name;
    BankMode mode = BankMode::dendrite;
    std::vector<RingModel> rings;  // resonances at zero delta drive
    std::vector<int> channels;     // primary heater channel per ring
};

struct DeviceNode {
    enum class Kind { bank, cascade, splitter };
    Kind kind = Kind::bank;
    FilterBank bank;
    std::vector<DeviceNode> children;

    static DeviceNode make_bank(FilterBank b);
    static DeviceNode cascade(std::vector<DeviceNode> children);
    static DeviceNode splitter(std::vector<DeviceNode> children);
};

struct OutputPort {
    std::string name;
};

// Rings of every bank pick up Δλ from the thermal row of their primary channel.
struct Device {
    DeviceNode root;
    ThermalGroup thermal;
    double attenuation = 1e-4;

    void validate() const;
    std::vector<OutputPort> ports() const;
    int tap(const std::string& port_name) const;
    // Banks in depth-first order.
    std::vector<const FilterBank*> banks() const;
    const FilterBank& bank(const std::string& name) const;
    // Resonance of every ring after the drive, keyed by primary channel.
    std::vector<double> ring_positions(const DriveState& drive) const;
};

struct OsaConfig {
    double pump_power = 0.1; // mW per channel
    double spacing = 0.01;   // nm
    double noise_amplitude = 0.2; // dB RMS
    std::uint64_t rng_seed = 0;

    void validate() const;
};

// Linear transmission of a tap including root attenuation (no pump).
std::vector<double> transmission(const Device& dev, const DriveState& drive, int tap,
                                 const std::vector<double>& lams);

// Transmission of a single bank in isolation (thru port), used for axon readings.
std::vector<double> bank_thru(const FilterBank& bank, const std::vector<double>& ring_shifts,
                              const std::vector<double>& lams);

Spectrum simulate_spectrum(const Device& dev, const DriveState& drive, int tap, Window window,
                           const OsaConfig& osa, int avg_count);

std::vector<double> channel_powers(const Device& dev, const DriveState& drive, int tap,
                                   const std::vector<double>& channels, const OsaConfig& osa);

} // namespace ringsim
