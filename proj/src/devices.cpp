#include "ringsim/devices.hpp"

#include "ringsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ringsim {

namespace {

bool diagonally_dominant(const Eigen::MatrixXd& K)
{
    for (Eigen::Index j = 0; j < K.rows(); ++j)
        for (Eigen::Index k = 0; k < K.cols(); ++k)
            if (k != j && !(K(j, j) > K(j, k))) return false;
    return true;
}

} // namespace

Eigen::MatrixXd basic_random_K(int n, std::uint64_t seed)
{
    Rng gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (;;) {
        Eigen::MatrixXd K(n, n);
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                K(j, k) = std::abs(0.1 * normal(gen) + 0.1 + (j == k ? 0.5 : 0.0)) * 200.0;
        if (diagonally_dominant(K)) return K;
    }
}

Eigen::MatrixXd cascaded_random_K(int n, std::uint64_t seed)
{
    Rng gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (;;) {
        Eigen::MatrixXd K(n, n);
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                K(j, k) = std::abs(normal(gen) + (j == k ? 20.0 : 0.0));
        if (diagonally_dominant(K)) return K;
    }
}

HiddenPlant make_basic_device(const BasicDeviceParams& p, std::uint64_t seed)
{
    const std::size_t n = p.wl_channels.size();
    if (p.heater_channels.size() != n || p.heat_bias.size() != n)
        throw std::invalid_argument("basic device: channel, heater and bias lists must match");
    Eigen::MatrixXd K = basic_random_K(static_cast<int>(n), seed);
    if (p.zero_crosstalk) K = Eigen::MatrixXd(K.diagonal().asDiagonal());

    FilterBank fb;
    fb.name = "bank";
    fb.mode = BankMode::dendrite;
    fb.channels = p.heater_channels;
    for (double wl : p.wl_channels) fb.rings.push_back(RingModel::from_fwhm(wl, p.fwhm, p.atten));

    HiddenPlant h;
    h.device.root = DeviceNode::make_bank(fb);
    h.device.thermal = ThermalGroup(p.heater_channels, K, p.heat_bias);
    h.device.attenuation = p.attenuation;
    h.device.validate();
    h.tap = h.device.tap("bank.thru");
    h.wl_channels = p.wl_channels;
    h.channels = p.heater_channels;
    std::sort(h.channels.begin(), h.channels.end());
    for (std::size_t i = 0; i < n; ++i)
        h.base_drive[p.heater_channels[i]] = std::max(0.0, p.heat_bias[i] - p.pretune);
    return h;
}

HiddenPlant make_cascaded_device(const CascadedDeviceParams& p, std::uint64_t seed)
{
    const std::size_t n = p.wl_channels.size();
    if (p.axon_heaters.size() != n || p.dendrite_heaters.size() != n)
        throw std::invalid_argument("cascaded device: heater lists must match channel count");
    Eigen::MatrixXd K = cascaded_random_K(static_cast<int>(2 * n), seed);
    if (p.zero_crosstalk) K = Eigen::MatrixXd(K.diagonal().asDiagonal());

    FilterBank axon, dend;
    axon.name = "axon";
    axon.mode = BankMode::axon;
    axon.channels = p.axon_heaters;
    dend.name = "dendrite";
    dend.mode = BankMode::dendrite;
    dend.channels = p.dendrite_heaters;
    for (double wl : p.wl_channels) {
        axon.rings.push_back(RingModel::from_fwhm(wl, p.fwhm, p.atten));
        dend.rings.push_back(RingModel::from_fwhm(wl, p.fwhm, p.atten));
    }

    std::vector<int> chans = p.axon_heaters;
    chans.insert(chans.end(), p.dendrite_heaters.begin(), p.dendrite_heaters.end());
    std::vector<double> bias(n, p.axon_bias);
    bias.insert(bias.end(), n, p.dendrite_bias);

    HiddenPlant h;
    h.device.root = DeviceNode::cascade({DeviceNode::make_bank(axon), DeviceNode::make_bank(dend)});
    h.device.thermal = ThermalGroup(chans, K, bias);
    h.device.attenuation = p.attenuation;
    h.device.validate();
    h.tap = h.device.tap("dendrite.thru");
    h.wl_channels = p.wl_channels;
    h.channels = chans;
    std::sort(h.channels.begin(), h.channels.end());
    h.axon_channels = p.axon_heaters;
    h.dendrite_channels = p.dendrite_heaters;
    std::sort(h.axon_channels.begin(), h.axon_channels.end());
    std::sort(h.dendrite_channels.begin(), h.dendrite_channels.end());
    for (std::size_t i = 0; i < n; ++i) {
        h.base_drive[p.axon_heaters[i]] = std::max(0.0, p.axon_bias - p.axon_pretune);
        h.base_drive[p.dendrite_heaters[i]] = std::max(0.0, p.dendrite_bias - p.dendrite_pretune);
    }
    return h;
}

} // namespace ringsim
