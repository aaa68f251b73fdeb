#pragma once

#include "ringsim/calibration.hpp"
#include "ringsim/device.hpp"
#include "ringsim/training.hpp"

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace ringsim {

// Two-branch photonic 2-3-1 network on one 14-channel thermal group.
// Branch 1: input axons (0,1) feed three 2-ring dendrite banks (5..10).
// Branch 2: hidden axons (2,3,4) feed one 3-ring output bank (11..13).
struct Network231Config {
    std::vector<double> wl_channels{1550.0, 1552.0, 1554.0};
    double ring_fwhm = 0.1;  // input axons and dendrites
    double ring_atten = 0.99;
    double input_K = 20.0;   // nm/mW
    double heater_resistance = 1.0; // ohm, so mA^2 * R / 1000 gives mW
    Eigen::Vector2d input_bias_mA{0.0, 0.0};
    double dendrite_bias_mW = 1.0;
    Activation hidden_act{}; // shape and current-to-detune map of the hidden axons
    double pump_power = 0.1; // mW per channel
    double attenuation = 0.01;
    NetworkCircuit circuit{};
};

struct Network231 {
    Network231Config cfg;
    Device device;
    std::array<int, 2> input_axons{0, 1};
    std::array<int, 3> hidden_axons{2, 3, 4};
    std::array<std::array<int, 2>, 3> hidden_dendrites{{{5, 6}, {7, 8}, {9, 10}}};
    std::array<int, 3> output_dendrites{11, 12, 13};
    CalibrationModel dendrite_model; // exact model of the nine dendrite rings
};

Network231 make_network231(const Network231Config& cfg = {});

// Virtual parameters loaded onto the simulated network in the original demonstration,
// with its hidden-current target at input drive [0.1, 0.1] mA.
VirtualParams reference_network_params();
Eigen::Vector3d reference_hidden_target();
Eigen::Vector2d reference_input_drive();
// Default config with input-axon biases that reproduce the reference target's inputs.
Network231Config reference_network_config();

// Input vector x0 that best explains hidden targets W0 x0 + B0 (least squares).
Eigen::Vector2d implied_inputs(const VirtualParams& vp, const Eigen::Vector3d& hidden_target);

// Input-axon bias currents that give normalized inputs x0 at the given drive currents.
Eigen::Vector2d input_bias_for(const Network231Config& cfg, const Eigen::Vector2d& x0, const Eigen::Vector2d& drive_mA);

struct NetworkDrive {
    DriveState dendrites; // mW deltas for channels 5..13
};

NetworkDrive weights_to_network_drive(const Network231& net, const PhysicalParams& pp);

struct NetworkState {
    Eigen::Vector2d x0 = Eigen::Vector2d::Zero();
    Eigen::Vector3d hidden_current = Eigen::Vector3d::Zero(); // mA into the hidden axons
    Eigen::Vector3d x1 = Eigen::Vector3d::Zero();
    double y = 0.0;
};

NetworkState simulate_network(const Network231& net, const PhysicalParams& pp, const NetworkDrive& drive,
                              const Eigen::Vector2d& input_mA);

struct SweepResult {
    std::vector<double> drive_mA;   // sweep values per input
    std::vector<double> x0_axis[2]; // mean normalized input per sweep value
    Eigen::MatrixXd raw;            // y at (drive i, drive j)
    std::vector<double> grid;       // uniform normalized-input axis
    Eigen::MatrixXd surface;        // y interpolated on grid x grid, row = first input
    Eigen::MatrixXi sign;
};

SweepResult sweep_network(const Network231& net, const PhysicalParams& pp, int sweep_n, int threads = 0,
                          double max_drive_mA = 0.15, double grid_step = 0.025, double grid_max = 0.8);

} // namespace ringsim
