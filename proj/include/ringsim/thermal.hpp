#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

namespace ringsim {

enum class DriveUnit { mW, mA, V };

DriveUnit parse_drive_unit(const std::string& s);
std::string to_string(DriveUnit u);

// P(mW) = V^2/R*1000, I(mA) = V/R*1000.
double convert_drive(double value, DriveUnit from, DriveUnit to, double resistance);

// In mW the values are deltas above the heat bias. In mA or V they are the
// total heater current or voltage.
struct DriveState {
    std::map<int, double> values;
    DriveUnit unit = DriveUnit::mW;
};

class ThermalGroup {
public:
    ThermalGroup() = default;
    ThermalGroup(std::vector<int> channels, Eigen::MatrixXd K, std::vector<double> heat_bias,
                 double heater_resistance = 1000.0);

    const std::vector<int>& channels() const { return channels_; }
    const Eigen::MatrixXd& K() const { return K_; }
    const std::vector<double>& heat_bias() const { return heat_bias_; }
    double heater_resistance() const { return resistance_; }
    int rings() const { return static_cast<int>(K_.rows()); }
    int channel_index(int channel) const; // -1 if absent

    // Delta power above bias per channel (mW), zero for channels absent from the drive.
    Eigen::VectorXd delta_power(const DriveState& drive) const;

    // Delta drive from absolute channel powers (mW).
    DriveState from_absolute(const std::map<int, double>& power_mW) const;
    // Express any drive in the requested unit (total current/voltage, or mW delta).
    DriveState convert(const DriveState& drive, DriveUnit to) const;

private:
    std::vector<int> channels_;
    Eigen::MatrixXd K_;
    std::vector<double> heat_bias_;
    double resistance_ = 1000.0;
};

Eigen::VectorXd wavelength_shifts(const ThermalGroup& group, const DriveState& drive);

// Solves K * dP = target; the result is in mW deltas over every channel.
DriveState drive_for_shifts(const ThermalGroup& group, const Eigen::VectorXd& target);
DriveState drive_for_shifts(const Eigen::MatrixXd& K, const std::vector<int>& channels,
                            const std::vector<double>& heat_bias, const Eigen::VectorXd& target);

} // namespace ringsim
