#include "ringsim/thermal.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ringsim {

DriveUnit parse_drive_unit(const std::string& s)
{
    if (s == "mW") return DriveUnit::mW;
    if (s == "mA") return DriveUnit::mA;
    if (s == "V") return DriveUnit::V;
    throw std::invalid_argument("unknown drive unit '" + s + "'");
}

std::string to_string(DriveUnit u)
{
    switch (u) {
    case DriveUnit::mW: return "mW";
    case DriveUnit::mA: return "mA";
    case DriveUnit::V: return "V";
    }
    return "?";
}

double convert_drive(double value, DriveUnit from, DriveUnit to, double resistance)
{
    if (!(resistance > 0.0)) throw std::invalid_argument("heater resistance must be positive");
    if (from == to) return value;
    double volts = 0.0;
    switch (from) {
    case DriveUnit::V: volts = value; break;
    case DriveUnit::mA: volts = value * resistance / 1000.0; break;
    case DriveUnit::mW:
        if (value < 0.0) throw std::domain_error("power must be nonnegative");
        volts = std::sqrt(value * resistance / 1000.0);
        break;
    }
    switch (to) {
    case DriveUnit::V: return volts;
    case DriveUnit::mA: return volts / resistance * 1000.0;
    case DriveUnit::mW: return volts * volts / resistance * 1000.0;
    }
    return 0.0;
}

ThermalGroup::ThermalGroup(std::vector<int> channels, Eigen::MatrixXd K, std::vector<double> heat_bias,
                           double heater_resistance)
    : channels_(std::move(channels)), K_(std::move(K)), heat_bias_(std::move(heat_bias)),
      resistance_(heater_resistance)
{
    if (!(resistance_ > 0.0)) throw std::invalid_argument("heater resistance must be positive");
    if (K_.cols() != static_cast<Eigen::Index>(channels_.size()))
        throw std::invalid_argument("K columns must equal channel count");
    if (heat_bias_.size() != channels_.size())
        throw std::invalid_argument("heat_bias size must equal channel count");
    for (std::size_t i = 0; i < channels_.size(); ++i)
        for (std::size_t j = i + 1; j < channels_.size(); ++j)
            if (channels_[i] == channels_[j]) throw std::invalid_argument("duplicate channel id");
    for (double b : heat_bias_)
        if (!(b >= 0.0)) throw std::invalid_argument("heat bias must be nonnegative");
    if (!(K_.array() >= 0.0).all()) throw std::invalid_argument("K entries must be nonnegative");
    const Eigen::Index nd = std::min(K_.rows(), K_.cols());
    for (Eigen::Index j = 0; j < nd; ++j)
        for (Eigen::Index k = 0; k < K_.cols(); ++k)
            if (k != j && !(K_(j, j) > K_(j, k)))
                throw std::invalid_argument("K row " + std::to_string(j) + " is not diagonally dominant");
}

int ThermalGroup::channel_index(int channel) const
{
    for (std::size_t i = 0; i < channels_.size(); ++i)
        if (channels_[i] == channel) return static_cast<int>(i);
    return -1;
}

Eigen::VectorXd ThermalGroup::delta_power(const DriveState& drive) const
{
    Eigen::VectorXd dp = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(channels_.size()));
    for (const auto& [ch, v] : drive.values) {
        const int k = channel_index(ch);
        if (k < 0) throw std::out_of_range("unknown heater channel " + std::to_string(ch));
        double delta = v;
        if (drive.unit != DriveUnit::mW)
            delta = convert_drive(v, drive.unit, DriveUnit::mW, resistance_) - heat_bias_[k];
        if (heat_bias_[k] + delta < -1e-12)
            throw std::domain_error("negative total power on channel " + std::to_string(ch));
        dp[k] = delta;
    }
    return dp;
}

DriveState ThermalGroup::from_absolute(const std::map<int, double>& power_mW) const
{
    DriveState d;
    for (const auto& [ch, p] : power_mW) {
        const int k = channel_index(ch);
        if (k < 0) throw std::out_of_range("unknown heater channel " + std::to_string(ch));
        if (p < 0.0) throw std::domain_error("negative total power on channel " + std::to_string(ch));
        d.values[ch] = p - heat_bias_[k];
    }
    return d;
}

DriveState ThermalGroup::convert(const DriveState& drive, DriveUnit to) const
{
    if (drive.unit == to) return drive;
    const Eigen::VectorXd dp = delta_power(drive);
    DriveState out;
    out.unit = to;
    for (const auto& [ch, v] : drive.values) {
        (void)v;
        const int k = channel_index(ch);
        if (to == DriveUnit::mW)
            out.values[ch] = dp[k];
        else
            out.values[ch] = convert_drive(std::max(0.0, heat_bias_[k] + dp[k]), DriveUnit::mW, to, resistance_);
    }
    return out;
}

Eigen::VectorXd wavelength_shifts(const ThermalGroup& group, const DriveState& drive)
{
    return group.K() * group.delta_power(drive);
}

DriveState drive_for_shifts(const Eigen::MatrixXd& K, const std::vector<int>& channels,
                            const std::vector<double>& heat_bias, const Eigen::VectorXd& target)
{
    if (K.rows() != K.cols()) throw std::invalid_argument("drive_for_shifts needs a square K");
    if (target.size() != K.rows()) throw std::invalid_argument("target size must equal ring count");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible()) throw std::runtime_error("K is singular");
    const Eigen::VectorXd dp = lu.solve(target);
    DriveState d;
    for (std::size_t k = 0; k < channels.size(); ++k) {
        if (heat_bias[k] + dp[static_cast<Eigen::Index>(k)] < -1e-12)
            throw std::domain_error("target needs negative total power on channel " + std::to_string(channels[k]));
        d.values[channels[k]] = dp[static_cast<Eigen::Index>(k)];
    }
    return d;
}

DriveState drive_for_shifts(const ThermalGroup& group, const Eigen::VectorXd& target)
{
    return drive_for_shifts(group.K(), group.channels(), group.heat_bias(), target);
}

} // namespace ringsim
