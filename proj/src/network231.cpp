#include "ringsim/network231.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace ringsim {

namespace {

double hidden_K(const Network231Config& c)
{
    return c.hidden_act.thK * 1000.0 / (c.hidden_act.scale * c.heater_resistance);
}

FilterShape lorentz_shape(double gamma, double atten, double half_span, double step)
{
    FilterShape s;
    const int n = static_cast<int>(std::lround(half_span / step));
    for (int i = -n; i <= n; ++i) {
        const double d = i * step;
        s.rel_nm.push_back(d);
        s.transmission.push_back(1.0 - atten * gamma * gamma / (gamma * gamma + d * d));
    }
    return s;
}

// Heater power above bias (mW) for a total current I over bias current B.
double delta_power(double I, double B, double R) { return R * (I * I - B * B) / 1000.0; }

double port_power(const Network231& net, const DriveState& d, const std::string& port)
{
    const auto t = transmission(net.device, d, net.device.tap(port), net.cfg.wl_channels);
    double s = 0.0;
    for (double v : t) s += net.cfg.pump_power * v;
    return s;
}

std::vector<double> axon_reading(const Network231& net, const DriveState& d, const std::string& bank, std::size_t n)
{
    const FilterBank& b = net.device.bank(bank);
    const Eigen::VectorXd sh = wavelength_shifts(net.device.thermal, d);
    std::vector<double> shifts;
    for (int ch : b.channels) shifts.push_back(sh[net.device.thermal.channel_index(ch)]);
    const std::vector<double> lams(net.cfg.wl_channels.begin(), net.cfg.wl_channels.begin() + static_cast<long>(n));
    auto t = bank_thru(b, shifts, lams);
    for (double& v : t) v = std::clamp(v, 0.0, 1.0);
    return t;
}

} // namespace

Network231 make_network231(const Network231Config& cfg)
{
    if (cfg.wl_channels.size() != 3) throw std::invalid_argument("the 2-3-1 network uses three wavelength channels");
    cfg.hidden_act.validate();
    cfg.circuit.hidden.validate();
    cfg.circuit.output.validate();
    if (!(cfg.heater_resistance > 0.0)) throw std::invalid_argument("heater resistance must be positive");
    if ((cfg.input_bias_mA.array() < 0.0).any()) throw std::invalid_argument("input bias currents must be nonnegative");

    Network231 net;
    net.cfg = cfg;
    const auto& wl = cfg.wl_channels;
    const double R = cfg.heater_resistance;
    auto ring = [&](double lam) { return RingModel::from_fwhm(lam, cfg.ring_fwhm, cfg.ring_atten); };

    FilterBank in{"in", BankMode::axon, {ring(wl[0]), ring(wl[1])}, {0, 1}};
    std::vector<DeviceNode> hidden_banks;
    for (int k = 0; k < 3; ++k) {
        const auto& ch = net.hidden_dendrites[static_cast<std::size_t>(k)];
        hidden_banks.push_back(DeviceNode::make_bank(
            {"h" + std::to_string(k), BankMode::dendrite, {ring(wl[0]), ring(wl[1])}, {ch[0], ch[1]}}));
    }
    const Activation& a = cfg.hidden_act;
    FilterBank hid{"hid", BankMode::axon, {}, {2, 3, 4}};
    for (double lam : wl) hid.rings.push_back(RingModel::from_fwhm(lam, 2.0 * a.gamma, a.atten));
    FilterBank out{"out", BankMode::dendrite, {ring(wl[0]), ring(wl[1]), ring(wl[2])}, {11, 12, 13}};

    std::vector<DeviceNode> branch1{DeviceNode::make_bank(in), DeviceNode::splitter(std::move(hidden_banks))};
    std::vector<DeviceNode> branch2{DeviceNode::make_bank(hid), DeviceNode::splitter({DeviceNode::make_bank(out)})};
    net.device.root = DeviceNode::splitter(
        {DeviceNode::cascade(std::move(branch1)), DeviceNode::cascade(std::move(branch2))});

    std::vector<int> channels(14);
    std::vector<double> bias(14, cfg.dendrite_bias_mW);
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(14, 14);
    for (int c = 0; c < 14; ++c) {
        channels[static_cast<std::size_t>(c)] = c;
        K(c, c) = cfg.input_K;
    }
    for (int j = 0; j < 2; ++j) bias[static_cast<std::size_t>(j)] = cfg.input_bias_mA[j] * cfg.input_bias_mA[j] * R / 1000.0;
    for (int c : net.hidden_axons) {
        bias[static_cast<std::size_t>(c)] = a.Ib * a.Ib * R / 1000.0;
        K(c, c) = hidden_K(cfg);
    }
    net.device.thermal = ThermalGroup(channels, K, bias, R);
    net.device.attenuation = cfg.attenuation;
    net.device.validate();

    CalibrationModel& m = net.dendrite_model;
    const FilterShape shape = lorentz_shape(cfg.ring_fwhm / 2.0, cfg.ring_atten, 1.0, 0.0005);
    for (int c = 5; c < 14; ++c) {
        const double lam = wl[static_cast<std::size_t>(c < 11 ? (c - 5) % 2 : c - 11)];
        m.channel_order.push_back(c);
        m.roles.push_back(RingRole::dendrite);
        m.ring_wl.push_back(lam);
        m.lam_bias.push_back(lam);
        m.heat_bias.push_back(cfg.dendrite_bias_mW);
        m.filter_shapes.push_back(shape);
    }
    m.K_est = Eigen::MatrixXd::Identity(9, 9) * cfg.input_K;
    m.attenuation_est = cfg.attenuation;
    m.validate();
    return net;
}

VirtualParams reference_network_params()
{
    VirtualParams vp;
    vp.W0 << 1.30109513, 0.90975827, -0.79916418, -0.85981083, 0.9742766, -1.02000749;
    vp.W1 << -0.416287088, 1.124845219, -0.90137167;
    vp.B0 << 1.0609535, 0.65707952, -0.01618425;
    vp.B1 = 0.4359157047300002;
    return vp;
}

Eigen::Vector3d reference_hidden_target() { return {2.60217079, -0.52201333, -0.17577987}; }

Eigen::Vector2d reference_input_drive() { return {0.1, 0.1}; }

Network231Config reference_network_config()
{
    Network231Config cfg;
    const Eigen::Vector2d x0 = implied_inputs(reference_network_params(), reference_hidden_target());
    cfg.input_bias_mA = input_bias_for(cfg, x0, reference_input_drive());
    return cfg;
}

Eigen::Vector2d implied_inputs(const VirtualParams& vp, const Eigen::Vector3d& hidden_target)
{
    const Eigen::Vector3d rhs = hidden_target - vp.B0;
    return vp.W0.colPivHouseholderQr().solve(rhs);
}

Eigen::Vector2d input_bias_for(const Network231Config& cfg, const Eigen::Vector2d& x0, const Eigen::Vector2d& drive_mA)
{
    const double gamma = cfg.ring_fwhm / 2.0;
    const double a = cfg.ring_atten;
    Eigen::Vector2d bias;
    for (int j = 0; j < 2; ++j) {
        if (!(x0[j] >= 1.0 - a && x0[j] < 1.0)) throw std::domain_error("input transmission outside the axon's range");
        if (!(drive_mA[j] > 0.0)) throw std::invalid_argument("drive current must be positive");
        const double detune = gamma * std::sqrt(a / (1.0 - x0[j]) - 1.0);
        const double dp = detune / cfg.input_K;
        const double c = drive_mA[j];
        bias[j] = (1000.0 * dp / cfg.heater_resistance - c * c) / (2.0 * c);
        if (bias[j] < 0.0) throw std::domain_error("requested input needs a negative bias current");
    }
    return bias;
}

NetworkDrive weights_to_network_drive(const Network231& net, const PhysicalParams& pp)
{
    std::vector<double> t;
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 2; ++j) t.push_back((pp.w23(k, j) + 1.0) / 2.0);
    for (int j = 0; j < 3; ++j) t.push_back((pp.w31[j] + 1.0) / 2.0);
    for (double v : t)
        if (!(v >= 0.0 && v <= 1.0)) throw UnrealizableWeight("physical weight outside [-1, 1]");
    NetworkDrive d;
    d.dendrites = weights_to_drive(net.dendrite_model, t, {}, true);
    return d;
}

NetworkState simulate_network(const Network231& net, const PhysicalParams& pp, const NetworkDrive& drive,
                              const Eigen::Vector2d& input_mA)
{
    const auto& cfg = net.cfg;
    const double R = cfg.heater_resistance;
    DriveState d = drive.dendrites;
    if (d.unit != DriveUnit::mW) throw std::invalid_argument("dendrite drive must be in mW");
    for (int j = 0; j < 2; ++j)
        d.values[net.input_axons[static_cast<std::size_t>(j)]] =
            delta_power(cfg.input_bias_mA[j] + input_mA[j], cfg.input_bias_mA[j], R);
    for (int c : net.hidden_axons) d.values[c] = 0.0;

    NetworkState s;
    const auto x0 = axon_reading(net, d, "in", 2);
    s.x0 = {x0[0], x0[1]};

    ReadoutParams hidden = cfg.circuit.hidden;
    for (int k = 0; k < 3; ++k) {
        const std::string b = "h" + std::to_string(k);
        const double c = balanced_current({port_power(net, d, b + ".thru"), port_power(net, d, b + ".drop")}, hidden.resp);
        hidden.bc = pp.axon_bias[k];
        s.hidden_current[k] = amplifier_chain(c, hidden);
    }

    const double Ib = cfg.hidden_act.Ib;
    for (int k = 0; k < 3; ++k)
        d.values[net.hidden_axons[static_cast<std::size_t>(k)]] = delta_power(Ib + s.hidden_current[k], Ib, R);
    const auto x1 = axon_reading(net, d, "hid", 3);
    s.x1 = {x1[0], x1[1], x1[2]};

    ReadoutParams output = cfg.circuit.output;
    output.bc = pp.out_bias;
    const double c1 = balanced_current({port_power(net, d, "out.thru"), port_power(net, d, "out.drop")}, output.resp);
    s.y = amplifier_chain(c1, output);
    return s;
}

namespace {

double interp_axis(const std::vector<double>& axis, double v, std::size_t& i0)
{
    if (v <= axis.front()) {
        i0 = 0;
        return 0.0;
    }
    if (v >= axis.back()) {
        i0 = axis.size() - 2;
        return 1.0;
    }
    const auto it = std::upper_bound(axis.begin(), axis.end(), v);
    i0 = static_cast<std::size_t>(it - axis.begin()) - 1;
    return (v - axis[i0]) / (axis[i0 + 1] - axis[i0]);
}

} // namespace

SweepResult sweep_network(const Network231& net, const PhysicalParams& pp, int sweep_n, int threads,
                          double max_drive_mA, double grid_step, double grid_max)
{
    if (sweep_n < 2) throw std::invalid_argument("sweep needs at least two points per input");
    if (!(grid_step > 0.0 && grid_max > 0.0)) throw std::invalid_argument("grid step and extent must be positive");
    const NetworkDrive drive = weights_to_network_drive(net, pp);

    SweepResult r;
    const auto n = static_cast<std::size_t>(sweep_n);
    for (std::size_t i = 0; i < n; ++i) r.drive_mA.push_back(max_drive_mA * static_cast<double>(i) / static_cast<double>(n - 1));
    r.raw = Eigen::MatrixXd::Zero(sweep_n, sweep_n);
    Eigen::MatrixXd x0a = Eigen::MatrixXd::Zero(sweep_n, sweep_n), x0b = x0a;

    auto row = [&](std::size_t i) {
        for (std::size_t j = 0; j < n; ++j) {
            const NetworkState s = simulate_network(net, pp, drive, {r.drive_mA[i], r.drive_mA[j]});
            const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
            r.raw(ii, jj) = s.y;
            x0a(ii, jj) = s.x0[0];
            x0b(ii, jj) = s.x0[1];
        }
    };
    unsigned nt = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
    nt = std::min<unsigned>(nt, static_cast<unsigned>(n));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nt; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += nt) row(i);
        });
    for (auto& th : pool) th.join();

    r.x0_axis[0].assign(n, 0.0);
    r.x0_axis[1].assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        r.x0_axis[0][i] = x0a.row(static_cast<Eigen::Index>(i)).mean();
        r.x0_axis[1][i] = x0b.col(static_cast<Eigen::Index>(i)).mean();
    }
    for (int k = 0; k < 2; ++k)
        if (!std::is_sorted(r.x0_axis[k].begin(), r.x0_axis[k].end()))
            throw std::runtime_error("normalized input is not monotone in the drive current");

    const auto m = static_cast<std::size_t>(std::lround(grid_max / grid_step));
    for (std::size_t k = 0; k < m; ++k) r.grid.push_back(static_cast<double>(k) * grid_step);
    const auto mg = static_cast<Eigen::Index>(m);
    r.surface = Eigen::MatrixXd::Zero(mg, mg);
    r.sign = Eigen::MatrixXi::Zero(mg, mg);
    for (std::size_t a = 0; a < m; ++a) {
        std::size_t i0 = 0, j0 = 0;
        const double u = interp_axis(r.x0_axis[0], r.grid[a], i0);
        for (std::size_t b = 0; b < m; ++b) {
            const double v = interp_axis(r.x0_axis[1], r.grid[b], j0);
            const auto I = static_cast<Eigen::Index>(i0), J = static_cast<Eigen::Index>(j0);
            const double z = (1 - u) * (1 - v) * r.raw(I, J) + u * (1 - v) * r.raw(I + 1, J) +
                             (1 - u) * v * r.raw(I, J + 1) + u * v * r.raw(I + 1, J + 1);
            const auto A = static_cast<Eigen::Index>(a), B = static_cast<Eigen::Index>(b);
            r.surface(A, B) = z;
            r.sign(A, B) = (z > 0.0) - (z < 0.0);
        }
    }
    return r;
}

} // namespace ringsim
