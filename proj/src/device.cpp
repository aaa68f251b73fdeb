#include "ringsim/device.hpp"

#include "ringsim/rng.hpp"

#include <cmath>
#include <functional>
#include <set>
#include <stdexcept>

namespace ringsim {

DeviceNode DeviceNode::make_bank(FilterBank b)
{
    if (b.rings.size() != b.channels.size())
        throw std::invalid_argument("bank '" + b.name + "': ring count must equal channel count");
    for (const auto& r : b.rings) r.validate();
    DeviceNode n;
    n.kind = Kind::bank;
    n.bank = std::move(b);
    return n;
}

DeviceNode DeviceNode::cascade(std::vector<DeviceNode> children)
{
    if (children.empty()) throw std::invalid_argument("cascade needs children");
    DeviceNode n;
    n.kind = Kind::cascade;
    n.children = std::move(children);
    return n;
}

DeviceNode DeviceNode::splitter(std::vector<DeviceNode> children)
{
    if (children.empty()) throw std::invalid_argument("splitter needs children");
    DeviceNode n;
    n.kind = Kind::splitter;
    n.children = std::move(children);
    return n;
}

namespace {

struct Signal {
    std::vector<double> t;
    bool tapped = false; // already exposed as a dendrite thru port
    std::string name;
};

using ShiftFn = std::function<double(int channel)>;

double bank_product(const FilterBank& b, const ShiftFn& shift, double lam)
{
    double p = 1.0;
    for (std::size_t i = 0; i < b.rings.size(); ++i) {
        RingModel r = b.rings[i];
        r.lam0 += shift(b.channels[i]);
        p *= lorentz_thru(r, lam);
    }
    return p;
}

// Walks the graph; taps are appended in depth-first order.
class Walker {
public:
    Walker(const ShiftFn& shift, const std::vector<double>* lams) : shift_(shift), lams_(lams) {}

    std::vector<std::string> names;
    std::vector<std::vector<double>> outputs;

    Signal run(const DeviceNode& node, Signal in)
    {
        switch (node.kind) {
        case DeviceNode::Kind::bank: return run_bank(node.bank, std::move(in));
        case DeviceNode::Kind::cascade: {
            Signal s = std::move(in);
            for (const auto& c : node.children) s = run(c, std::move(s));
            return s;
        }
        case DeviceNode::Kind::splitter: {
            const double share = 1.0 / static_cast<double>(node.children.size());
            for (const auto& c : node.children) {
                Signal s = in;
                s.tapped = false;
                for (auto& v : s.t) v *= share;
                Signal out = run(c, std::move(s));
                emit_dangling(out);
            }
            Signal none;
            none.tapped = true;
            return none;
        }
        }
        return in;
    }

    void emit_dangling(const Signal& s)
    {
        if (s.tapped) return;
        emit(s.name + ".thru", s.t);
    }

private:
    Signal run_bank(const FilterBank& b, Signal in)
    {
        Signal thru;
        thru.name = b.name;
        std::vector<double> drop;
        if (lams_) {
            thru.t.resize(in.t.size());
            drop.resize(in.t.size());
            for (std::size_t i = 0; i < in.t.size(); ++i) {
                const double p = bank_product(b, shift_, (*lams_)[i]);
                thru.t[i] = in.t[i] * p;
                drop[i] = in.t[i] * (1.0 - p);
            }
        }
        if (b.mode == BankMode::dendrite) {
            emit(b.name + ".thru", thru.t);
            emit(b.name + ".drop", drop);
            thru.tapped = true;
        }
        return thru;
    }

    void emit(std::string name, const std::vector<double>& v)
    {
        names.push_back(std::move(name));
        outputs.push_back(v);
    }

    const ShiftFn& shift_;
    const std::vector<double>* lams_;
};

void collect_banks(const DeviceNode& n, std::vector<const FilterBank*>& out)
{
    if (n.kind == DeviceNode::Kind::bank) {
        out.push_back(&n.bank);
        return;
    }
    for (const auto& c : n.children) collect_banks(c, out);
}

std::vector<std::vector<double>> walk(const Device& dev, const ShiftFn& shift, const std::vector<double>* lams,
                                      std::vector<std::string>* names)
{
    Walker w(shift, lams);
    Signal in;
    in.t.assign(lams ? lams->size() : 0, dev.attenuation);
    in.name = "root";
    Signal out = w.run(dev.root, std::move(in));
    w.emit_dangling(out);
    if (names) *names = w.names;
    return w.outputs;
}

} // namespace

void Device::validate() const
{
    if (!(attenuation > 0.0 && attenuation <= 1.0)) throw std::invalid_argument("attenuation must lie in (0, 1]");
    std::set<int> seen;
    std::set<std::string> bank_names;
    for (const FilterBank* b : banks()) {
        if (!bank_names.insert(b->name).second) throw std::invalid_argument("duplicate bank name '" + b->name + "'");
        for (int ch : b->channels) {
            if (thermal.channel_index(ch) < 0)
                throw std::invalid_argument("bank '" + b->name + "' uses undefined channel " + std::to_string(ch));
            if (!seen.insert(ch).second)
                throw std::invalid_argument("channel " + std::to_string(ch) + " is primary for more than one ring");
        }
    }
    if (static_cast<int>(seen.size()) != thermal.rings())
        throw std::invalid_argument("thermal group rows must equal the number of rings");
}

std::vector<OutputPort> Device::ports() const
{
    std::vector<std::string> names;
    walk(*this, [](int) { return 0.0; }, nullptr, &names);
    std::vector<OutputPort> out;
    for (auto& n : names) out.push_back({n});
    return out;
}

int Device::tap(const std::string& port_name) const
{
    const auto p = ports();
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i].name == port_name) return static_cast<int>(i);
    throw std::out_of_range("unknown output port '" + port_name + "'");
}

std::vector<const FilterBank*> Device::banks() const
{
    std::vector<const FilterBank*> out;
    collect_banks(root, out);
    return out;
}

const FilterBank& Device::bank(const std::string& name) const
{
    for (const FilterBank* b : banks())
        if (b->name == name) return *b;
    throw std::out_of_range("unknown bank '" + name + "'");
}

std::vector<double> Device::ring_positions(const DriveState& drive) const
{
    const Eigen::VectorXd s = wavelength_shifts(thermal, drive);
    std::vector<double> pos(thermal.channels().size(), 0.0);
    for (const FilterBank* b : banks())
        for (std::size_t i = 0; i < b->rings.size(); ++i) {
            const int row = thermal.channel_index(b->channels[i]);
            pos[static_cast<std::size_t>(row)] = b->rings[i].lam0 + s[row];
        }
    return pos;
}

void OsaConfig::validate() const
{
    if (!(pump_power > 0.0)) throw std::invalid_argument("pump power must be positive");
    if (!(spacing > 0.0)) throw std::invalid_argument("OSA spacing must be positive");
    if (!(noise_amplitude >= 0.0)) throw std::invalid_argument("noise amplitude must be nonnegative");
}

std::vector<double> transmission(const Device& dev, const DriveState& drive, int tap,
                                 const std::vector<double>& lams)
{
    const Eigen::VectorXd s = wavelength_shifts(dev.thermal, drive);
    const ShiftFn shift = [&](int ch) { return s[dev.thermal.channel_index(ch)]; };
    auto outs = walk(dev, shift, &lams, nullptr);
    if (tap < 0 || tap >= static_cast<int>(outs.size()))
        throw std::out_of_range("unknown tap " + std::to_string(tap));
    return outs[static_cast<std::size_t>(tap)];
}

std::vector<double> bank_thru(const FilterBank& bank, const std::vector<double>& ring_shifts,
                              const std::vector<double>& lams)
{
    if (ring_shifts.size() != bank.rings.size()) throw std::invalid_argument("one shift per ring required");
    std::vector<double> out(lams.size(), 1.0);
    for (std::size_t i = 0; i < lams.size(); ++i)
        for (std::size_t j = 0; j < bank.rings.size(); ++j) {
            RingModel r = bank.rings[j];
            r.lam0 += ring_shifts[j];
            out[i] *= lorentz_thru(r, lams[i]);
        }
    return out;
}

Spectrum simulate_spectrum(const Device& dev, const DriveState& drive, int tap, Window window,
                           const OsaConfig& osa, int avg_count)
{
    osa.validate();
    if (avg_count < 1) throw std::invalid_argument("avg_count must be >= 1");
    if (!(window.low > 0.0) || !(window.high > window.low)) throw std::invalid_argument("window is empty or nonpositive");
    const double start = std::round(window.low / osa.spacing) * osa.spacing;
    const double span = (window.high - start) / osa.spacing;
    if (span > 1e7) throw std::invalid_argument("window outside representable range");
    const auto n = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;

    Spectrum sp;
    sp.start = start;
    sp.spacing = osa.spacing;
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i) grid[i] = start + osa.spacing * static_cast<double>(i);
    const auto clean = transmission(dev, drive, tap, grid);

    std::vector<double> acc(n, 0.0);
    for (int d = 0; d < avg_count; ++d) {
        const auto noise = pink_noise(n, osa.noise_amplitude, derive_seed(osa.rng_seed, static_cast<std::uint64_t>(d)));
        for (std::size_t i = 0; i < n; ++i) acc[i] += clean[i] * std::pow(10.0, noise[i] / 10.0);
    }
    sp.power.resize(n);
    for (std::size_t i = 0; i < n; ++i) sp.power[i] = mw_to_dbm(osa.pump_power * acc[i] / avg_count);
    return sp;
}

std::vector<double> channel_powers(const Device& dev, const DriveState& drive, int tap,
                                   const std::vector<double>& channels, const OsaConfig& osa)
{
    osa.validate();
    auto t = transmission(dev, drive, tap, channels);
    for (auto& v : t) v *= osa.pump_power;
    return t;
}

} // namespace ringsim
