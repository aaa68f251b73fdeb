#include "ringsim/training.hpp"

#include "ringsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ringsim {

void Activation::validate() const
{
    if (!(gamma > 0.0)) throw std::invalid_argument("activation gamma must be positive");
    if (!(atten >= 0.0 && atten <= 1.0)) throw std::invalid_argument("activation atten must lie in [0, 1]");
    if (!(scale > 0.0)) throw std::invalid_argument("activation scale must be positive");
    if (!(Ib >= 0.0)) throw std::invalid_argument("activation bias current must be nonnegative");
    if (shape && (shape->rel_nm.size() < 2 || shape->rel_nm.size() != shape->transmission.size()))
        throw std::invalid_argument("tabulated activation shape is malformed");
}

double Activation::g(double x) const { return thK * (x * x + 2.0 * Ib * x) / scale; }

double Activation::dg(double x) const { return thK * (2.0 * x + 2.0 * Ib) / scale; }

double Activation::h(double d) const
{
    if (shape) return shape->at(d);
    const double g2 = gamma * gamma;
    return 1.0 - atten * g2 / (g2 + d * d);
}

double Activation::dh(double d) const
{
    if (shape) {
        const auto& x = shape->rel_nm;
        const auto& t = shape->transmission;
        if (d <= x.front() || d >= x.back()) return 0.0;
        const auto it = std::upper_bound(x.begin(), x.end(), d);
        const auto j = static_cast<std::size_t>(it - x.begin());
        return (t[j] - t[j - 1]) / (x[j] - x[j - 1]);
    }
    const double g2 = gamma * gamma;
    const double q = g2 + d * d;
    return 2.0 * atten * g2 * d / (q * q);
}

double activation_f(const Activation& act, double x)
{
    if (x < -act.Ib) throw std::domain_error("activation input below -Ib (negative total current)");
    return act.h(act.g(x));
}

double activation_df(const Activation& act, double x)
{
    if (x < -act.Ib) throw std::domain_error("activation input below -Ib (negative total current)");
    return act.dh(act.g(x)) * act.dg(x);
}

void VirtualParams::validate() const
{
    if (!W0.allFinite() || !B0.allFinite() || !W1.allFinite() || !std::isfinite(B1))
        throw std::invalid_argument("virtual parameters must be finite");
}

nlohmann::json VirtualParams::to_json() const
{
    nlohmann::json j;
    j["W0"] = {{W0(0, 0), W0(0, 1)}, {W0(1, 0), W0(1, 1)}, {W0(2, 0), W0(2, 1)}};
    j["B0"] = {B0[0], B0[1], B0[2]};
    j["W1"] = {W1[0], W1[1], W1[2]};
    j["B1"] = B1;
    return j;
}

VirtualParams VirtualParams::from_json(const nlohmann::json& j)
{
    VirtualParams vp;
    const auto w0 = j.at("W0").get<std::vector<std::vector<double>>>();
    const auto b0 = j.at("B0").get<std::vector<double>>();
    const auto w1 = j.at("W1").get<std::vector<double>>();
    if (w0.size() != 3 || b0.size() != 3 || w1.size() != 3) throw std::invalid_argument("expected a 2-3-1 network");
    for (int k = 0; k < 3; ++k) {
        if (w0[static_cast<std::size_t>(k)].size() != 2) throw std::invalid_argument("W0 rows take two inputs");
        vp.W0(k, 0) = w0[static_cast<std::size_t>(k)][0];
        vp.W0(k, 1) = w0[static_cast<std::size_t>(k)][1];
        vp.B0[k] = b0[static_cast<std::size_t>(k)];
        vp.W1[k] = w1[static_cast<std::size_t>(k)];
    }
    vp.B1 = j.at("B1").get<double>();
    vp.validate();
    return vp;
}

VirtualParams reference_xor_params()
{
    VirtualParams vp;
    vp.W0 << 1.30109513, 0.90975827, -0.79916418, -0.85981083, 0.9742766, -1.02000749;
    vp.W1 << -4.16287088, 11.24845219, -9.0137167;
    vp.B0 << 1.0609535, 0.65707952, 0.01618425;
    vp.B1 = 2.17837;
    return vp;
}

XorData generate_xor(std::uint64_t seed, int per_cluster)
{
    if (per_cluster < 1) throw std::invalid_argument("per_cluster must be positive");
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double centers[4][2] = {{0.2, 0.2}, {0.6, 0.6}, {0.2, 0.6}, {0.6, 0.2}};
    XorData d;
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < per_cluster; ++i) {
            Eigen::Vector2d p;
            for (int k = 0; k < 2; ++k) p[k] = std::clamp(u(rng) * 0.2 + centers[c][k], 0.0, 0.8);
            d.x.push_back(p);
            d.label.push_back(c < 2 ? 1 : -1);
        }
    return d;
}

XorData swap_labels(XorData d)
{
    for (int& l : d.label) l = -l;
    return d;
}

ForwardResult forward(const VirtualParams& vp, const Activation& act, const Eigen::Vector2d& x)
{
    ForwardResult r;
    r.pre = vp.W0 * x + vp.B0;
    // Unchecked below -Ib: g is symmetric about -Ib, which keeps training smooth there.
    for (int k = 0; k < 3; ++k) r.hidden[k] = act.h(act.g(r.pre[k]));
    r.y = vp.W1.dot(r.hidden) + vp.B1;
    return r;
}

CostMode parse_cost_mode(const std::string& s)
{
    if (s == "squared-error") return CostMode::squared_error;
    if (s == "softmax-cross-entropy") return CostMode::softmax_cross_entropy;
    throw std::invalid_argument("unknown cost mode '" + s + "'");
}

std::string to_string(CostMode m)
{
    return m == CostMode::squared_error ? "squared-error" : "softmax-cross-entropy";
}

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// Minus dC/dy.
double output_error(double y, int d, CostMode mode)
{
    if (mode == CostMode::squared_error) return static_cast<double>(d) - y;
    return static_cast<double>(d) * sigmoid(-static_cast<double>(d) * y);
}

} // namespace

double sample_cost(const VirtualParams& vp, const Activation& act, const Eigen::Vector2d& x, int d, CostMode mode)
{
    const double y = forward(vp, act, x).y;
    if (mode == CostMode::squared_error) return 0.5 * (d - y) * (d - y);
    return softplus(-static_cast<double>(d) * y);
}

VirtualParams update_direction(const VirtualParams& vp, const Activation& act, const Eigen::Vector2d& x, int d,
                               CostMode mode)
{
    const ForwardResult f = forward(vp, act, x);
    const double e = output_error(f.y, d, mode);
    VirtualParams g;
    g.W1 = e * f.hidden;
    g.B1 = e;
    for (int k = 0; k < 3; ++k) {
        const double back = e * vp.W1[k] * act.dh(act.g(f.pre[k])) * act.dg(f.pre[k]);
        g.B0[k] = back;
        g.W0.row(k) = back * x.transpose();
    }
    return g;
}

double accuracy(const VirtualParams& vp, const Activation& act, const XorData& data)
{
    std::size_t ok = 0;
    for (std::size_t i = 0; i < data.x.size(); ++i)
        if ((forward(vp, act, data.x[i]).y > 0.0) == (data.label[i] > 0)) ++ok;
    return static_cast<double>(ok) / static_cast<double>(data.x.size());
}

double mean_cost(const VirtualParams& vp, const Activation& act, const XorData& data, CostMode mode)
{
    double s = 0.0;
    for (std::size_t i = 0; i < data.x.size(); ++i) s += sample_cost(vp, act, data.x[i], data.label[i], mode);
    return s / static_cast<double>(data.x.size());
}

void TrainingConfig::validate() const
{
    if (!(eta > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (epochs < 0) throw std::invalid_argument("epochs must be nonnegative");
}

VirtualParams random_params(std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    VirtualParams vp;
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 2; ++j) vp.W0(k, j) = n(rng);
    for (int k = 0; k < 3; ++k) vp.W1[k] = n(rng);
    for (int k = 0; k < 3; ++k) vp.B0[k] = n(rng);
    vp.B1 = n(rng);
    return vp;
}

TrainingResult train(const XorData& data, const TrainingConfig& cfg, const Activation& act)
{
    return train(data, cfg, act, random_params(substream_seed(cfg.seed, "training-init")));
}

TrainingResult train(const XorData& data, const TrainingConfig& cfg, const Activation& act, VirtualParams vp)
{
    cfg.validate();
    act.validate();
    vp.validate();
    if (data.x.empty() || data.x.size() != data.label.size()) throw std::invalid_argument("training data is empty");

    TrainingResult r;
    auto log_epoch = [&](int epoch) {
        const double acc = accuracy(vp, act, data);
        r.curve.push_back({epoch, mean_cost(vp, act, data, cfg.cost), 1.0 - acc});
        r.accuracy = acc;
    };
    log_epoch(0);
    const double initial = r.curve.front().cost;

    Rng rng(substream_seed(cfg.seed, "training-shuffle"));
    std::vector<std::size_t> order(data.x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    int above = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i : order) {
            const VirtualParams g = update_direction(vp, act, data.x[i], data.label[i], cfg.cost);
            vp.W0 += cfg.eta * g.W0;
            vp.B0 += cfg.eta * g.B0;
            vp.W1 += cfg.eta * g.W1;
            vp.B1 += cfg.eta * g.B1;
        }
        log_epoch(epoch);
        const double c = r.curve.back().cost;
        above = (!std::isfinite(c) || c > 10.0 * initial) ? above + 1 : 0;
        if (above >= 50) {
            r.params = vp;
            throw TrainingDiverged("training diverged: mean cost above 10x its initial value for 50 epochs",
                                   std::move(r));
        }
        if (r.accuracy >= cfg.stop_accuracy) break;
    }
    r.params = vp;
    return r;
}

PhysicalParams virtual_to_physical(const VirtualParams& vp, const NetworkCircuit& c)
{
    vp.validate();
    c.hidden.validate();
    c.output.validate();
    const double g_hidden = c.hidden.rt * c.hidden.resp * c.p / (c.hidden_split * c.hidden.rs);
    const double g_out = c.output.rt * c.output.resp * c.p / (c.output_split * c.output.rs);
    PhysicalParams pp;
    pp.w23 = vp.W0 / g_hidden;
    pp.w31 = vp.W1 / g_out;
    // The unweighted bias channel adds one full-transmission term per bank.
    pp.axon_bias = vp.B0.array() - g_hidden - c.hidden.bv / c.hidden.rs;
    pp.out_bias = vp.B1 - c.output.bv / c.output.rs;
    const double worst = std::max(pp.w23.cwiseAbs().maxCoeff(), pp.w31.cwiseAbs().maxCoeff());
    if (worst > 1.0)
        throw UnrealizableWeight("physical weight magnitude " + std::to_string(worst) +
                                 " exceeds 1; lower the virtual weights or raise the amplifier gain");
    return pp;
}

VirtualParams physical_to_virtual(const PhysicalParams& pp, const NetworkCircuit& c)
{
    const double g_hidden = c.hidden.rt * c.hidden.resp * c.p / (c.hidden_split * c.hidden.rs);
    const double g_out = c.output.rt * c.output.resp * c.p / (c.output_split * c.output.rs);
    VirtualParams vp;
    vp.W0 = pp.w23 * g_hidden;
    vp.W1 = pp.w31 * g_out;
    vp.B0 = pp.axon_bias.array() + g_hidden + c.hidden.bv / c.hidden.rs;
    vp.B1 = pp.out_bias + c.output.bv / c.output.rs;
    return vp;
}

} // namespace ringsim
