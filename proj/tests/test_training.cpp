#include "ringsim/rng.hpp"
#include "ringsim/training.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ringsim;

namespace {

// Flattened view of the 15 parameters: W0 (row-major), B0, W1, B1.
std::vector<double> flat(const VirtualParams& vp)
{
    std::vector<double> v;
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 2; ++j) v.push_back(vp.W0(k, j));
    for (int k = 0; k < 3; ++k) v.push_back(vp.B0[k]);
    for (int k = 0; k < 3; ++k) v.push_back(vp.W1[k]);
    v.push_back(vp.B1);
    return v;
}

VirtualParams unflat(const std::vector<double>& v)
{
    VirtualParams vp;
    int i = 0;
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 2; ++j) vp.W0(k, j) = v[i++];
    for (int k = 0; k < 3; ++k) vp.B0[k] = v[i++];
    for (int k = 0; k < 3; ++k) vp.W1[k] = v[i++];
    vp.B1 = v[i];
    return vp;
}

double block_rel_err(const std::vector<double>& a, const std::vector<double>& b, int lo, int hi)
{
    double num = 0.0, den = 0.0;
    for (int i = lo; i < hi; ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return den < 1e-24 ? std::sqrt(num) : std::sqrt(num / den);
}

std::vector<int> sign_grid(const VirtualParams& vp, const Activation& act, int n = 32)
{
    std::vector<int> s;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const Eigen::Vector2d x(0.8 * i / (n - 1), 0.8 * j / (n - 1));
            s.push_back(forward(vp, act, x).y >= 0.0 ? 1 : -1);
        }
    return s;
}

} // namespace

TEST_CASE("activation examples")
{
    Activation act;
    CHECK(activation_f(act, 0.0) == doctest::Approx(0.02));
    Activation a1;
    a1.atten = 1.0;
    CHECK(a1.g(1.0) == doctest::Approx(0.26));
    CHECK(activation_f(a1, 1.0) == doctest::Approx(0.26 * 0.26 / (0.01 + 0.26 * 0.26)));
    CHECK(activation_f(a1, 1.0) == doctest::Approx(0.8711).epsilon(1e-4));
    CHECK(activation_f(act, 200.0) > 0.999);
    CHECK_THROWS(activation_f(act, -6.5));
    CHECK(activation_df(act, -act.Ib) == 0.0);

    double prev = activation_f(act, -act.Ib);
    for (int k = 1; k <= 400; ++k) {
        const double x = -act.Ib + 0.05 * k;
        const double f = activation_f(act, x);
        // g dips below zero between -Ib and 0, so f only rises from x = 0 on.
        if (x >= 0.0) {
            CHECK(activation_df(act, x) >= 0.0);
            if (x > 1e-9) CHECK(f >= prev);
        } else {
            CHECK(activation_df(act, x) <= 0.0);
        }
        prev = f;
    }
}

TEST_CASE("activation derivative matches central differences")
{
    for (double atten : {0.98, 1.0})
        for (double x : {-0.4, -0.2, 0.0, 0.2, 0.4, 1.5}) {
            Activation act;
            act.atten = atten;
            const double h = 1e-4;
            const double fd = (activation_f(act, x + h) - activation_f(act, x - h)) / (2 * h);
            CHECK(activation_df(act, x) == doctest::Approx(fd).epsilon(1e-3));
        }

    // Tabulated shape from the same Lorentzian behaves like the analytic one.
    Activation tab;
    FilterShape f;
    for (int k = -300; k <= 300; ++k) {
        const double d = 0.005 * k;
        f.rel_nm.push_back(d);
        f.transmission.push_back(1.0 - 0.98 * 0.01 / (0.01 + d * d));
    }
    tab.shape = f;
    for (double x : {0.0, 0.3, 1.0, 2.0}) CHECK(activation_f(tab, x) == doctest::Approx(activation_f(Activation{}, x)).epsilon(0.01));
}

TEST_CASE("XOR data")
{
    const auto d = generate_xor(5);
    REQUIRE(d.x.size() == 400);
    int pos = 0;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
        CHECK(d.x[i].minCoeff() >= 0.0);
        CHECK(d.x[i].maxCoeff() <= 0.8);
        pos += d.label[i] == 1;
        const bool same_side = (d.x[i][0] < 0.4) == (d.x[i][1] < 0.4);
        if (std::abs(d.x[i][0] - 0.4) > 1e-12 && std::abs(d.x[i][1] - 0.4) > 1e-12) CHECK(same_side == (d.label[i] == 1));
    }
    CHECK(pos == 200);
    const auto e = generate_xor(5);
    CHECK(d.x == e.x);
    CHECK(d.label == e.label);
    CHECK(generate_xor(6).x != d.x);
    const auto s = swap_labels(d);
    for (std::size_t i = 0; i < d.label.size(); ++i) CHECK(s.label[i] == -d.label[i]);
}

TEST_CASE("forward with zero weights")
{
    VirtualParams vp;
    vp.W1 << 1.0, 2.0, -0.5;
    vp.B1 = 0.3;
    const Activation act;
    const auto r = forward(vp, act, {0.4, 0.7});
    for (int k = 0; k < 3; ++k) CHECK(r.hidden[k] == doctest::Approx(0.02));
    CHECK(r.y == doctest::Approx(0.02 * 2.5 + 0.3));
}

TEST_CASE("update directions are minus the cost gradient")
{
    std::mt19937_64 gen(17);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 0.8);
    const Activation act;
    for (CostMode mode : {CostMode::squared_error, CostMode::softmax_cross_entropy}) {
        int bad = 0;
        for (int trial = 0; trial < 100; ++trial) {
            const VirtualParams vp = random_params(derive_seed(23, trial));
            const Eigen::Vector2d x(u(gen), u(gen));
            const int d = trial % 2 ? 1 : -1;
            const auto dir = flat(update_direction(vp, act, x, d, mode));
            auto p = flat(vp);
            std::vector<double> fd(p.size());
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double h = 1e-6 * std::max(1.0, std::abs(p[i]));
                auto a = p, b = p;
                a[i] += h;
                b[i] -= h;
                fd[i] = -(sample_cost(unflat(a), act, x, d, mode) - sample_cost(unflat(b), act, x, d, mode)) / (2 * h);
            }
            // Blocks: W0, B0, W1, B1.
            for (auto [lo, hi] : {std::pair{0, 6}, std::pair{6, 9}, std::pair{9, 12}, std::pair{12, 13}})
                if (block_rel_err(dir, fd, lo, hi) > 1e-3) ++bad;
        }
        CHECK(bad == 0);
    }
}

TEST_CASE("SGD on a single point lowers the cost")
{
    XorData one;
    one.x.push_back({0.3, 0.5});
    one.label.push_back(1);
    TrainingConfig cfg;
    cfg.eta = 1e-3;
    cfg.epochs = 10;
    const Activation act;
    const auto r = train(one, cfg, act, random_params(3));
    REQUIRE(r.curve.size() == 11);
    for (std::size_t i = 1; i < r.curve.size(); ++i) CHECK(r.curve[i].cost < r.curve[i - 1].cost);
    cfg.eta = 0.0;
    CHECK_THROWS(train(one, cfg, act));
    CHECK_THROWS(train(XorData{}, TrainingConfig{}, act));
}

TEST_CASE("sign of y is invariant to positive output scaling")
{
    const Activation act;
    const auto vp = reference_xor_params();
    const auto base = sign_grid(vp, act);
    for (double c : {0.01, 0.5, 3.0, 1e3}) {
        VirtualParams s = vp;
        s.W1 *= c;
        s.B1 *= c;
        CHECK(sign_grid(s, act) == base);
    }
}

TEST_CASE("swapping the labels negates the decision")
{
    const Activation act;
    const auto data = generate_xor(substream_seed(1, "data-gen"));
    TrainingConfig cfg;
    cfg.epochs = 20000;
    cfg.stop_accuracy = 0.98;
    cfg.seed = derive_seed(1, 1);
    const auto a = train(data, cfg, act);
    const auto b = train(swap_labels(data), cfg, act);
    REQUIRE(a.accuracy >= 0.98);
    REQUIRE(b.accuracy >= 0.98);
    const auto sa = sign_grid(a.params, act), sb = sign_grid(b.params, act);
    int flipped = 0;
    for (std::size_t i = 0; i < sa.size(); ++i) flipped += sa[i] == -sb[i];
    CHECK(flipped >= 0.95 * static_cast<double>(sa.size()));
}

TEST_CASE("virtual to physical conversion")
{
    const NetworkCircuit c;
    VirtualParams vp;
    vp.W0(0, 0) = 1.30109513;
    const auto pp = virtual_to_physical(vp, c);
    CHECK(pp.w23(0, 0) == doctest::Approx(0.5782645).epsilon(1e-6));
    CHECK(pp.w23(1, 1) == 0.0);
    CHECK(pp.w31.cwiseAbs().maxCoeff() == 0.0);

    // W x = w * Rt * Resp * p / (split * Rs).
    const double g23 = c.hidden.rt * c.hidden.resp * c.p / (c.hidden_split * c.hidden.rs);
    const double g31 = c.output.rt * c.output.resp * c.p / (c.output_split * c.output.rs);
    std::mt19937_64 gen(29);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        VirtualParams v;
        for (int k = 0; k < 3; ++k) {
            v.W0(k, 0) = u(gen) * g23;
            v.W0(k, 1) = u(gen) * g23;
            v.W1[k] = u(gen) * g31;
            v.B0[k] = 3.0 * u(gen);
        }
        v.B1 = u(gen);
        const auto p = virtual_to_physical(v, c);
        for (int k = 0; k < 3; ++k) {
            CHECK(p.w23(k, 0) == doctest::Approx(v.W0(k, 0) / g23));
            CHECK(p.w31[k] == doctest::Approx(v.W1[k] / g31));
        }
        const auto back = physical_to_virtual(p, c);
        CHECK((flat(back).size() == 13));
        const auto fa = flat(back), fb = flat(v);
        for (std::size_t i = 0; i < fa.size(); ++i) CHECK(fa[i] == doctest::Approx(fb[i]).epsilon(1e-12).scale(1.0));
    }
    VirtualParams big;
    big.W0(2, 1) = 1.5 * g23;
    CHECK_THROWS_AS(virtual_to_physical(big, c), UnrealizableWeight);
    VirtualParams big_out;
    big_out.W1[0] = -1.01 * g31;
    CHECK_THROWS_AS(virtual_to_physical(big_out, c), UnrealizableWeight);
}

TEST_CASE("virtual parameter JSON round trip")
{
    const auto vp = reference_xor_params();
    const auto back = VirtualParams::from_json(nlohmann::json::parse(vp.to_json().dump()));
    CHECK(flat(back) == flat(vp));
    auto j = vp.to_json();
    j["W0"] = {1, 2};
    CHECK_THROWS(VirtualParams::from_json(j));
    CHECK(parse_cost_mode(to_string(CostMode::softmax_cross_entropy)) == CostMode::softmax_cross_entropy);
    CHECK_THROWS(parse_cost_mode("hinge"));
}
