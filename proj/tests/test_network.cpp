#include "ringsim/network231.hpp"

#include <doctest.h>

#include <random>

using namespace ringsim;

TEST_CASE("reference parameters convert to the published physical weights")
{
    const auto pp = virtual_to_physical(reference_network_params(), NetworkCircuit{});
    CHECK(std::abs(pp.w23(0, 0) - 0.5782645) < 1e-6);
    const double w31[3] = {-0.30836081, 0.83321868, -0.66768272};
    for (int k = 0; k < 3; ++k) CHECK(std::abs(pp.w31[k] - w31[k]) < 1e-6);
    CHECK(pp.out_bias == doctest::Approx(0.4359157047300002));
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 2; ++j) CHECK(std::abs(pp.w23(k, j)) <= 1.0);
}

TEST_CASE("hidden currents at the reference drive")
{
    const auto cfg = reference_network_config();
    const auto net = make_network231(cfg);
    const auto vp = reference_network_params();
    const auto pp = virtual_to_physical(vp, cfg.circuit);
    const auto st = simulate_network(net, pp, weights_to_network_drive(net, pp), reference_input_drive());
    const Eigen::Vector3d target = reference_hidden_target();
    CHECK((st.hidden_current - target).cwiseAbs().maxCoeff() <= 0.05);
    const Eigen::Vector3d published(2.61785122, -0.48164702, -0.18952191);
    CHECK((st.hidden_current - published).cwiseAbs().maxCoeff() <= 0.05);
}

TEST_CASE("simulated hidden currents follow the virtual model at random inputs")
{
    const auto cfg = reference_network_config();
    const auto net = make_network231(cfg);
    const auto vp = reference_network_params();
    const auto pp = virtual_to_physical(vp, cfg.circuit);
    const auto drive = weights_to_network_drive(net, pp);
    std::mt19937_64 gen(31);
    std::uniform_real_distribution<double> u(0.0, 0.15);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Vector2d in(u(gen), u(gen));
        const auto st = simulate_network(net, pp, drive, in);
        const Eigen::Vector3d want = vp.W0 * st.x0 + vp.B0;
        CHECK((st.hidden_current - want).cwiseAbs().maxCoeff() <= 0.05);
    }
}

TEST_CASE("sweep results do not depend on the thread count")
{
    const auto cfg = reference_network_config();
    const auto net = make_network231(cfg);
    const auto pp = virtual_to_physical(reference_network_params(), cfg.circuit);
    const auto a = sweep_network(net, pp, 8, 1);
    const auto b = sweep_network(net, pp, 8, 4);
    CHECK(a.raw == b.raw);
    CHECK(a.surface == b.surface);
    CHECK(a.sign == b.sign);
    CHECK(a.grid == b.grid);
}

TEST_CASE("perceptron weights give a surface banded along the diagonal")
{
    const auto cfg = reference_network_config();
    const auto net = make_network231(cfg);
    auto pp = virtual_to_physical(reference_network_params(), cfg.circuit);
    pp.w23 << -0.8, 0.8, 0.8, -0.8, 0.0, 0.0;
    pp.w31 << 0.8, -0.8, 0.0;
    const auto s = sweep_network(net, pp, 16, 0);
    const Eigen::MatrixXd& z = s.surface;
    const double range = z.maxCoeff() - z.minCoeff();
    REQUIRE(range > 0.0);
    // y depends on x1 - x2 only, so it barely moves along lines of constant difference.
    double worst = 0.0;
    for (Eigen::Index i = 0; i + 1 < z.rows(); ++i)
        for (Eigen::Index j = 0; j + 1 < z.cols(); ++j) worst = std::max(worst, std::abs(z(i + 1, j + 1) - z(i, j)));
    CHECK(worst < 0.1 * range);
}
