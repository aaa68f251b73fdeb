#include "ringsim/calibration.hpp"
#include "ringsim/rng.hpp"

#include <doctest.h>

#include <random>

using namespace ringsim;

namespace {

OsaConfig quiet()
{
    OsaConfig o;
    o.noise_amplitude = 0.0;
    return o;
}

// Thru transmission the hidden device actually realizes at each channel for a model drive.
std::vector<double> realized(const HiddenPlant& plant, const CalibrationModel& model, const DriveState& d)
{
    const DriveState truth = plant.device.thermal.from_absolute(model.absolute(d));
    const OsaConfig o = quiet();
    auto p = channel_powers(plant.device, truth, plant.tap, plant.wl_channels, o);
    for (double& v : p) v /= o.pump_power * plant.device.attenuation;
    return p;
}

} // namespace

TEST_CASE("ascription recovers identity and scrambled heater orders")
{
    for (const std::vector<int>& heaters : {std::vector<int>{0, 1, 2, 3}, std::vector<int>{5, 3, 6, 4}}) {
        BasicDeviceParams p;
        p.heater_channels = heaters;
        const auto plant = make_basic_device(p, 3);
        Instrument inst(plant.device, plant.tap, OsaConfig{}, 8);
        SpectrumAssistant sa;
        sa.n_chan = 4;
        sa.window = {1530.0, 1559.0};
        const auto a = ascribe(inst, sa, plant.channels, plant.base_drive);
        CHECK(a.trough_channel == heaters);
        for (std::size_t j = 0; j < heaters.size(); ++j) {
            const double truth = plant.device.thermal.K()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
            CHECK(a.k_diag.at(heaters[j]) == doctest::Approx(truth).epsilon(0.25));
        }
    }
}

TEST_CASE("tracking to the current positions converges at once")
{
    BasicDeviceParams p;
    p.zero_crosstalk = true;
    const auto plant = make_basic_device(p, 4);
    Instrument inst(plant.device, plant.tap, quiet(), 0);
    SpectrumAssistant sa;
    sa.n_chan = 4;
    sa.window = {1530.0, 1559.0};
    const auto a = ascribe(inst, sa, plant.channels, plant.base_drive);
    inst.set_power(plant.base_drive);
    std::vector<double> now;
    for (const auto& f : sa.resonances(inst, 1)) now.push_back(f.lam);
    const auto tr = track_to_bias(inst, sa, a.trough_channel, now, ControllerConfig{}, a.k_diag, plant.base_drive);
    CHECK(tr.iterations <= 1);
    for (std::size_t j = 0; j < now.size(); ++j) CHECK(std::abs(tr.lam[j] - now[j]) < 0.005);

    ControllerConfig bad;
    bad.kp = 0.0;
    CHECK_THROWS(bad.validate());
    bad = {};
    bad.precision = -1.0;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("basic calibration: gates, contraction, read-only plant")
{
    const auto plant = make_basic_device(BasicDeviceParams{}, 21);
    const Eigen::MatrixXd K0 = plant.device.thermal.K();
    const auto bias0 = plant.device.thermal.heat_bias();
    const auto rings0 = plant.device.banks()[0]->rings;

    const auto noiseless = run_basic_calibration(plant, quiet(), 0);
    const auto& hist = noiseless.track.error_history;
    for (std::size_t i = 1; i < hist.size(); ++i) CHECK(hist[i] < hist[i - 1]);
    CHECK(validate_basic(noiseless.model, plant).pass());

    const auto noisy = run_basic_calibration(plant, OsaConfig{}, 99);
    CHECK(validate_basic(noisy.model, plant).pass());

    CHECK(plant.device.thermal.K() == K0);
    CHECK(plant.device.thermal.heat_bias() == bias0);
    const auto& rings1 = plant.device.banks()[0]->rings;
    for (std::size_t i = 0; i < rings0.size(); ++i) {
        CHECK(rings1[i].lam0 == rings0[i].lam0);
        CHECK(rings1[i].gamma == rings0[i].gamma);
    }
}

TEST_CASE("zero crosstalk device yields small off-diagonal estimates")
{
    BasicDeviceParams p;
    p.zero_crosstalk = true;
    const auto plant = make_basic_device(p, 5);
    const auto r = run_basic_calibration(plant, OsaConfig{}, 1);
    const auto& K = r.model.K_est;
    for (Eigen::Index i = 0; i < K.rows(); ++i)
        for (Eigen::Index j = 0; j < K.cols(); ++j)
            if (i != j) CHECK(K(i, j) < 0.1 * K(i, i));
}

TEST_CASE("weights to drive: full transmission is far off resonance, round trip within 2%")
{
    const auto plant = make_basic_device(BasicDeviceParams{}, 31);
    const auto cal = run_basic_calibration(plant, quiet(), 0);
    const auto& m = cal.model;

    const auto d1 = weights_to_drive(m, {1.0, 1.0, 1.0, 1.0}, {});
    for (std::size_t j = 0; j < 4; ++j) {
        const double det = invert_filter_shape(m.filter_shapes[j], 1.0);
        CHECK(det >= 5.0 * 0.2 - 1e-9);
    }
    const auto full = realized(plant, m, d1);
    for (double v : full) CHECK(v > 0.95);

    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> want(4);
        for (double& w : want) w = u(gen);
        const auto got = realized(plant, m, weights_to_drive(m, want, {}));
        for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(got[j] - want[j]) < 0.02);
    }
    CHECK_THROWS(weights_to_drive(m, {0.5, 0.5, 0.5}, {}));
    CHECK_THROWS(weights_to_drive(m, {0.5, 0.5, 0.5, 0.5}, {0.1}));
    CHECK_THROWS(weights_to_drive(m, {0.001, 0.5, 0.5, 0.5}, {}));
}

TEST_CASE("filter shape inversion picks the red branch")
{
    FilterShape f;
    for (int k = -70; k <= 70; ++k) {
        const double d = 0.01 * k;
        f.rel_nm.push_back(d);
        f.transmission.push_back(1.0 - 0.98 * 0.01 / (0.01 + d * d));
    }
    for (double t : {0.05, 0.3, 0.5, 0.9}) {
        const double d = invert_filter_shape(f, t);
        CHECK(d >= 0.0);
        const double exact = 0.1 * std::sqrt(0.98 / (1.0 - t) - 1.0);
        CHECK(d == doctest::Approx(exact).epsilon(0.02));
    }
    CHECK(invert_filter_shape(f, 0.02) == doctest::Approx(0.0));
    CHECK(invert_filter_shape(f, 0.99) == doctest::Approx(0.1 * std::sqrt(0.98 / 0.01 - 1.0)).epsilon(0.05));
    CHECK(invert_filter_shape(f, 0.999) == doctest::Approx(1.0));
    CHECK(invert_filter_shape(f, 1.0) == doctest::Approx(1.0));
    CHECK_THROWS(invert_filter_shape(f, 0.01));
    CHECK_THROWS(invert_filter_shape(f, 1.5));
}

TEST_CASE("calibration model JSON round trip")
{
    const auto plant = make_basic_device(BasicDeviceParams{}, 41);
    const auto m = run_basic_calibration(plant, OsaConfig{}, 2).model;
    const auto back = CalibrationModel::from_json(nlohmann::json::parse(m.to_json().dump()));
    CHECK(back.channel_order == m.channel_order);
    CHECK(back.heat_bias == m.heat_bias);
    CHECK(back.lam_bias == m.lam_bias);
    CHECK(back.ring_wl == m.ring_wl);
    CHECK(back.roles == m.roles);
    CHECK(back.K_est == m.K_est);
    CHECK(back.attenuation_est == m.attenuation_est);
    REQUIRE(back.filter_shapes.size() == m.filter_shapes.size());
    for (std::size_t i = 0; i < m.filter_shapes.size(); ++i) {
        CHECK(back.filter_shapes[i].rel_nm == m.filter_shapes[i].rel_nm);
        CHECK(back.filter_shapes[i].transmission == m.filter_shapes[i].transmission);
    }
    auto j = m.to_json();
    j["K_est"] = nlohmann::json::array();
    CHECK_THROWS(CalibrationModel::from_json(j));
}

TEST_CASE("alternating to grouped reordering")
{
    Eigen::MatrixXd A(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) A(i, j) = 10 * i + j;
    const auto G = alternating_to_grouped(A);
    const int perm[6] = {0, 2, 4, 1, 3, 5};
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) CHECK(G(i, j) == A(perm[i], perm[j]));
}

TEST_CASE("cascaded calibration: second pass skips phase one, zero crosstalk off-diagonals stay small")
{
    CascadedDeviceParams p;
    p.zero_crosstalk = true;
    const auto plant = make_cascaded_device(p, 7);
    const auto r = run_cascaded_calibration(plant, OsaConfig{}, 3);
    CHECK(r.converged);
    CHECK(r.passes_used >= 2);
    REQUIRE(r.merges.size() >= 6);
    for (std::size_t i = 3; i < r.merges.size(); ++i) CHECK(r.merges[i].phase1_iterations == 0);
    const auto& K = r.model.K_est;
    for (Eigen::Index i = 0; i < K.rows(); ++i)
        for (Eigen::Index j = 0; j < K.cols(); ++j)
            if (i != j) CHECK(K(i, j) < 0.5);
    CHECK(validate_cascaded(r, plant).pass());
}
