#pragma once

#include "ringsim/analysis.hpp"
#include "ringsim/electronics.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ringsim {

// f(x) = h(g(x)): a quadratic current-to-detune map followed by the ring's thru shape.
struct Activation {
    double gamma = 0.1;
    double atten = 0.98;
    double thK = 20.0;
    double Ib = 6.0;
    double scale = 1000.0;
    std::optional<FilterShape> shape; // tabulated h in place of the Lorentzian

    void validate() const;
    double g(double x) const;
    double dg(double x) const;
    double h(double detune) const;
    double dh(double detune) const;
};

double activation_f(const Activation& act, double x);
double activation_df(const Activation& act, double x);

struct VirtualParams {
    Eigen::Matrix<double, 3, 2> W0 = Eigen::Matrix<double, 3, 2>::Zero();
    Eigen::Vector3d B0 = Eigen::Vector3d::Zero();
    Eigen::Vector3d W1 = Eigen::Vector3d::Zero();
    double B1 = 0.0;

    void validate() const;
    nlohmann::json to_json() const;
    static VirtualParams from_json(const nlohmann::json& j);
};

// Trained XOR parameters printed with the original backprop run.
VirtualParams reference_xor_params();

struct XorData {
    std::vector<Eigen::Vector2d> x;
    std::vector<int> label; // +1 for the (0.2,0.2)/(0.6,0.6) clusters, -1 otherwise
};

XorData generate_xor(std::uint64_t seed, int per_cluster = 100);
XorData swap_labels(XorData d);

struct ForwardResult {
    Eigen::Vector3d pre;
    Eigen::Vector3d hidden;
    double y = 0.0;
};

ForwardResult forward(const VirtualParams& vp, const Activation& act, const Eigen::Vector2d& x);

enum class CostMode { squared_error, softmax_cross_entropy };

CostMode parse_cost_mode(const std::string& s);
std::string to_string(CostMode m);

// Squared error: (d - y)^2 / 2. Softmax: two logits (y/2, -y/2), i.e. log(1 + exp(-d y)).
double sample_cost(const VirtualParams& vp, const Activation& act, const Eigen::Vector2d& x, int d, CostMode mode);

// Descent direction (minus the cost gradient) for one sample; SGD adds eta times this.
VirtualParams update_direction(const VirtualParams& vp, const Activation& act, const Eigen::Vector2d& x, int d,
                               CostMode mode);

double accuracy(const VirtualParams& vp, const Activation& act, const XorData& data);
double mean_cost(const VirtualParams& vp, const Activation& act, const XorData& data, CostMode mode);

struct TrainingConfig {
    double eta = 0.01;
    int epochs = 1000;
    std::uint64_t seed = 0;
    CostMode cost = CostMode::squared_error;
    double stop_accuracy = 2.0; // stop once reached; > 1 never stops early

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double cost = 0.0;
    double error_rate = 0.0;
};

struct TrainingResult {
    VirtualParams params;
    std::vector<EpochStats> curve; // entry 0 is the untrained state
    double accuracy = 0.0;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, TrainingResult partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const TrainingResult& partial() const { return partial_; }

private:
    TrainingResult partial_;
};

VirtualParams random_params(std::uint64_t seed);

TrainingResult train(const XorData& data, const TrainingConfig& cfg, const Activation& act);
TrainingResult train(const XorData& data, const TrainingConfig& cfg, const Activation& act, VirtualParams init);

struct PhysicalParams {
    Eigen::Matrix<double, 3, 2> w23 = Eigen::Matrix<double, 3, 2>::Zero();
    Eigen::Vector3d w31 = Eigen::Vector3d::Zero();
    Eigen::Vector3d axon_bias = Eigen::Vector3d::Zero(); // mA
    double out_bias = 0.0;                                // V
};

struct NetworkCircuit {
    ReadoutParams hidden{0.9, 15000.0, 1.0, 4.0, 0.0};
    ReadoutParams output{0.9, 3000.0, 1.0, 0.0, 0.0};
    double p = 1e-3; // optical power per channel at the output taps before splitting, mW
    double hidden_split = 6.0;
    double output_split = 2.0;
};

class UnrealizableWeight : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

PhysicalParams virtual_to_physical(const VirtualParams& vp, const NetworkCircuit& c);
VirtualParams physical_to_virtual(const PhysicalParams& pp, const NetworkCircuit& c);

} // namespace ringsim
