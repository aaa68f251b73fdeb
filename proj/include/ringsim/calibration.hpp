#pragma once

#include "ringsim/analysis.hpp"
#include "ringsim/device.hpp"
#include "ringsim/devices.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ringsim {

class NonConvergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RangeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AscriptionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TroughIdentityLost : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using PowerMap = std::map<int, double>; // absolute heater power, mW

struct ControllerConfig {
    double kp = 0.5;
    double precision = 0.005;
    int max_iter = 100;
    int avg_count = 4;

    void validate() const;
};

// Read-only view of a hidden plant: set heater powers, read spectra.
class Instrument {
public:
    Instrument(const Device& dev, int tap, OsaConfig osa, std::uint64_t noise_seed);

    void set_power(const PowerMap& p);
    const PowerMap& power() const { return power_; }
    Spectrum spectrum(Window w, int avg_count);
    double pump_power() const { return osa_.pump_power; }
    double spacing() const { return osa_.spacing; }
    std::size_t measurements() const { return count_; }
    const Device& device() const { return dev_; }

private:
    const Device& dev_;
    int tap_;
    OsaConfig osa_;
    std::uint64_t seed_;
    std::size_t count_ = 0;
    PowerMap power_;
};

// Owns the background model and the peak-finder settings for one run.
struct SpectrumAssistant {
    int n_chan = 1;
    double min_separation = 0.5;
    Window window;
    bool tuned = false;
    BackgroundModel background;

    Spectrum raw(Instrument& inst, int avg_count) const;
    // Background-removed spectrum; falls back to a smoothed background of itself.
    Spectrum measure(Instrument& inst, int avg_count) const;
    std::vector<ResonanceFeature> resonances(const Spectrum& removed) const;
    std::vector<ResonanceFeature> resonances(Instrument& inst, int avg_count) const;
    // Intersects w with the background coverage when tuned.
    void set_window(Window w);
};

struct AscriptionResult {
    std::vector<int> trough_channel; // per trough, ascending wavelength
    std::map<int, double> k_diag;    // nm/mW per channel
    int retries = 0;
};

AscriptionResult ascribe(Instrument& inst, const SpectrumAssistant& sa, const std::vector<int>& channels,
                         const PowerMap& base_drive, double tune_by = 0.01);

struct TrackResult {
    PowerMap drive;
    std::vector<double> lam;
    int iterations = 0;
    std::vector<double> error_history; // max |err| per iteration
};

TrackResult track_to_bias(Instrument& inst, SpectrumAssistant& sa, const std::vector<int>& trough_channel,
                          const std::vector<double>& targets, const ControllerConfig& cfg,
                          const std::map<int, double>& k_diag, const PowerMap& start, bool recenter = true);

// Rows: troughs (ascending), columns: trough_channel order.
Eigen::MatrixXd estimate_K(Instrument& inst, const SpectrumAssistant& sa, const std::vector<int>& trough_channel,
                           const PowerMap& bias, const std::vector<double>& lam_bias,
                           const std::map<int, double>& k_diag, double span_nm = 1.0, int n_pts = 11,
                           int avg_count = 5);

struct MergeConfig {
    double kp_track = 0.1;
    double kp_merge = 0.11;
    double kp_center = 0.5; // common-mode trim after the width search
    double precision = 0.005;
    int max_iter = 100;
    int avg_count = 4;
};

struct MergeResult {
    PowerMap drive;
    int phase1_iterations = 0;
    int phase2_iterations = 0;
    int trim_iterations = 0;
    bool converged = false;
    std::string reason;
    double final_fwhm = 0.0;
    double final_center = 0.0;
};

MergeResult merge_troughs(Instrument& inst, const SpectrumAssistant& sa, double target_nm, int left_channel,
                          int right_channel, const MergeConfig& cfg, const std::map<int, double>& k_diag,
                          double max_fwhm, const PowerMap& start, bool skip_start);

struct PairResolveConfig {
    double split_nm = 0.3;   // excursion of the partner ring, each side
    double window_half = 1.0;
    double precision = 0.001;
    int rounds = 3;
    int avg_count = 5;
};

struct PairResolveResult {
    PowerMap drive;
    std::map<int, double> lam; // individual ring positions at drive
    int rounds = 0;
};

// Measures each ring of a merged pair on its own by moving the partner +-split_nm
// (the crosstalk it induces cancels in the mean), then pulls both onto target.
PairResolveResult resolve_pair(Instrument& inst, const SpectrumAssistant& sa, double target_nm, int ch_a, int ch_b,
                               const std::map<int, double>& k_diag, const PowerMap& start,
                               const PairResolveConfig& cfg = {});

struct CascadedKConfig {
    double prim_span = 0.75;
    int prim_pts = 7;
    double other_span = 0.75;
    int other_pts = 13;
    int avg_count = 5;
    double window_half = 1.0;
};

// Full 2n x 2n matrix, rows and columns ordered axons then dendrites (by channel wavelength).
Eigen::MatrixXd estimate_K_cascaded(Instrument& inst, const SpectrumAssistant& sa,
                                    const std::vector<double>& wl_channels, const std::vector<int>& axons,
                                    const std::vector<int>& dendrites, const std::map<int, double>& k_diag,
                                    const PowerMap& bias, const CascadedKConfig& cfg, int* retries = nullptr);

// Reorders an alternating a0 d0 a1 d1 ... matrix to a0 a1 ... d0 d1 ...
Eigen::MatrixXd alternating_to_grouped(const Eigen::MatrixXd& K);

enum class RingRole { dendrite, axon };

struct CalibrationModel {
    std::vector<int> channel_order;   // per ring
    std::vector<RingRole> roles;      // per ring
    std::vector<double> ring_wl;      // channel wavelength each ring serves
    std::vector<double> heat_bias;    // mW per ring's channel
    std::vector<double> lam_bias;     // nm per ring
    Eigen::MatrixXd K_est;
    std::vector<FilterShape> filter_shapes;
    double attenuation_est = 0.0;

    void validate() const;
    PowerMap absolute(const DriveState& delta) const;
    nlohmann::json to_json() const;
    static CalibrationModel from_json(const nlohmann::json& j);
};

// Red-side detune realizing transmission t on a stored thru shape.
double invert_filter_shape(const FilterShape& shape, double t);

// Deltas over the learned bias. Dendrite rings take weights (thru transmission),
// axon rings take detunes (nm) relative to their channel wavelength.
DriveState weights_to_drive(const CalibrationModel& model, const std::vector<double>& dendrite_transmission,
                            const std::vector<double>& axon_detunes, bool full_K = true);

struct BasicCalibrationOptions {
    Window window{1530.0, 1559.0};
    double min_separation = 0.5;
    double tune_by = 0.01;
    double detune_fwhms = 3.0;
    int bg_avg = 3;
    ControllerConfig track{};
    double shape_window_fwhms = 7.0;
    int shape_avg = 5;
    double k_span = 1.0;
    int k_pts = 11;
    int k_avg = 5;
};

struct BasicCalibrationResult {
    CalibrationModel model;
    AscriptionResult ascription;
    TrackResult track;
    std::size_t measurements = 0;
};

BasicCalibrationResult run_basic_calibration(const HiddenPlant& plant, const OsaConfig& osa, std::uint64_t noise_seed,
                                             const BasicCalibrationOptions& opt = {});

struct BasicGates {
    bool ascription = false;
    double heat_bias_err = 0.0;
    double lam_bias_err = 0.0;
    double k_rel_err_pct = 0.0; // worst over entries with true value >= 10
    bool pass(double heat_tol = 0.01, double lam_tol = 0.01, double k_tol = 10.0) const;
};

BasicGates validate_basic(const CalibrationModel& model, const HiddenPlant& plant);

struct CascadedCalibrationOptions {
    Window window{1545.0, 1560.0};
    double min_separation = 0.1;
    double tune_by = 0.01;
    double detune_fwhms = 3.0;
    int bg_avg = 3;
    double shape_window_fwhms = 8.0;
    int shape_avg = 5;
    ControllerConfig track{};
    MergeConfig merge{};
    bool resolve_pairs = true;
    PairResolveConfig resolve{};
    int passes = 2;
    int max_passes = 3;
    CascadedKConfig k{};
};

struct CascadedCalibrationResult {
    CalibrationModel model;
    AscriptionResult ascription;
    std::vector<MergeResult> merges;
    int passes_used = 0;
    bool converged = false;
    int k_retries = 0;
    std::size_t measurements = 0;
};

CascadedCalibrationResult run_cascaded_calibration(const HiddenPlant& plant, const OsaConfig& osa,
                                                   std::uint64_t noise_seed,
                                                   const CascadedCalibrationOptions& opt = {});

struct CascadedGates {
    bool ascription = false;
    double heat_bias_err = 0.0;
    double lam_bias_err = 0.0;
    double atten_err_pct = 0.0;
    double k_diag_err = 0.0;
    double k_off_err = 0.0;
    bool pass() const;
};

CascadedGates validate_cascaded(const CascadedCalibrationResult& r, const HiddenPlant& plant);

} // namespace ringsim
