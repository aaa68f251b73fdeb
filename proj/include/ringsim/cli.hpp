#pragma once

#include "ringsim/calibration.hpp"
#include "ringsim/devices.hpp"
#include "ringsim/mdm.hpp"
#include "ringsim/training.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ringsim {

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_gate = 3, exit_nonconvergence = 4 };

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class DeviceKind { none, basic, cascaded };

struct TrainingSettings {
    TrainingConfig run{0.01, 20000, 0, CostMode::squared_error, 0.98};
    int seeds = 5;
    int per_cluster = 100;
    int surface_n = 32;
    Activation act{};
};

struct SweepSettings {
    std::string params = "reference"; // or a VirtualParams JSON file
    int sweep_n = 20;
    int threads = 0;
    double max_drive_mA = 0.15;
};

struct SyntheticCoupler {
    double width = 0.0;
    double length = 0.0;
    double alpha = 0.5;
};

struct MdmSettings {
    std::string sweep_dir; // read width_length.csv spectra from here when set
    std::vector<SyntheticCoupler> synthetic;
    double dL = 1.2e6;
    Window window{1540.0, 1560.0};
    double spacing = 0.01;
    double noise_db = 0.2;
};

struct ExperimentConfig {
    int schema_version = 1;
    std::optional<std::uint64_t> seed; // unset: fall back to $RINGSIM_SEED, then 0
    DeviceKind device = DeviceKind::none;
    int device_count = 1;
    BasicDeviceParams basic{};
    CascadedDeviceParams cascaded{};
    OsaConfig osa{};
    ControllerConfig controller{};
    MergeConfig merge{};
    TrainingSettings training{};
    SweepSettings sweep{};
    MdmSettings mdm{};
    std::filesystem::path base_dir; // relative paths in the config resolve here

    std::filesystem::path resolve(const std::string& p) const;
};

inline constexpr int kConfigSchemaVersion = 1;

// JSON when the extension is .json, YAML otherwise. Throws ConfigError.
ExperimentConfig load_config(const std::filesystem::path& file);
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json yaml_to_json(const std::string& text);
nlohmann::json config_to_json(const ExperimentConfig& c);

// Seed precedence: explicit override, then the config, then $RINGSIM_SEED, then 0.
std::uint64_t effective_seed(const ExperimentConfig& c, std::optional<std::uint64_t> override_seed);

std::string sha256_hex(const std::string& bytes);
std::string fmt_num(double v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(const std::vector<double>& values);
    std::string str() const;
    std::vector<double> column(const std::string& name) const;
    static CsvTable parse(const std::string& text);
};

// Grid layout: header row "y\\x" then the x coordinates; one row per y value.
CsvTable grid_table(const std::vector<double>& xs, const std::vector<double>& ys,
                    const std::vector<std::vector<double>>& z);

struct Series {
    std::string name;
    std::vector<double> y;
};

std::string svg_line_chart(const std::string& title, const std::string& xlabel, const std::vector<double>& x,
                           const std::vector<Series>& series);
// z(i, j) at (xs[i], ys[j]); blue negative, red positive.
std::string svg_heatmap(const std::string& title, const std::vector<double>& xs, const std::vector<double>& ys,
                        const std::vector<std::vector<double>>& z);

// Writes files under one output directory and keeps the manifest.
class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path dir);

    void write(const std::string& rel, const std::string& content);
    void csv(const std::string& rel, const CsvTable& t) { write(rel, t.str()); }
    // Writes manifest.json listing every artifact with its SHA-256.
    void finish(const nlohmann::json& summary);
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::string, std::string>> files_; // path, sha256
};

struct RunOptions {
    std::string command;
    std::filesystem::path config;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    std::string format = "csv"; // csv or svg
    bool quiet = false;
};

const std::vector<std::string>& command_names();

// Runs one command end to end; returns the process exit code.
int run_command(const RunOptions& opt, std::ostream& log, std::ostream& err);

// Renders a CSV artifact as a line chart: first column on x, the rest as series.
int export_plot(const std::filesystem::path& csv, const std::filesystem::path& out, const std::string& format,
                std::ostream& err);

} // namespace ringsim
