#include "ringsim/cli.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace ringsim;
namespace fs = std::filesystem;

namespace {

fs::path configs_dir()
{
    const char* e = std::getenv("RINGSIM_TEST_CONFIGS");
    return e ? fs::path(e) : fs::path("configs");
}

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("ringsim_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const fs::path& p, const std::string& text)
{
    std::ofstream(p, std::ios::binary) << text;
}

const char* kBasicYaml = R"(schema_version: 1
seed: 7
device:
  kind: basic
  count: 2
  heater_channels: [5, 3, 6, 4]
osa:
  noise_amplitude: 0.1
)";

} // namespace

TEST_CASE("config parsing and validation")
{
    const auto c = parse_config(yaml_to_json(kBasicYaml));
    CHECK(c.device == DeviceKind::basic);
    CHECK(c.device_count == 2);
    CHECK(c.seed == std::optional<std::uint64_t>(7));
    CHECK(c.basic.heater_channels == std::vector<int>{5, 3, 6, 4});
    CHECK(c.osa.noise_amplitude == doctest::Approx(0.1));
    CHECK(c.osa.pump_power == doctest::Approx(0.1));

    // JSON is the same schema.
    const auto j = parse_config(nlohmann::json::parse(
        R"({"schema_version": 1, "seed": 7, "device": {"kind": "basic", "count": 2, "heater_channels": [5, 3, 6, 4]},
            "osa": {"noise_amplitude": 0.1}})"));
    CHECK(config_to_json(j) == config_to_json(c));
    CHECK(config_to_json(parse_config(config_to_json(c))) == config_to_json(c));

    CHECK_THROWS_AS(parse_config(yaml_to_json("seed: 1\n")), ConfigError);
    CHECK_THROWS_AS(parse_config(yaml_to_json("schema_version: 2\n")), ConfigError);
    CHECK_THROWS_AS(parse_config(yaml_to_json("schema_version: 1\nbogus: 3\n")), ConfigError);
    CHECK_THROWS_AS(parse_config(yaml_to_json("schema_version: 1\nosa:\n  pump: 3\n")), ConfigError);
    CHECK_THROWS_AS(parse_config(yaml_to_json("schema_version: 1\nosa:\n  spacing: -1\n")), ConfigError);
    CHECK_THROWS_AS(parse_config(yaml_to_json("schema_version: 1\ndevice:\n  kind: basic\n  heater_channels: [1, 1, 2, 3]\n")),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(yaml_to_json("schema_version: 1\ndevice:\n  kind: toaster\n")), ConfigError);
    CHECK_THROWS(yaml_to_json("a: [1, 2\n"));

    for (const auto& e : fs::directory_iterator(configs_dir()))
        if (e.path().extension() == ".yaml") CHECK_NOTHROW(load_config(e.path()));
}

TEST_CASE("seed precedence")
{
    auto c = parse_config(yaml_to_json("schema_version: 1\n"));
    unsetenv("RINGSIM_SEED");
    CHECK(effective_seed(c, std::nullopt) == 0);
    setenv("RINGSIM_SEED", "42", 1);
    CHECK(effective_seed(c, std::nullopt) == 42);
    c.seed = 9;
    CHECK(effective_seed(c, std::nullopt) == 9);
    CHECK(effective_seed(c, 5) == 5);
    c.seed.reset();
    setenv("RINGSIM_SEED", "not-a-number", 1);
    CHECK_THROWS(effective_seed(c, std::nullopt));
    unsetenv("RINGSIM_SEED");
}

TEST_CASE("artifact helpers")
{
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(fmt_num(0.0) == "0");
    CHECK(fmt_num(0.5) == "0.5");
    CHECK(fmt_num(-1e-12) == "-1e-12");

    CsvTable t;
    t.header = {"nm", "dBm"};
    t.add({1550.0, -40.25});
    t.add({1550.01, -41.0});
    const auto back = CsvTable::parse(t.str());
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK(back.column("dBm") == std::vector<double>{-40.25, -41.0});
    CHECK_THROWS(back.column("mW"));

    const auto g = grid_table({0.0, 0.4, 0.8}, {0.0, 0.8}, {{1, 2}, {3, 4}, {5, 6}});
    CHECK(g.header == std::vector<std::string>{"y\\x", "0", "0.4", "0.8"});
    REQUIRE(g.rows.size() == 2);
    CHECK(g.rows[1] == std::vector<std::string>{"0.8", "2", "4", "6"});

    const auto svg = svg_line_chart("t", "x", {0, 1, 2}, {{"a", {1, 2, 3}}});
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("polyline") != std::string::npos);
}

TEST_CASE("corrupt config exits 2 without artifacts")
{
    const auto dir = scratch("corrupt");
    fs::create_directories(dir);
    spit(dir / "bad.yaml", "schema_version: 1\ndevice: [unclosed\n");
    std::ostringstream log, err;
    RunOptions o{"calibrate-basic", dir / "bad.yaml", dir / "out", std::nullopt, "csv", true};
    CHECK(run_command(o, log, err) == exit_config);
    CHECK(!fs::exists(dir / "out"));

    spit(dir / "wrong.yaml", "schema_version: 1\ndevice:\n  kind: cascaded\n");
    o.config = dir / "wrong.yaml";
    CHECK(run_command(o, log, err) == exit_config);
    CHECK(!fs::exists(dir / "out"));

    o.config = dir / "missing.yaml";
    CHECK(run_command(o, log, err) == exit_config);
    o.command = "frobnicate";
    o.config = configs_dir() / "mdm_report.yaml";
    CHECK(run_command(o, log, err) != exit_ok);
    fs::remove_all(dir);
}

TEST_CASE("manifest hashes match the artifacts, export renders svg")
{
    const auto dir = scratch("mdm");
    std::ostringstream log, err;
    RunOptions o{"mdm-report", configs_dir() / "mdm_report.yaml", dir, 3, "csv", true};
    REQUIRE(run_command(o, log, err) == exit_ok);
    const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
    REQUIRE(!m["artifacts"].empty());
    bool has_report = false;
    for (const auto& a : m["artifacts"]) {
        const auto rel = a["path"].get<std::string>();
        CHECK(sha256_hex(slurp(dir / rel)) == a["sha256"].get<std::string>());
        has_report = has_report || rel == "coupling_report.csv";
    }
    CHECK(has_report);
    const auto report = CsvTable::parse(slurp(dir / "coupling_report.csv"));
    CHECK(report.header.front() == "rank");

    CHECK(export_plot(dir / "coupling_report.csv", dir / "plot.svg", "svg", err) == exit_ok);
    CHECK(slurp(dir / "plot.svg").find("<svg") != std::string::npos);
    CHECK(export_plot(dir / "nope.csv", dir / "plot2.svg", "svg", err) != exit_ok);

    // Same seed, same bytes.
    const auto again = scratch("mdm2");
    o.out = again;
    REQUIRE(run_command(o, log, err) == exit_ok);
    CHECK(slurp(dir / "coupling_report.csv") == slurp(again / "coupling_report.csv"));
    fs::remove_all(dir);
    fs::remove_all(again);
}

TEST_CASE("every command is known")
{
    const auto& names = command_names();
    for (const char* n : {"calibrate-basic", "calibrate-cascaded", "train-xor", "sweep-231", "mdm-report"})
        CHECK(std::find(names.begin(), names.end(), n) != names.end());
}
