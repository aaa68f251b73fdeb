#include "ringsim/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"Microring weight-bank simulator: calibration, training, network sweeps and MDM reports"};
    app.require_subcommand(1);

    ringsim::RunOptions opt;
    std::uint64_t seed = 0;
    for (const auto& name : ringsim::command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("-c,--config", opt.config, "experiment config (YAML, or JSON by extension)")->required();
        sub->add_option("-o,--out", opt.out, "output directory")->required();
        sub->add_option("--seed", seed, "root seed; overrides RINGSIM_SEED and the config");
        sub->add_option("--format", opt.format, "plot format for charts written alongside CSVs")
            ->check(CLI::IsMember({"csv", "svg"}));
        sub->add_flag("-q,--quiet", opt.quiet, "only print errors");
    }

    std::filesystem::path input, output;
    std::string format = "svg";
    auto* exp = app.add_subcommand("export", "render a CSV artifact (first column on x)");
    exp->add_option("input", input, "CSV artifact")->required();
    exp->add_option("-o,--out", output, "output file")->required();
    exp->add_option("--format", format, "csv or svg")->check(CLI::IsMember({"csv", "svg"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : ringsim::exit_config;
    }

    if (exp->parsed()) return ringsim::export_plot(input, output, format, std::cerr);

    for (auto* sub : app.get_subcommands()) {
        opt.command = sub->get_name();
        if (sub->count("--seed")) opt.seed = seed;
    }
    return ringsim::run_command(opt, std::cout, std::cerr);
}
