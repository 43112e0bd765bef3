#include "dkpc/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <sstream>

using namespace dkpc;

namespace {

std::vector<double> parse_alphas(const std::string& list, std::size_t count) {
    if (list.empty()) return metrics::uniform_alphas(count);
    std::vector<double> out;
    std::istringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(csv::parse_double(item));
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Data-driven predictive frequency control experiments"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir;
    bool reduced = false;
    std::vector<std::string> overrides;
    app.add_option("-c,--config", config_path, "INI experiment file (defaults when omitted)")->check(CLI::ExistingFile);
    app.add_option("-o,--out", out_dir, "Output directory; beats DKPC_OUTPUT_ROOT and output.dir");
    app.add_flag("--reduced", reduced, "Desk-scale run: T = 300, T_sim = 80, every other grid value");
    app.add_option("-s,--set", overrides, "Override a config key, e.g. --set controller.q=100")->take_all();

    auto* gen = app.add_subcommand("gen-data", "Simulate the plant under random inputs and write the dataset");
    auto* run = app.add_subcommand("run", "Closed-loop run of one controller");
    std::string controller;
    run->add_option("--controller", controller, "dkpc or deepc (overrides controller.kind)")
        ->check(CLI::IsMember({"dkpc", "deepc"}));
    auto* sweep = app.add_subcommand("sweep", "Run the full weight grid for both controllers");
    unsigned jobs = 0;
    sweep->add_option("-j,--jobs", jobs, "Worker threads (overrides sweep.jobs)");
    auto* report = app.add_subcommand("report", "Frontier, per-alpha winners and summary from a sweep CSV");
    std::string sweep_csv;
    std::string alphas;
    std::size_t alpha_count = 11;
    report->add_option("--sweep-csv", sweep_csv, "Sweep results (default: <out>/sweep.csv)");
    report->add_option("--alphas", alphas, "Comma-separated alpha values");
    report->add_option("--alpha-count", alpha_count, "Uniform alpha grid size when --alphas is absent")
        ->check(CLI::PositiveNumber);
    auto* print = app.add_subcommand("print-config", "Print the effective configuration");

    CLI11_PARSE(app, argc, argv);

    try {
        experiment::ExperimentConfig cfg =
            config_path.empty() ? experiment::ExperimentConfig{} : experiment::load_config(config_path);
        if (reduced) cfg = experiment::reduced(cfg);
        if (!controller.empty()) cfg.kind = control::parse_controller_kind(controller);
        for (const auto& o : overrides) experiment::apply_override(cfg, o);
        if (jobs) cfg.jobs = jobs;
        if (!out_dir.empty()) {
            cfg.output_dir = out_dir;
            ::setenv("DKPC_OUTPUT_ROOT", out_dir.c_str(), 1);
        }

        std::vector<std::filesystem::path> written;
        if (*gen) written = experiment::cmd_gen_data(cfg, std::cerr);
        else if (*run) written = experiment::cmd_run(cfg, std::cerr);
        else if (*sweep) written = experiment::cmd_sweep(cfg, std::cerr);
        else if (*report) written = experiment::cmd_report(cfg, sweep_csv, parse_alphas(alphas, alpha_count), std::cout);
        else if (*print) experiment::write_config(std::cout, cfg);
        for (const auto& p : written) std::cerr << "wrote " << p.string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "dkpc: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
