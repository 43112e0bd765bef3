#pragma once

#include "dkpc/control.hpp"
#include "dkpc/csv.hpp"
#include "dkpc/lifting.hpp"
#include "dkpc/metrics.hpp"
#include "dkpc/netsim.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace dkpc::experiment {

/// Everything a command needs. Serialized as INI with the sections
/// [network] [plant] [scenario] [data] [lifting] [controller] [sweep] [output].
struct ExperimentConfig {
    // [network]
    std::string network_file; ///< empty: built-in ten-bus network

    // [plant]
    double dt = 0.01;
    netsim::FilterMode filter_mode = netsim::FilterMode::ExactExponential;
    netsim::InverterParams inverter;

    // [scenario]
    Index t_sim = 150;
    Index activation_step = 40;
    netsim::Disturbance disturbance{2.0, 0.05, 0.0, 0.0, 0.0};
    std::uint64_t disturbance_seed = 3;

    // [data]
    Index data_length = 1000;
    double input_min = -1.0;
    double input_max = 1.0;
    std::uint64_t data_seed = 1;

    // [lifting]
    Index n_basis = 40;
    std::uint64_t lifting_seed = 2;

    // [controller]
    control::ControllerKind kind = control::ControllerKind::Dkpc;
    Index t_ini = 5;
    Index horizon = 10;
    double q = 300.0;
    double r = 0.01;
    double lambda_g = 500.0;
    std::optional<double> lambda_sigma; ///< DeePC only; 1e5 when absent
    double u_min = -1.0;
    double u_max = 1.0;
    double y_min = -std::numeric_limits<double>::infinity();
    double y_max = std::numeric_limits<double>::infinity();
    control::Fallback fallback = control::Fallback::HoldLast;
    metrics::ChannelNorm itae_norm = metrics::ChannelNorm::Sum;

    // [sweep]
    std::vector<double> q_grid{10, 100, 300, 1000};
    std::vector<double> r_grid{0.001, 0.01, 0.1, 1};
    std::vector<double> lambda_g_grid{1, 10, 100, 1000};
    std::vector<double> lambda_sigma_grid{1e4, 1e5, 1e6};
    unsigned jobs = 0; ///< 0: one worker per hardware thread

    // [output]
    std::string output_dir = "out";

    void validate() const;
    double effective_lambda_sigma() const { return lambda_sigma.value_or(1e5); }

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

ExperimentConfig read_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
void write_config(std::ostream& out, const ExperimentConfig& cfg);

/// Applies "section.key=value". Unknown keys are rejected.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

/// Desk-scale variant: T = 300, T_sim = 80 and every other grid element.
ExperimentConfig reduced(ExperimentConfig cfg);

/// Every other element, starting with the first.
std::vector<double> halve_grid(const std::vector<double>& grid);

/// FNV-1a over the canonical serialization, 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// DKPC_OUTPUT_ROOT when set, else cfg.output_dir.
std::filesystem::path output_root(const ExperimentConfig& cfg);

netsim::NetworkGraph network(const ExperimentConfig& cfg);

struct Dataset {
    Trajectory data;
    RbfBank bank;
};

/// Simulates the plant from its nominal state under seeded uniform inputs.
Dataset generate_dataset(const ExperimentConfig& cfg);

Dataset load_dataset(const std::filesystem::path& dir);

/// Controller settings for one configuration of the grid.
control::DkpcConfig dkpc_config(const ExperimentConfig& cfg, Index n);
control::DeepcConfig deepc_config(const ExperimentConfig& cfg, Index n);

struct RunResult {
    control::ClosedLoopTrace trace;
    metrics::RunMetrics metrics;
    std::string status; ///< ok | fallback | diverged | error: ...
};

/// epsilon and J_u over the active part of a trace.
metrics::RunMetrics evaluate(const control::ClosedLoopTrace& trace, metrics::ChannelNorm norm);

/// Hankel blocks shared by every run over one dataset.
struct Prepared {
    Dataset dataset;
    HankelSystem lifted;
    HankelSystem unlifted;
};

Prepared prepare(const ExperimentConfig& cfg, Dataset dataset);

/// Builds the controller selected by cfg.kind and runs the disturbed scenario.
RunResult run_once(const ExperimentConfig& cfg, const Prepared& prep);

struct GridPoint {
    control::ControllerKind kind;
    metrics::ConfigTag tag;
};

/// Full DKPC grid followed by the DeePC grid, each in lexicographic order.
std::vector<GridPoint> sweep_grid(const ExperimentConfig& cfg);

/// Runs every grid point (in parallel when jobs allow) and returns rows
/// sorted by (controller, q, r, lambda_g, lambda_sigma).
std::vector<csv::SweepRow> run_sweep(const ExperimentConfig& cfg, const Prepared& prep);

struct Report {
    std::vector<metrics::FrontierPoint> frontier; ///< DKPC frontier, then DeePC
    std::vector<metrics::AlphaWinner> winners;
    std::vector<metrics::RunMetrics> dkpc;
    std::vector<metrics::RunMetrics> deepc;
    std::string summary;
};

/// Rows without finite metrics are excluded.
Report build_report(const std::vector<csv::SweepRow>& rows, const std::vector<double>& alphas);

// Commands. Each writes into output_root(cfg) and returns the files it wrote.
std::vector<std::filesystem::path> cmd_gen_data(const ExperimentConfig& cfg, std::ostream& log);
std::vector<std::filesystem::path> cmd_run(const ExperimentConfig& cfg, std::ostream& log);
std::vector<std::filesystem::path> cmd_sweep(const ExperimentConfig& cfg, std::ostream& log);
std::vector<std::filesystem::path> cmd_report(const ExperimentConfig& cfg, const std::filesystem::path& sweep_csv,
                                              const std::vector<double>& alphas, std::ostream& log);

} // namespace dkpc::experiment
