#include "dkpc/experiment.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace dkpc::experiment {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

constexpr const char* kDataFile = "data.csv";
constexpr const char* kBankFile = "bank.txt";

std::string fmt(double v) { return csv::format_double(v); }

double to_double(const std::string& key, const std::string& text) {
    try {
        return csv::parse_double(text);
    } catch (const std::exception&) {
        throw std::invalid_argument("config " + key + ": not a number: '" + text + "'");
    }
}

template <class Int>
Int to_integer(const std::string& key, const std::string& text) {
    Int v{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw std::invalid_argument("config " + key + ": not an integer: '" + text + "'");
    return v;
}

std::string join(const std::vector<double>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + fmt(xs[i]);
    return s;
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
    std::vector<double> xs;
    std::string item;
    std::istringstream ss(text);
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        const auto e = item.find_last_not_of(" \t");
        xs.push_back(to_double(key, item.substr(b, e - b + 1)));
    }
    return xs;
}

// One entry per config key; `get` returning an empty string omits the key.
struct Field {
    const char* path;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

#define DKPC_DOUBLE(PATH, MEMBER)                                                              \
    Field{PATH, [](const ExperimentConfig& c) { return fmt(c.MEMBER); },                       \
          [](ExperimentConfig& c, const std::string& v) { c.MEMBER = to_double(PATH, v); }}
#define DKPC_INDEX(PATH, MEMBER)                                                               \
    Field{PATH, [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); },            \
          [](ExperimentConfig& c, const std::string& v) { c.MEMBER = to_integer<Index>(PATH, v); }}
#define DKPC_SEED(PATH, MEMBER)                                                                \
    Field{PATH, [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); },            \
          [](ExperimentConfig& c, const std::string& v) { c.MEMBER = to_integer<std::uint64_t>(PATH, v); }}
#define DKPC_LIST(PATH, MEMBER)                                                                \
    Field{PATH, [](const ExperimentConfig& c) { return join(c.MEMBER); },                      \
          [](ExperimentConfig& c, const std::string& v) { c.MEMBER = to_list(PATH, v); }}

const std::vector<Field>& fields() {
    static const std::vector<Field> table{
        Field{"network.file", [](const ExperimentConfig& c) { return c.network_file; },
              [](ExperimentConfig& c, const std::string& v) { c.network_file = v; }},

        DKPC_DOUBLE("plant.dt", dt),
        Field{"plant.filter_mode", [](const ExperimentConfig& c) { return netsim::to_string(c.filter_mode); },
              [](ExperimentConfig& c, const std::string& v) { c.filter_mode = netsim::parse_filter_mode(v); }},
        DKPC_DOUBLE("plant.p_star", inverter.p_star),
        DKPC_DOUBLE("plant.k_p", inverter.k_p),
        DKPC_DOUBLE("plant.omega_pc", inverter.omega_pc),
        DKPC_DOUBLE("plant.omega_b", inverter.omega_b),

        DKPC_INDEX("scenario.t_sim", t_sim),
        DKPC_INDEX("scenario.activation_step", activation_step),
        DKPC_DOUBLE("scenario.omega", disturbance.omega),
        DKPC_DOUBLE("scenario.p_filt", disturbance.p_filt),
        DKPC_DOUBLE("scenario.theta", disturbance.theta),
        DKPC_DOUBLE("scenario.load_step_min", disturbance.load_step_min),
        DKPC_DOUBLE("scenario.load_step_max", disturbance.load_step_max),
        DKPC_SEED("scenario.seed", disturbance_seed),

        DKPC_INDEX("data.length", data_length),
        DKPC_DOUBLE("data.input_min", input_min),
        DKPC_DOUBLE("data.input_max", input_max),
        DKPC_SEED("data.seed", data_seed),

        DKPC_INDEX("lifting.n_basis", n_basis),
        DKPC_SEED("lifting.seed", lifting_seed),

        Field{"controller.kind", [](const ExperimentConfig& c) { return control::to_string(c.kind); },
              [](ExperimentConfig& c, const std::string& v) { c.kind = control::parse_controller_kind(v); }},
        DKPC_INDEX("controller.t_ini", t_ini),
        DKPC_INDEX("controller.horizon", horizon),
        DKPC_DOUBLE("controller.q", q),
        DKPC_DOUBLE("controller.r", r),
        DKPC_DOUBLE("controller.lambda_g", lambda_g),
        Field{"controller.lambda_sigma",
              [](const ExperimentConfig& c) { return c.lambda_sigma ? fmt(*c.lambda_sigma) : std::string{}; },
              [](ExperimentConfig& c, const std::string& v) {
                  if (v.empty()) c.lambda_sigma.reset();
                  else c.lambda_sigma = to_double("controller.lambda_sigma", v);
              }},
        DKPC_DOUBLE("controller.u_min", u_min),
        DKPC_DOUBLE("controller.u_max", u_max),
        DKPC_DOUBLE("controller.y_min", y_min),
        DKPC_DOUBLE("controller.y_max", y_max),
        Field{"controller.fallback", [](const ExperimentConfig& c) { return control::to_string(c.fallback); },
              [](ExperimentConfig& c, const std::string& v) { c.fallback = control::parse_fallback(v); }},
        Field{"controller.itae_norm", [](const ExperimentConfig& c) { return metrics::to_string(c.itae_norm); },
              [](ExperimentConfig& c, const std::string& v) { c.itae_norm = metrics::parse_channel_norm(v); }},

        DKPC_LIST("sweep.q", q_grid),
        DKPC_LIST("sweep.r", r_grid),
        DKPC_LIST("sweep.lambda_g", lambda_g_grid),
        DKPC_LIST("sweep.lambda_sigma", lambda_sigma_grid),
        Field{"sweep.jobs", [](const ExperimentConfig& c) { return std::to_string(c.jobs); },
              [](ExperimentConfig& c, const std::string& v) { c.jobs = to_integer<unsigned>("sweep.jobs", v); }},

        Field{"output.dir", [](const ExperimentConfig& c) { return c.output_dir; },
              [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; }},
    };
    return table;
}

#undef DKPC_DOUBLE
#undef DKPC_INDEX
#undef DKPC_SEED
#undef DKPC_LIST

const Field& find_field(const std::string& path) {
    for (const auto& f : fields())
        if (path == f.path) return f;
    throw std::invalid_argument("config: unknown key '" + path + "'");
}

// Keys that cannot change any emitted number.
bool affects_results(const std::string& path) { return path != "output.dir" && path != "sweep.jobs"; }

void write_fields(std::ostream& out, const ExperimentConfig& cfg, bool results_only) {
    std::string section;
    for (const auto& f : fields()) {
        if (results_only && !affects_results(f.path)) continue;
        const std::string path = f.path;
        const auto dot = path.find('.');
        const std::string sec = path.substr(0, dot);
        const std::string value = f.get(cfg);
        if (sec != section) {
            if (!section.empty()) out << '\n';
            out << '[' << sec << "]\n";
            section = sec;
        }
        if (value.empty()) continue;
        out << path.substr(dot + 1) << " = " << value << '\n';
    }
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
}

std::ifstream open_in(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    return in;
}

double mean_abs(const control::ClosedLoopTrace& trace, Index from, Index to) {
    from = std::max<Index>(from, 0);
    to = std::min<Index>(to, static_cast<Index>(trace.steps.size()));
    if (to <= from) return std::nan("");
    double s = 0.0;
    for (Index k = from; k < to; ++k) s += trace.steps[static_cast<std::size_t>(k)].y.cwiseAbs().mean();
    return s / static_cast<double>(to - from);
}

metrics::ControllerTag tag_of(control::ControllerKind k) {
    return k == control::ControllerKind::Dkpc ? metrics::ControllerTag::Dkpc : metrics::ControllerTag::Deepc;
}

} // namespace

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
    if (!network_file.empty() && !fs::exists(network_file)) fail("network file not found: " + network_file);
    netsim::SimConfig{dt, filter_mode, data_seed}.validate();
    inverter.validate();
    if (t_sim < 1) fail("scenario.t_sim must be >= 1");
    if (activation_step < 0) fail("scenario.activation_step must be >= 0");
    if (disturbance.omega < 0 || disturbance.p_filt < 0 || disturbance.theta < 0)
        fail("scenario amplitudes must be >= 0");
    if (disturbance.load_step_min > disturbance.load_step_max) fail("scenario.load_step_min > load_step_max");
    if (!(input_min < input_max)) fail("data.input_min must be below data.input_max");
    if (n_basis < 1) fail("lifting.n_basis must be >= 1");
    if (t_ini < 1 || horizon < 1) fail("controller.t_ini and controller.horizon must be >= 1");
    if (data_length < t_ini + horizon)
        fail("data.length = " + std::to_string(data_length) + " is shorter than the Hankel depth t_ini + horizon = " +
             std::to_string(t_ini + horizon));
    if (!(q >= 0)) fail("controller.q must be >= 0");
    if (!(r > 0)) fail("controller.r must be > 0");
    if (!(lambda_g >= 0)) fail("controller.lambda_g must be >= 0");
    if (lambda_sigma && kind == control::ControllerKind::Dkpc)
        fail("controller.lambda_sigma is a deepc setting but controller.kind = dkpc");
    if (lambda_sigma && !(*lambda_sigma > 0)) fail("controller.lambda_sigma must be > 0");
    if (!(u_min <= u_max)) fail("controller.u_min > controller.u_max");
    if (!(y_min <= y_max)) fail("controller.y_min > controller.y_max");
    for (double v : q_grid) if (!(v >= 0)) fail("sweep.q entries must be >= 0");
    for (double v : r_grid) if (!(v > 0)) fail("sweep.r entries must be > 0");
    for (double v : lambda_g_grid) if (!(v >= 0)) fail("sweep.lambda_g entries must be >= 0");
    for (double v : lambda_sigma_grid) if (!(v > 0)) fail("sweep.lambda_sigma entries must be > 0");
    if (output_dir.empty()) fail("output.dir is empty");
}

ExperimentConfig read_config(std::istream& in) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    ExperimentConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw std::invalid_argument("config: key '" + section + "' outside a section");
        for (const auto& [key, value] : body) find_field(section + "." + key).set(cfg, value.data());
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    auto in = open_in(path);
    return read_config(in);
}

void write_config(std::ostream& out, const ExperimentConfig& cfg) { write_fields(out, cfg, false); }

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("override '" + assignment + "' is not key=value");
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        if (b == std::string::npos) return std::string{};
        return s.substr(b, s.find_last_not_of(" \t") - b + 1);
    };
    find_field(trim(assignment.substr(0, eq))).set(cfg, trim(assignment.substr(eq + 1)));
}

std::vector<double> halve_grid(const std::vector<double>& grid) {
    std::vector<double> out;
    for (std::size_t i = 0; i < grid.size(); i += 2) out.push_back(grid[i]);
    return out;
}

ExperimentConfig reduced(ExperimentConfig cfg) {
    cfg.data_length = 300;
    cfg.t_sim = 80;
    cfg.q_grid = halve_grid(cfg.q_grid);
    cfg.r_grid = halve_grid(cfg.r_grid);
    cfg.lambda_g_grid = halve_grid(cfg.lambda_g_grid);
    cfg.lambda_sigma_grid = halve_grid(cfg.lambda_sigma_grid);
    return cfg;
}

std::string config_hash(const ExperimentConfig& cfg) {
    std::ostringstream ss;
    write_fields(ss, cfg, true);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : ss.str()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

fs::path output_root(const ExperimentConfig& cfg) {
    if (const char* env = std::getenv("DKPC_OUTPUT_ROOT"); env && *env) return env;
    return cfg.output_dir;
}

netsim::NetworkGraph network(const ExperimentConfig& cfg) {
    return cfg.network_file.empty() ? netsim::default_network() : netsim::load_network(cfg.network_file);
}

Dataset generate_dataset(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto net = network(cfg);
    const auto params = netsim::uniform_params(net.n_bus(), cfg.inverter);
    const netsim::SimConfig sim{cfg.dt, cfg.filter_mode, cfg.data_seed};
    const Matrix inputs = uniform_inputs(net.n_bus(), cfg.data_length, cfg.input_min, cfg.input_max, cfg.data_seed);
    Dataset ds;
    ds.data = netsim::simulate(netsim::nominal_state(params, net), inputs, params, net, sim);
    ds.bank = build_bank(ds.data.y, cfg.n_basis, cfg.lifting_seed);
    return ds;
}

Dataset load_dataset(const fs::path& dir) {
    const fs::path data = dir / kDataFile;
    const fs::path bank = dir / kBankFile;
    if (!fs::exists(data) || !fs::exists(bank))
        throw std::runtime_error("no dataset in " + dir.string() + " (run gen-data first)");
    Dataset ds;
    auto in = open_in(data);
    try {
        ds.data = csv::read_trajectory(in);
    } catch (const csv::ParseError& e) {
        throw std::runtime_error(data.string() + ": " + e.what());
    }
    ds.bank = load_bank(bank.string());
    return ds;
}

control::DkpcConfig dkpc_config(const ExperimentConfig& cfg, Index n) {
    control::DkpcConfig c;
    static_cast<control::PredictiveConfig&>(c) = control::PredictiveConfig::defaults(n, n);
    c.t_ini = cfg.t_ini;
    c.horizon = cfg.horizon;
    c.Q = cfg.q * Matrix::Identity(n, n);
    c.R = cfg.r * Matrix::Identity(n, n);
    c.lambda_g = cfg.lambda_g;
    c.u_bounds = control::BoxBounds::uniform(n, cfg.u_min, cfg.u_max);
    c.y_bounds = control::BoxBounds::uniform(n, cfg.y_min, cfg.y_max);
    c.fallback = cfg.fallback;
    return c;
}

control::DeepcConfig deepc_config(const ExperimentConfig& cfg, Index n) {
    control::DeepcConfig c;
    static_cast<control::PredictiveConfig&>(c) = dkpc_config(cfg, n);
    c.lambda_sigma = cfg.effective_lambda_sigma();
    return c;
}

metrics::RunMetrics evaluate(const control::ClosedLoopTrace& trace, metrics::ChannelNorm norm) {
    const Index first = std::min<Index>(trace.activation_step, static_cast<Index>(trace.steps.size()));
    const Matrix y = trace.outputs();
    const Matrix u = trace.inputs();
    metrics::RunMetrics m;
    m.epsilon = metrics::itae(y.rightCols(y.cols() - first), trace.dt, first, norm);
    m.j_u = metrics::control_effort(u.rightCols(u.cols() - first));
    m.ok = !trace.aborted;
    return m;
}

Prepared prepare(const ExperimentConfig& cfg, Dataset dataset) {
    const Index n = network(cfg).n_bus();
    if (dataset.data.n_u() != n || dataset.data.n_y() != n)
        throw std::invalid_argument("dataset has " + std::to_string(dataset.data.n_u()) + " channels, network has " +
                                    std::to_string(n));
    if (dataset.bank.n_y() != n || dataset.bank.n_basis() != cfg.n_basis)
        throw std::invalid_argument("dataset bank does not match lifting.n_basis; rerun gen-data");
    Prepared p;
    p.lifted = assemble(dataset.data, dataset.bank, cfg.t_ini, cfg.horizon);
    p.unlifted = assemble_unlifted(dataset.data, cfg.t_ini, cfg.horizon);
    p.dataset = std::move(dataset);
    return p;
}

RunResult run_once(const ExperimentConfig& cfg, const Prepared& prep) {
    RunResult res;
    res.metrics.controller = tag_of(cfg.kind);
    res.metrics.config = {cfg.q, cfg.r, cfg.lambda_g, std::nullopt};
    if (cfg.kind == control::ControllerKind::Deepc) res.metrics.config.lambda_sigma = cfg.effective_lambda_sigma();
    try {
        cfg.validate();
        const auto net = network(cfg);
        const auto params = netsim::uniform_params(net.n_bus(), cfg.inverter);
        const netsim::SimConfig sim{cfg.dt, cfg.filter_mode, cfg.data_seed};
        const auto start = netsim::apply_disturbance(netsim::nominal_state(params, net), net, cfg.disturbance,
                                                     cfg.disturbance_seed);
        netsim::NetworkPlant plant(start.net, params, sim, start.state);
        auto ctrl = cfg.kind == control::ControllerKind::Dkpc
                        ? control::PredictiveController::dkpc(prep.lifted, prep.dataset.bank, dkpc_config(cfg, net.n_bus()))
                        : control::PredictiveController::deepc(prep.unlifted, deepc_config(cfg, net.n_bus()));
        res.trace = control::run_closed_loop(plant, ctrl, {cfg.t_sim, cfg.activation_step});
        const auto m = evaluate(res.trace, cfg.itae_norm);
        res.metrics.epsilon = m.epsilon;
        res.metrics.j_u = m.j_u;
        res.metrics.ok = m.ok;
        res.status = res.trace.aborted ? "diverged" : res.trace.solver_failures() > 0 ? "fallback" : "ok";
    } catch (const std::exception& e) {
        res.metrics.epsilon = res.metrics.j_u = std::nan("");
        res.metrics.ok = false;
        std::string what = e.what();
        std::replace(what.begin(), what.end(), ',', ';');
        std::replace(what.begin(), what.end(), '\n', ' ');
        res.status = "error: " + what;
    }
    return res;
}

std::vector<GridPoint> sweep_grid(const ExperimentConfig& cfg) {
    std::vector<GridPoint> grid;
    for (double q : cfg.q_grid)
        for (double r : cfg.r_grid)
            for (double lg : cfg.lambda_g_grid) grid.push_back({control::ControllerKind::Dkpc, {q, r, lg, std::nullopt}});
    for (double q : cfg.q_grid)
        for (double r : cfg.r_grid)
            for (double lg : cfg.lambda_g_grid)
                for (double ls : cfg.lambda_sigma_grid) grid.push_back({control::ControllerKind::Deepc, {q, r, lg, ls}});
    return grid;
}

std::vector<csv::SweepRow> run_sweep(const ExperimentConfig& cfg, const Prepared& prep) {
    if (cfg.q_grid.empty() || cfg.r_grid.empty() || cfg.lambda_g_grid.empty() || cfg.lambda_sigma_grid.empty())
        throw std::invalid_argument("sweep: every grid needs at least one value");
    const auto grid = sweep_grid(cfg);
    std::vector<csv::SweepRow> rows(grid.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < grid.size(); i = next++) {
            ExperimentConfig c = cfg;
            c.kind = grid[i].kind;
            c.q = grid[i].tag.q;
            c.r = grid[i].tag.r;
            c.lambda_g = grid[i].tag.lambda_g;
            c.lambda_sigma = grid[i].tag.lambda_sigma;
            RunResult res = run_once(c, prep);
            rows[i] = {res.metrics, res.status};
        }
    };
    unsigned jobs = cfg.jobs ? cfg.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, grid.size()));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::stable_sort(rows.begin(), rows.end(), [](const csv::SweepRow& a, const csv::SweepRow& b) {
        if (a.metrics.controller != b.metrics.controller) return a.metrics.controller < b.metrics.controller;
        return a.metrics.config < b.metrics.config;
    });
    return rows;
}

Report build_report(const std::vector<csv::SweepRow>& rows, const std::vector<double>& alphas) {
    Report rep;
    std::size_t n_dkpc = 0, n_deepc = 0;
    for (const auto& r : rows) {
        const bool is_dkpc = r.metrics.controller == metrics::ControllerTag::Dkpc;
        (is_dkpc ? n_dkpc : n_deepc)++;
        if (!std::isfinite(r.metrics.epsilon) || !std::isfinite(r.metrics.j_u)) continue;
        (is_dkpc ? rep.dkpc : rep.deepc).push_back(r.metrics);
    }
    std::size_t front_dkpc = 0;
    if (!rep.dkpc.empty()) {
        rep.frontier = metrics::pareto_frontier(rep.dkpc);
        front_dkpc = rep.frontier.size();
    }
    if (!rep.deepc.empty()) {
        const auto f = metrics::pareto_frontier(rep.deepc);
        rep.frontier.insert(rep.frontier.end(), f.begin(), f.end());
    }

    std::ostringstream s;
    s << "runs: dkpc " << n_dkpc << " (" << rep.dkpc.size() << " usable), deepc " << n_deepc << " ("
      << rep.deepc.size() << " usable)\n";
    s << "frontier points: dkpc " << front_dkpc << ", deepc " << rep.frontier.size() - front_dkpc << "\n";
    if (rep.dkpc.empty() || rep.deepc.empty()) {
        s << "mixed index comparison skipped: one controller has no usable runs\n";
        rep.summary = s.str();
        return rep;
    }
    rep.winners = metrics::best_per_alpha(rep.dkpc, rep.deepc, alphas);
    std::size_t dkpc_lower = 0, deepc_lower = 0;
    s << "\n" << std::left << std::setw(8) << "alpha" << std::setw(14) << "S_dkpc" << std::setw(14) << "S_deepc"
      << "lower\n";
    for (const auto& w : rep.winners) {
        const char* lower = w.dkpc_score < w.deepc_score ? "dkpc" : w.deepc_score < w.dkpc_score ? "deepc" : "tie";
        if (w.dkpc_score < w.deepc_score) ++dkpc_lower;
        if (w.deepc_score < w.dkpc_score) ++deepc_lower;
        char line[96];
        std::snprintf(line, sizeof line, "%-8.3f%-14.6g%-14.6g%s\n", w.alpha, w.dkpc_score, w.deepc_score, lower);
        s << line;
    }
    s << "\ndkpc lower at " << dkpc_lower << " of " << rep.winners.size() << " alphas, deepc lower at "
      << deepc_lower << "\n";
    rep.summary = s.str();
    return rep;
}

std::vector<fs::path> cmd_gen_data(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    const fs::path root = output_root(cfg);
    fs::create_directories(root);
    const Dataset ds = generate_dataset(cfg);
    const std::string hash = config_hash(cfg);

    const fs::path data = root / kDataFile, bank = root / kBankFile, conf = root / "config.ini";
    {
        auto out = open_out(data);
        csv::write_trajectory(out, ds.data, hash);
    }
    save_bank(bank.string(), ds.bank);
    {
        auto out = open_out(conf);
        write_config(out, cfg);
    }

    const RankReport pe = is_persistently_exciting(ds.data.u, cfg.n_basis + cfg.t_ini + cfg.horizon);
    log << "gen-data: T = " << ds.data.length() << ", max |y| = " << ds.data.y.cwiseAbs().maxCoeff() << "\n";
    if (pe.full_row_rank)
        log << "gen-data: input is persistently exciting of order " << cfg.n_basis + cfg.t_ini + cfg.horizon
            << " (rank " << pe.rank << ")\n";
    else
        log << "warning: input is not persistently exciting of order " << cfg.n_basis + cfg.t_ini + cfg.horizon
            << ": " << pe.reason << "\n";
    return {data, bank, conf};
}

std::vector<fs::path> cmd_run(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    const fs::path root = output_root(cfg);
    const Prepared prep = prepare(cfg, load_dataset(root));
    const RunResult res = run_once(cfg, prep);
    const std::string hash = config_hash(cfg);

    const std::string kind = control::to_string(cfg.kind);
    const fs::path trace = root / ("trace_" + kind + ".csv"), row = root / ("metrics_" + kind + ".csv");
    {
        auto out = open_out(trace);
        csv::write_trace(out, res.trace, hash);
    }
    {
        auto out = open_out(row);
        csv::write_sweep(out, {{res.metrics, res.status}}, hash);
    }
    const double pre = mean_abs(res.trace, cfg.activation_step - 10, cfg.activation_step);
    const double fin = mean_abs(res.trace, cfg.t_sim - 20, cfg.t_sim);
    log << "run " << kind << ": status " << res.status << ", epsilon " << res.metrics.epsilon << ", J_u "
        << res.metrics.j_u << ", solver fallbacks " << res.trace.solver_failures() << "\n";
    log << "run " << kind << ": mean |omega| before activation " << pre << ", over the last 20 steps " << fin
        << "\n";
    return {trace, row};
}

std::vector<fs::path> cmd_sweep(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    const fs::path root = output_root(cfg);
    const Prepared prep = prepare(cfg, load_dataset(root));
    const auto rows = run_sweep(cfg, prep);
    const fs::path path = root / "sweep.csv";
    {
        auto out = open_out(path);
        csv::write_sweep(out, rows, config_hash(cfg));
    }
    std::size_t dk = 0, dp = 0, bad = 0;
    for (const auto& r : rows) {
        (r.metrics.controller == metrics::ControllerTag::Dkpc ? dk : dp)++;
        if (r.status != "ok") ++bad;
    }
    log << "sweep: " << dk << " dkpc rows, " << dp << " deepc rows, " << bad << " not ok\n";
    return {path};
}

std::vector<fs::path> cmd_report(const ExperimentConfig& cfg, const fs::path& sweep_csv,
                                 const std::vector<double>& alphas, std::ostream& log) {
    const fs::path root = output_root(cfg);
    const fs::path src = sweep_csv.empty() ? root / "sweep.csv" : sweep_csv;
    auto in = open_in(src);
    std::vector<csv::SweepRow> rows;
    std::string hash;
    {
        const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        std::istringstream t1(text), t2(text);
        try {
            rows = csv::read_sweep(t1);
        } catch (const csv::ParseError& e) {
            throw std::runtime_error(src.string() + ": " + e.what());
        }
        const auto meta = csv::read_table(t2).meta;
        const auto it = meta.find("config_hash");
        hash = it != meta.end() ? it->second : config_hash(cfg);
    }
    const Report rep = build_report(rows, alphas);

    fs::create_directories(root);
    const fs::path frontier = root / "frontier.csv", winners = root / "winners.csv", summary = root / "summary.txt";
    {
        auto out = open_out(frontier);
        csv::write_frontier(out, rep.frontier, hash);
    }
    {
        auto out = open_out(winners);
        csv::write_winners(out, rep.winners, rep.dkpc, rep.deepc, hash);
    }
    {
        auto out = open_out(summary);
        out << "# config_hash=" << hash << "\n" << rep.summary;
    }
    log << rep.summary;
    return {frontier, winners, summary};
}

} // namespace dkpc::experiment
