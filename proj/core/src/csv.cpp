#include "dkpc/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace dkpc::csv {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, std::size_t line) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || first == last)
        throw ParseError("not a number: '" + text + "'", line);
    return v;
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

Index parse_index(const std::string& text, std::size_t line) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw ParseError("not an integer: '" + text + "'", line);
    return static_cast<Index>(v);
}

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out << ',';
        out << cells[i];
    }
    out << '\n';
}

std::vector<std::string> config_cells(const metrics::ConfigTag& c) {
    return {format_double(c.q), format_double(c.r), format_double(c.lambda_g),
            c.lambda_sigma ? format_double(*c.lambda_sigma) : std::string{}};
}

} // namespace

std::size_t Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw std::invalid_argument("csv: missing column '" + name + "'");
}

Table read_table(std::istream& in) {
    Table t;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        const std::string s = trim(line);
        if (s.empty()) continue;
        if (s.front() == '#') {
            const auto eq = s.find('=');
            if (t.header.empty() && eq != std::string::npos)
                t.meta[trim(s.substr(1, eq - 1))] = trim(s.substr(eq + 1));
            continue;
        }
        auto cells = split(s);
        for (auto& c : cells) c = trim(c);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw ParseError("expected " + std::to_string(t.header.size()) + " fields, found " +
                                 std::to_string(cells.size()),
                             n);
        t.rows.push_back(std::move(cells));
        t.row_lines.push_back(n);
    }
    if (t.header.empty()) throw ParseError("no header row", n);
    return t;
}

void write_meta(std::ostream& out, const std::string& config_hash, const std::map<std::string, std::string>& extra) {
    out << "# config_hash=" << config_hash << '\n';
    for (const auto& [k, v] : extra) out << "# " << k << '=' << v << '\n';
}

void write_trajectory(std::ostream& out, const Trajectory& traj, const std::string& config_hash) {
    traj.validate();
    write_meta(out, config_hash, {{"dt", format_double(traj.dt)}});
    std::vector<std::string> head{"k", "t"};
    for (Index i = 0; i < traj.n_u(); ++i) head.push_back("u_" + std::to_string(i + 1));
    for (Index i = 0; i < traj.n_y(); ++i) head.push_back("y_" + std::to_string(i + 1));
    write_row(out, head);
    for (Index k = 0; k < traj.length(); ++k) {
        std::vector<std::string> row{std::to_string(k), format_double(static_cast<double>(k) * traj.dt)};
        for (Index i = 0; i < traj.n_u(); ++i) row.push_back(format_double(traj.u(i, k)));
        for (Index i = 0; i < traj.n_y(); ++i) row.push_back(format_double(traj.y(i, k)));
        write_row(out, row);
    }
}

Trajectory read_trajectory(std::istream& in) {
    const Table t = read_table(in);
    std::vector<std::size_t> ucols, ycols;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (t.header[c].rfind("u_", 0) == 0) ucols.push_back(c);
        if (t.header[c].rfind("y_", 0) == 0) ycols.push_back(c);
    }
    if (ucols.empty() || ycols.empty()) throw std::invalid_argument("trajectory csv: no u_/y_ columns");
    Trajectory traj;
    const auto T = static_cast<Index>(t.rows.size());
    traj.u.resize(static_cast<Index>(ucols.size()), T);
    traj.y.resize(static_cast<Index>(ycols.size()), T);
    const std::size_t kcol = t.column("k");
    for (Index k = 0; k < T; ++k) {
        const auto& row = t.rows[static_cast<std::size_t>(k)];
        const std::size_t line = t.row_lines[static_cast<std::size_t>(k)];
        if (parse_index(row[kcol], line) != k) throw ParseError("step index out of sequence", line);
        for (std::size_t i = 0; i < ucols.size(); ++i) traj.u(static_cast<Index>(i), k) = parse_double(row[ucols[i]], line);
        for (std::size_t i = 0; i < ycols.size(); ++i) traj.y(static_cast<Index>(i), k) = parse_double(row[ycols[i]], line);
    }
    if (auto it = t.meta.find("dt"); it != t.meta.end()) traj.dt = parse_double(it->second);
    traj.validate();
    return traj;
}

void write_trace(std::ostream& out, const control::ClosedLoopTrace& trace, const std::string& config_hash) {
    std::map<std::string, std::string> extra{{"activation_step", std::to_string(trace.activation_step)}};
    if (trace.aborted) extra["aborted"] = trace.error;
    write_meta(out, config_hash, extra);
    const Index n_u = trace.steps.empty() ? 0 : trace.steps.front().u.size();
    const Index n_y = trace.steps.empty() ? 0 : trace.steps.front().y.size();
    std::vector<std::string> head{"k", "t", "active"};
    for (Index i = 0; i < n_u; ++i) head.push_back("u_" + std::to_string(i + 1));
    for (Index i = 0; i < n_y; ++i) head.push_back("y_" + std::to_string(i + 1));
    head.insert(head.end(), {"cost", "status", "iters"});
    write_row(out, head);
    for (const auto& s : trace.steps) {
        std::vector<std::string> row{std::to_string(s.k), format_double(s.t), s.active ? "1" : "0"};
        for (Index i = 0; i < n_u; ++i) row.push_back(format_double(s.u(i)));
        for (Index i = 0; i < n_y; ++i) row.push_back(format_double(s.y(i)));
        row.push_back(format_double(s.cost));
        row.push_back(s.status ? qp::to_string(*s.status) : "inactive");
        row.push_back(std::to_string(s.iterations));
        write_row(out, row);
    }
}

void write_sweep(std::ostream& out, const std::vector<SweepRow>& rows, const std::string& config_hash) {
    write_meta(out, config_hash);
    write_row(out, {"controller", "q", "r", "lambda_g", "lambda_sigma", "epsilon", "j_u", "status"});
    for (const auto& r : rows) {
        std::vector<std::string> row{metrics::to_string(r.metrics.controller)};
        for (auto& c : config_cells(r.metrics.config)) row.push_back(std::move(c));
        row.push_back(format_double(r.metrics.epsilon));
        row.push_back(format_double(r.metrics.j_u));
        row.push_back(r.status);
        write_row(out, row);
    }
}

std::vector<SweepRow> read_sweep(std::istream& in) {
    const Table t = read_table(in);
    const std::size_t c_ctrl = t.column("controller"), c_q = t.column("q"), c_r = t.column("r"),
                      c_lg = t.column("lambda_g"), c_ls = t.column("lambda_sigma"), c_eps = t.column("epsilon"),
                      c_ju = t.column("j_u");
    std::size_t c_status = t.header.size();
    for (std::size_t c = 0; c < t.header.size(); ++c)
        if (t.header[c] == "status") c_status = c;

    std::vector<SweepRow> out;
    out.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::size_t line = t.row_lines[i];
        SweepRow r;
        try {
            r.metrics.controller = metrics::parse_controller_tag(row[c_ctrl]);
        } catch (const std::invalid_argument& e) {
            throw ParseError(e.what(), line);
        }
        r.metrics.config.q = parse_double(row[c_q], line);
        r.metrics.config.r = parse_double(row[c_r], line);
        r.metrics.config.lambda_g = parse_double(row[c_lg], line);
        if (!row[c_ls].empty()) r.metrics.config.lambda_sigma = parse_double(row[c_ls], line);
        if (r.metrics.controller == metrics::ControllerTag::Deepc && !r.metrics.config.lambda_sigma)
            throw ParseError("deepc row without lambda_sigma", line);
        if (r.metrics.controller == metrics::ControllerTag::Dkpc && r.metrics.config.lambda_sigma)
            throw ParseError("dkpc row with lambda_sigma", line);
        r.metrics.epsilon = parse_double(row[c_eps], line);
        r.metrics.j_u = parse_double(row[c_ju], line);
        if (c_status < row.size()) r.status = row[c_status];
        r.metrics.ok = std::isfinite(r.metrics.epsilon) && std::isfinite(r.metrics.j_u);
        if (r.metrics.ok && (r.metrics.epsilon < 0.0 || r.metrics.j_u < 0.0))
            throw ParseError("negative metric", line);
        out.push_back(std::move(r));
    }
    return out;
}

void write_frontier(std::ostream& out, const std::vector<metrics::FrontierPoint>& points,
                    const std::string& config_hash) {
    write_meta(out, config_hash);
    write_row(out, {"controller", "q", "r", "lambda_g", "lambda_sigma", "epsilon", "j_u"});
    for (const auto& p : points) {
        std::vector<std::string> row{metrics::to_string(p.controller)};
        for (auto& c : config_cells(p.config)) row.push_back(std::move(c));
        row.push_back(format_double(p.epsilon));
        row.push_back(format_double(p.j_u));
        write_row(out, row);
    }
}

void write_winners(std::ostream& out, const std::vector<metrics::AlphaWinner>& table,
                   const std::vector<metrics::RunMetrics>& dkpc, const std::vector<metrics::RunMetrics>& deepc,
                   const std::string& config_hash) {
    write_meta(out, config_hash);
    write_row(out, {"alpha", "dkpc_q", "dkpc_r", "dkpc_lambda_g", "dkpc_score", "deepc_q", "deepc_r",
                    "deepc_lambda_g", "deepc_lambda_sigma", "deepc_score", "lower"});
    for (const auto& w : table) {
        const auto& d = dkpc.at(w.dkpc_index).config;
        const auto& p = deepc.at(w.deepc_index).config;
        const char* lower = w.dkpc_score < w.deepc_score ? "dkpc" : w.deepc_score < w.dkpc_score ? "deepc" : "tie";
        write_row(out, {format_double(w.alpha), format_double(d.q), format_double(d.r), format_double(d.lambda_g),
                        format_double(w.dkpc_score), format_double(p.q), format_double(p.r),
                        format_double(p.lambda_g), p.lambda_sigma ? format_double(*p.lambda_sigma) : "",
                        format_double(w.deepc_score), lower});
    }
}

} // namespace dkpc::csv
