#pragma once

#include "dkpc/control.hpp"
#include "dkpc/metrics.hpp"
#include "dkpc/trajectory.hpp"

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace dkpc::csv {

/// Thrown for malformed input; `line` is 1-based within the stream.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Shortest text that parses back to the same double; "nan", "inf" and
/// "-inf" for non-finite values.
std::string format_double(double v);
double parse_double(const std::string& text, std::size_t line = 0);

/// Comma-separated table. Lines of the form "# key=value" before the header
/// land in `meta`; other '#' lines and blank lines are skipped.
struct Table {
    std::map<std::string, std::string> meta;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> row_lines; ///< source line of every row

    /// Index of a header column; throws if missing.
    std::size_t column(const std::string& name) const;
};

Table read_table(std::istream& in);

/// Writes "# key=value" for every entry, starting with config_hash.
void write_meta(std::ostream& out, const std::string& config_hash,
                const std::map<std::string, std::string>& extra = {});

/// k,t,u_1..u_n,y_1..y_n
void write_trajectory(std::ostream& out, const Trajectory& traj, const std::string& config_hash);
Trajectory read_trajectory(std::istream& in);

/// k,t,active,u_1..u_n,y_1..y_n,cost,status,iters
void write_trace(std::ostream& out, const control::ClosedLoopTrace& trace, const std::string& config_hash);

struct SweepRow {
    metrics::RunMetrics metrics;
    std::string status = "ok";
};

/// controller,q,r,lambda_g,lambda_sigma,epsilon,j_u,status
void write_sweep(std::ostream& out, const std::vector<SweepRow>& rows, const std::string& config_hash);
std::vector<SweepRow> read_sweep(std::istream& in);

/// controller,q,r,lambda_g,lambda_sigma,epsilon,j_u
void write_frontier(std::ostream& out, const std::vector<metrics::FrontierPoint>& points,
                    const std::string& config_hash);

/// One row per alpha with the winning configuration and score of each controller.
void write_winners(std::ostream& out, const std::vector<metrics::AlphaWinner>& table,
                   const std::vector<metrics::RunMetrics>& dkpc, const std::vector<metrics::RunMetrics>& deepc,
                   const std::string& config_hash);

} // namespace dkpc::csv
