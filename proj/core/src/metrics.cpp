#include "dkpc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dkpc::metrics {

ChannelNorm parse_channel_norm(const std::string& text) {
    if (text == "sum") return ChannelNorm::Sum;
    if (text == "euclidean") return ChannelNorm::Euclidean;
    throw std::invalid_argument("unknown channel norm: " + text);
}

std::string to_string(ChannelNorm norm) { return norm == ChannelNorm::Sum ? "sum" : "euclidean"; }

double itae(const Matrix& errors, double dt, Index first_step, ChannelNorm norm) {
    double total = 0.0;
    for (Index j = 0; j < errors.cols(); ++j) {
        const double mag = norm == ChannelNorm::Sum ? errors.col(j).cwiseAbs().sum() : errors.col(j).norm();
        total += static_cast<double>(first_step + j) * dt * mag;
    }
    return total;
}

double control_effort(const Matrix& inputs) {
    double total = 0.0;
    for (Index j = 0; j < inputs.cols(); ++j) total += inputs.col(j).norm();
    return total;
}

std::string to_string(ControllerTag tag) { return tag == ControllerTag::Dkpc ? "dkpc" : "deepc"; }

ControllerTag parse_controller_tag(const std::string& text) {
    if (text == "dkpc") return ControllerTag::Dkpc;
    if (text == "deepc") return ControllerTag::Deepc;
    throw std::invalid_argument("unknown controller: " + text);
}

namespace {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    double normalize(double v) const { return hi > lo ? (v - lo) / (hi - lo) : 0.0; }
};

std::pair<Range, Range> ranges(const std::vector<RunMetrics>& pool) {
    Range e{pool.front().epsilon, pool.front().epsilon};
    Range j{pool.front().j_u, pool.front().j_u};
    for (const auto& p : pool) {
        e.lo = std::min(e.lo, p.epsilon);
        e.hi = std::max(e.hi, p.epsilon);
        j.lo = std::min(j.lo, p.j_u);
        j.hi = std::max(j.hi, p.j_u);
    }
    return {e, j};
}

bool dominates(const FrontierPoint& a, const FrontierPoint& b) {
    return a.epsilon <= b.epsilon && a.j_u <= b.j_u && (a.epsilon < b.epsilon || a.j_u < b.j_u);
}

} // namespace

std::vector<double> mixed_index(const std::vector<RunMetrics>& points, double alpha,
                                const std::vector<RunMetrics>& pool) {
    if (points.empty() || pool.empty()) throw std::invalid_argument("mixed_index: empty collection");
    const auto [e, j] = ranges(pool);
    std::vector<double> s;
    s.reserve(points.size());
    for (const auto& p : points) s.push_back(alpha * e.normalize(p.epsilon) + (1.0 - alpha) * j.normalize(p.j_u));
    return s;
}

std::vector<double> mixed_index(const std::vector<RunMetrics>& points, double alpha) {
    return mixed_index(points, alpha, points);
}

std::vector<FrontierPoint> pareto_frontier(const std::vector<FrontierPoint>& points) {
    // Sort by (j_u, epsilon); a point survives iff its epsilon is no larger than
    // the best epsilon seen at strictly smaller j_u, or ties it exactly.
    std::vector<FrontierPoint> sorted = points;
    std::stable_sort(sorted.begin(), sorted.end(), [](const FrontierPoint& a, const FrontierPoint& b) {
        return a.j_u != b.j_u ? a.j_u < b.j_u : a.epsilon < b.epsilon;
    });
    std::vector<FrontierPoint> front;
    for (const auto& p : sorted) {
        // The last frontier point has the smallest epsilon among all points
        // with j_u <= p.j_u, so it is the only dominance candidate.
        if (!front.empty() && dominates(front.back(), p)) continue;
        front.push_back(p);
    }
    return front;
}

std::vector<FrontierPoint> pareto_frontier(const std::vector<RunMetrics>& points) {
    std::vector<FrontierPoint> pts;
    pts.reserve(points.size());
    for (const auto& p : points) pts.push_back({p.j_u, p.epsilon, p.config, p.controller});
    return pareto_frontier(pts);
}

std::vector<AlphaWinner> best_per_alpha(const std::vector<RunMetrics>& dkpc, const std::vector<RunMetrics>& deepc,
                                        const std::vector<double>& alphas) {
    if (dkpc.empty() || deepc.empty()) throw std::invalid_argument("best_per_alpha: empty run set");
    std::vector<RunMetrics> pool = dkpc;
    pool.insert(pool.end(), deepc.begin(), deepc.end());
    std::vector<AlphaWinner> table;
    table.reserve(alphas.size());
    for (double alpha : alphas) {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("best_per_alpha: alpha outside [0, 1]");
        const auto sd = mixed_index(dkpc, alpha, pool);
        const auto sp = mixed_index(deepc, alpha, pool);
        const auto bd = std::min_element(sd.begin(), sd.end());
        const auto bp = std::min_element(sp.begin(), sp.end());
        table.push_back({alpha, static_cast<std::size_t>(bd - sd.begin()), *bd,
                         static_cast<std::size_t>(bp - sp.begin()), *bp});
    }
    return table;
}

std::vector<double> uniform_alphas(std::size_t count) {
    if (count == 0) return {};
    if (count == 1) return {0.0};
    std::vector<double> a(count);
    for (std::size_t i = 0; i < count; ++i) a[i] = static_cast<double>(i) / static_cast<double>(count - 1);
    return a;
}

} // namespace dkpc::metrics
