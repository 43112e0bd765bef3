#pragma once

#include "dkpc/trajectory.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dkpc::metrics {

enum class ChannelNorm { Sum, Euclidean };

ChannelNorm parse_channel_norm(const std::string& text);
std::string to_string(ChannelNorm norm);

/// Integrated time-weighted absolute error: sum_k t_k |e_k| with
/// t_k = (first_step + j) dt for column j of `errors`. Channels of a column
/// are reduced by `norm` (sum of absolute values by default).
double itae(const Matrix& errors, double dt, Index first_step = 1, ChannelNorm norm = ChannelNorm::Sum);

/// sum_k ||u_k||_2 over the columns of `inputs`.
double control_effort(const Matrix& inputs);

enum class ControllerTag { Dkpc, Deepc };

std::string to_string(ControllerTag tag);
ControllerTag parse_controller_tag(const std::string& text);

struct ConfigTag {
    double q = 0.0;
    double r = 0.0;
    double lambda_g = 0.0;
    std::optional<double> lambda_sigma;

    auto operator<=>(const ConfigTag&) const = default;
};

struct RunMetrics {
    ControllerTag controller = ControllerTag::Dkpc;
    ConfigTag config;
    double epsilon = 0.0;
    double j_u = 0.0;
    bool ok = true;
};

struct FrontierPoint {
    double j_u = 0.0;
    double epsilon = 0.0;
    ConfigTag config;
    ControllerTag controller = ControllerTag::Dkpc;
};

/// Min-max normalized S_alpha = alpha * eps_hat + (1 - alpha) * ju_hat for
/// every point. A collapsed axis normalizes to 0.
std::vector<double> mixed_index(const std::vector<RunMetrics>& points, double alpha);

/// Same, with the normalization ranges taken from `pool` instead of `points`.
std::vector<double> mixed_index(const std::vector<RunMetrics>& points, double alpha,
                                const std::vector<RunMetrics>& pool);

/// Non-dominated subset under componentwise <= on (epsilon, j_u), sorted by
/// j_u ascending (then epsilon). Duplicates of a frontier point are kept.
std::vector<FrontierPoint> pareto_frontier(const std::vector<RunMetrics>& points);
std::vector<FrontierPoint> pareto_frontier(const std::vector<FrontierPoint>& points);

struct AlphaWinner {
    double alpha = 0.0;
    std::size_t dkpc_index = 0;
    double dkpc_score = 0.0;
    std::size_t deepc_index = 0;
    double deepc_score = 0.0;
};

/// For every alpha, the configuration with the smallest S_alpha per controller.
/// Normalization pools both sets. Ties resolve to the earliest index.
std::vector<AlphaWinner> best_per_alpha(const std::vector<RunMetrics>& dkpc, const std::vector<RunMetrics>& deepc,
                                        const std::vector<double>& alphas);

std::vector<double> uniform_alphas(std::size_t count);

} // namespace dkpc::metrics
