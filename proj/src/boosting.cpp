#include "boostfgl/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace boostfgl {

void update_difficulty(DifficultyState& state, const Matrix& probs,
                       const std::vector<int>& train_labels) {
    const long n = probs.rows();
    if (state.d_bar.size() != n ||
        static_cast<long>(train_labels.size()) != n) {
        throw ContractError("difficulty state does not match prediction rows");
    }
    for (long v = 0; v < n; ++v) {
        double row_sum = probs.row(v).sum();
        if (std::abs(row_sum - 1.0) > 1e-6) {
            throw ContractError("prediction row " + std::to_string(v) +
                                " is not normalized (sum=" +
                                std::to_string(row_sum) + ")");
        }
        double d = train_labels[v] != kUnlabeled
                       ? 1.0 - probs(v, train_labels[v])
                       : 1.0 - probs.row(v).maxCoeff();
        state.d_bar(v) = (1.0 - state.mu) * state.d_bar(v) + state.mu * d;
    }
    ++state.round;
}

Vector node_weights(const DifficultyState& state, double lambda_n) {
    Vector alpha(state.d_bar.size());
    for (long v = 0; v < alpha.size(); ++v) {
        double a = 1.0 + lambda_n * state.d_bar(v);
        alpha(v) = std::clamp(a, 1.0, 1.0 + lambda_n);
    }
    return alpha;
}

std::vector<double> edge_scores(const AttributedGraph& g,
                                const DifficultyState& state,
                                const Matrix& probs,
                                const std::vector<int>& train_labels) {
    std::vector<double> scores(g.in_src.size());
    for (int v = 0; v < g.num_nodes; ++v) {
        for (int e = g.in_ptr[v]; e < g.in_ptr[v + 1]; ++e) {
            int u = g.in_src[e];
            double het;
            if (train_labels[u] != kUnlabeled && train_labels[v] != kUnlabeled) {
                het = train_labels[u] != train_labels[v] ? 1.0 : 0.0;
            } else {
                het = 1.0 - probs.row(u).dot(probs.row(v));
            }
            scores[e] = 0.5 * (state.d_bar(u) + state.d_bar(v)) + het;
        }
    }
    return scores;
}

EdgeWeights edge_softmax(const AttributedGraph& g,
                         const std::vector<double>& scores, double lambda_e,
                         const EdgePruneConfig& prune) {
    if (scores.size() != g.in_src.size()) {
        throw ContractError("edge score table does not match in-edge count");
    }
    EdgeWeights ew;
    ew.lambda_e = lambda_e;
    ew.score = scores;
    ew.beta.assign(scores.size(), 0.0);

    std::vector<int> order;
    for (int v = 0; v < g.num_nodes; ++v) {
        int begin = g.in_ptr[v], end = g.in_ptr[v + 1];
        int k = end - begin;
        if (k == 0) continue;

        std::vector<char> keep(k, 1);
        if (prune.enabled && k > 1) {
            int allowed = static_cast<int>(
                std::floor((1.0 - prune.budget) * static_cast<double>(k)));
            if (allowed > 0) {
                order.resize(k);
                std::iota(order.begin(), order.end(), 0);
                std::sort(order.begin(), order.end(), [&](int a, int b) {
                    return scores[begin + a] < scores[begin + b];
                });
                int dropped = 0;
                for (int idx : order) {
                    if (dropped >= allowed) break;
                    if (scores[begin + idx] < prune.tau) {
                        keep[idx] = 0;
                        ++dropped;
                    }
                }
            }
        }

        double mx = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < k; ++i) {
            if (keep[i]) mx = std::max(mx, scores[begin + i]);
        }
        double denom = 0.0;
        for (int i = 0; i < k; ++i) {
            if (keep[i]) denom += std::exp(lambda_e * (scores[begin + i] - mx));
        }
        for (int i = 0; i < k; ++i) {
            if (keep[i]) {
                ew.beta[begin + i] =
                    std::exp(lambda_e * (scores[begin + i] - mx)) / denom;
            }
        }
    }
    return ew;
}

TrustResult trust_scores(const std::vector<double>& delta_norms,
                         const std::vector<FairnessSummary>& summaries,
                         double lambda_s, double gamma, TrustForm form) {
    if (delta_norms.size() != summaries.size()) {
        throw ContractError("trust inputs disagree on client count");
    }
    if (lambda_s < 0.0 || gamma < 0.0) {
        throw ConfigError("trust hyperparameters must be nonnegative");
    }
    const size_t m = delta_norms.size();
    TrustResult out;
    out.tau.resize(m);
    out.weights.assign(m, 0.0);

    double max_tau = 0.0;
    for (size_t i = 0; i < m; ++i) {
        double gap = std::clamp(summaries[i].gap, 0.0, 1.0);
        double r = delta_norms[i];
        double tau = form == TrustForm::Rational
                         ? 1.0 / ((1.0 + lambda_s * r) * (1.0 + gamma * gap))
                         : std::exp(-lambda_s * r - gamma * gap);
        out.tau[i] = tau;
        max_tau = std::max(max_tau, tau);
    }
    if (max_tau < 1e-300) {
        throw ConfigError(
            "all trust scores underflowed; consider lowering lambda_s");
    }

    double total = 0.0;
    for (size_t i = 0; i < m; ++i) {
        double w = form == TrustForm::Rational
                       ? static_cast<double>(summaries[i].n_labeled) * out.tau[i]
                       : (summaries[i].n_labeled > 0 ? out.tau[i] : 0.0);
        out.weights[i] = w;
        total += w;
    }
    if (total <= 0.0) {
        throw ContractError("no client carries aggregation weight");
    }
    for (double& w : out.weights) w /= total;
    return out;
}

}  // namespace boostfgl
