#pragma once

#include <vector>

#include "boostfgl/graph.hpp"
#include "boostfgl/types.hpp"

namespace boostfgl {

/// Per-node EMA of instantaneous difficulty; stays in [0,1] because each
/// update is a convex combination. Starts at zero.
struct DifficultyState {
    Vector d_bar;
    double mu = 0.1;
    int round = 0;

    static DifficultyState zeros(int num_nodes, double mu) {
        DifficultyState s;
        s.d_bar = Vector::Zero(num_nodes);
        s.mu = mu;
        return s;
    }
};

/// d = 1 - p(y_v | v) for labeled nodes, 1 - max_c p(c | v) otherwise, then
/// d_bar <- (1-mu) d_bar + mu d. train_labels carries the training-visible
/// label per node (kUnlabeled where hidden). Rows of probs must sum to 1.
void update_difficulty(DifficultyState& state, const Matrix& probs,
                       const std::vector<int>& train_labels);

/// alpha_v = clip(1 + lambda_n * d_bar_v, 1, 1 + lambda_n).
Vector node_weights(const DifficultyState& state, double lambda_n);

/// s_uv = (d_bar_u + d_bar_v)/2 + het, het = I[y_u != y_v] when both
/// endpoints carry training labels, else 1 - <p_u, p_v>. Aligned with the
/// graph's in-edge CSR order.
std::vector<double> edge_scores(const AttributedGraph& g,
                                const DifficultyState& state,
                                const Matrix& probs,
                                const std::vector<int>& train_labels);

/// Optional pruning ahead of the softmax: per target, drop up to a
/// (1-budget) fraction of in-edges, lowest score first, among edges with
/// score below tau. Off by default.
struct EdgePruneConfig {
    bool enabled = false;
    double tau = 0.4;
    double budget = 0.75;
};

/// Per-in-edge propagation weights beta_uv = softmax over N(v) of
/// lambda_e * s_uv, stored in in-edge CSR order. Pruned edges get weight 0.
struct EdgeWeights {
    std::vector<double> score;
    std::vector<double> beta;
    double lambda_e = 0.0;
};

EdgeWeights edge_softmax(const AttributedGraph& g,
                         const std::vector<double>& scores, double lambda_e,
                         const EdgePruneConfig& prune = {});

/// Client-side statistics uploaded alongside the update: four decimals plus
/// the labeled-node count.
struct FairnessSummary {
    double mean_minority_difficulty = 0.0;
    double acc_minority = 0.0;
    double acc_majority = 0.0;
    double gap = 0.0;  // clip(acc_majority - acc_minority, 0, 1)
    long n_labeled = 0;
};

enum class TrustForm { Rational, Exponential };

struct TrustResult {
    std::vector<double> tau;
    std::vector<double> weights;  // normalized to sum 1
};

/// Rational form (default): tau = 1/((1+lambda_s r)(1+gamma gap)), weights
/// proportional to N_m * tau. Exponential form: tau = exp(-lambda_s r -
/// gamma gap), weights proportional to tau (clients with N_m = 0 excluded).
TrustResult trust_scores(const std::vector<double>& delta_norms,
                         const std::vector<FairnessSummary>& summaries,
                         double lambda_s, double gamma, TrustForm form);

}  // namespace boostfgl
