#include "boostfgl/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace boostfgl {

namespace {

nlohmann::json opt_to_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

}  // namespace

nlohmann::json RoundDiagnostics::to_json() const {
    nlohmann::json j;
    j["round"] = round;
    j["gsd"] = opt_to_json(gsd);
    j["gsd_raw"] = opt_to_json(gsd_raw);
    j["gsd_per_client"] = nlohmann::json::array();
    for (const auto& g : gsd_per_client) j["gsd_per_client"].push_back(opt_to_json(g));
    j["neg_epr_minority"] = opt_to_json(neg_epr_minority);
    j["neg_epr_majority"] = opt_to_json(neg_epr_majority);
    j["dr"] = opt_to_json(dr);
    j["alignments"] = alignments;
    j["alignment_cosines"] = alignment_cosines;
    j["hardness_per_client"] = hardness_per_client;
    j["khop_error"] = nlohmann::json::array();
    for (const auto& e : khop_error) j["khop_error"].push_back(opt_to_json(e));
    j["trust_weights"] = trust_weights;
    return j;
}

std::optional<double> gsd_ratio(double minority_mass, long minority_count,
                                double majority_mass, long majority_count) {
    if (minority_count == 0 || majority_count == 0) return std::nullopt;
    double min_per_capita = minority_mass / static_cast<double>(minority_count);
    double maj_per_capita = majority_mass / static_cast<double>(majority_count);
    return min_per_capita / (maj_per_capita + kEps);
}

namespace {

// Shared state for evaluating many EPR ablations against one forward pass.
struct EprEvaluator {
    const AttributedGraph& g;
    const std::vector<int>& labels;
    const ModelParams& params;
    AggGraph agg;
    ForwardCache cache;

    EprEvaluator(const AttributedGraph& graph,
                 const std::vector<int>& train_labels, const ModelParams& p,
                 const EdgeWeights& beta)
        : g(graph), labels(train_labels), params(p) {
        agg = AggGraph::build(g, beta.beta);
        gnn_forward(params, agg, g.features, false, 0.0, nullptr, &cache);
    }

    static double ce(const Eigen::RowVectorXd& z, int y) {
        double mx = z.maxCoeff();
        return std::log((z.array() - mx).exp().sum()) + mx - z(y);
    }

    double loss_full(int v) const { return ce(cache.logits.row(v), labels[v]); }

    // Loss at v with source u removed from v's slice and the remaining
    // weights renormalized. Returns the full loss unchanged when u carries
    // no weight.
    double loss_ablated(int v, int u) const {
        int begin = agg.ptr[v], end = agg.ptr[v + 1];
        double wu = 0.0;
        for (int e = begin; e < end; ++e) {
            if (agg.src[e] == u) wu = agg.w[e];
        }
        if (wu == 0.0) return loss_full(v);
        double rescale = 1.0 / (1.0 - wu);

        Eigen::RowVectorXd agg_x =
            Eigen::RowVectorXd::Zero(g.features.cols());
        for (int e = begin; e < end; ++e) {
            if (agg.src[e] == u) continue;
            agg_x += (agg.w[e] * rescale) * g.features.row(agg.src[e]);
        }
        Eigen::RowVectorXd z0 =
            agg_x * params.w0 + params.b0.transpose();
        Eigen::RowVectorXd h1v = z0.cwiseMax(0.0);

        Eigen::RowVectorXd agg_h = Eigen::RowVectorXd::Zero(params.w0.cols());
        for (int e = begin; e < end; ++e) {
            int s = agg.src[e];
            if (s == u) continue;
            double w = agg.w[e] * rescale;
            agg_h += w * (s == v ? h1v : cache.h1.row(s));
        }
        Eigen::RowVectorXd logits = agg_h * params.w1 + params.b1.transpose();
        return ce(logits, labels[v]);
    }
};

}  // namespace

double epr(const AttributedGraph& g, const std::vector<int>& train_labels,
           const ModelParams& params, const EdgeWeights& beta, int u, int v) {
    if (train_labels[v] == kUnlabeled) {
        throw ContractError("EPR target node " + std::to_string(v) +
                            " is unlabeled");
    }
    EprEvaluator ev(g, train_labels, params, beta);
    return ev.loss_ablated(v, u) - ev.loss_full(v);
}

NegEprRatio neg_epr_ratio(const AttributedGraph& g,
                          const std::vector<int>& train_labels,
                          const ModelParams& params, const EdgeWeights& beta,
                          const std::vector<char>& minority_class_mask) {
    EprEvaluator ev(g, train_labels, params, beta);
    NegEprRatio out;
    for (int v = 0; v < g.num_nodes; ++v) {
        if (train_labels[v] == kUnlabeled) continue;
        bool minority = minority_class_mask[train_labels[v]] != 0;
        double full = ev.loss_full(v);
        for (int e = g.in_ptr[v]; e < g.in_ptr[v + 1]; ++e) {
            double value = ev.loss_ablated(v, g.in_src[e]) - full;
            if (minority) {
                ++out.minority_edges;
                if (value < 0.0) ++out.minority_negative;
            } else {
                ++out.majority_edges;
                if (value < 0.0) ++out.majority_negative;
            }
        }
    }
    if (out.minority_edges > 0) {
        out.minority = static_cast<double>(out.minority_negative) /
                       static_cast<double>(out.minority_edges);
    }
    if (out.majority_edges > 0) {
        out.majority = static_cast<double>(out.majority_negative) /
                       static_cast<double>(out.majority_edges);
    }
    return out;
}

std::vector<std::optional<double>> khop_error_profile(
    const AttributedGraph& g, const std::vector<int>& preds,
    const GroupAssignment& groups, int max_hop) {
    std::vector<int> dist(g.num_nodes, -1);
    std::deque<int> queue;
    auto seed_from = [&](const std::vector<int>& nodes) {
        for (int v : nodes) {
            if (dist[v] != 0) {
                dist[v] = 0;
                queue.push_back(v);
            }
        }
    };
    seed_from(groups.hete_nodes);
    seed_from(groups.minority_nodes);

    while (!queue.empty()) {
        int v = queue.front();
        queue.pop_front();
        for (int u : g.und_neighbors(v)) {
            if (dist[u] < 0) {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }

    std::vector<long> wrong(max_hop + 1, 0), total(max_hop + 1, 0);
    for (int v = 0; v < g.num_nodes; ++v) {
        if (g.splits[v] != Split::Test) continue;
        if (dist[v] < 0 || dist[v] > max_hop) continue;
        ++total[dist[v]];
        if (preds[v] != g.labels[v]) ++wrong[dist[v]];
    }
    std::vector<std::optional<double>> profile(max_hop + 1);
    for (int h = 0; h <= max_hop; ++h) {
        if (total[h] > 0) {
            profile[h] =
                static_cast<double>(wrong[h]) / static_cast<double>(total[h]);
        }
    }
    return profile;
}

std::optional<ModelParams> minority_direction(
    const std::vector<ModelParams>& grad_sums, const std::vector<long>& counts) {
    long total = 0;
    for (long c : counts) total += c;
    if (total == 0) return std::nullopt;
    ModelParams dir = ModelParams::zeros(
        (int)grad_sums.front().w0.rows(), (int)grad_sums.front().w0.cols(),
        (int)grad_sums.front().w1.cols());
    for (const auto& g : grad_sums) dir += g;
    dir.scale(-1.0 / static_cast<double>(total));
    return dir;
}

AlignmentResult update_alignments(const std::vector<ModelParams>& deltas,
                                  const ModelParams& g_min) {
    AlignmentResult out;
    double gnorm = g_min.norm();
    for (const auto& d : deltas) {
        double a = d.dot(g_min);
        out.inner.push_back(a);
        double dn = d.norm();
        out.cosine.push_back(dn > 0.0 && gnorm > 0.0 ? a / (dn * gnorm) : 0.0);
    }
    return out;
}

double dilution_ratio(const std::vector<ModelParams>& deltas,
                      const std::vector<double>& weights,
                      const ModelParams& g_min, double epsilon) {
    if (deltas.size() != weights.size()) {
        throw ContractError("dilution ratio inputs disagree on client count");
    }
    double numerator = 0.0;
    double positive_mean = 0.0;
    for (size_t i = 0; i < deltas.size(); ++i) {
        double a = deltas[i].dot(g_min);
        numerator += weights[i] * a;
        positive_mean += std::max(a, 0.0);
    }
    positive_mean /= static_cast<double>(deltas.size());
    return numerator / (positive_mean + epsilon);
}

double client_hardness(const ClientSubgraph& client,
                       const GroupAssignment& groups) {
    long labeled = 0, labeled_minority = 0;
    long test = 0, test_hete = 0;
    for (int i = 0; i < client.local.num_nodes; ++i) {
        int global = client.global_ids[i];
        if (client.local.splits[i] == Split::Train &&
            client.local.labels[i] != kUnlabeled) {
            ++labeled;
            if (groups.is_minority_class[client.local.labels[i]]) {
                ++labeled_minority;
            }
        }
        if (client.local.splits[i] == Split::Test) {
            ++test;
            if (std::binary_search(groups.hete_nodes.begin(),
                                   groups.hete_nodes.end(), global)) {
                ++test_hete;
            }
        }
    }
    double minority_frac =
        labeled > 0 ? static_cast<double>(labeled_minority) / labeled : 0.0;
    double hete_frac = test > 0 ? static_cast<double>(test_hete) / test : 0.0;
    return 0.5 * minority_frac + 0.5 * hete_frac;
}

}  // namespace boostfgl
