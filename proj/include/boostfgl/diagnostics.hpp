#pragma once

#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "boostfgl/boosting.hpp"
#include "boostfgl/gnn.hpp"
#include "boostfgl/graph.hpp"
#include "boostfgl/partition.hpp"

namespace boostfgl {

/// Process-level fairness signals for one round. All fields are pure
/// functions of the logged snapshots.
struct RoundDiagnostics {
    int round = 0;
    std::optional<double> gsd;           // alpha-weighted gradient-share ratio
    std::optional<double> gsd_raw;       // unweighted variant
    std::vector<std::optional<double>> gsd_per_client;
    std::optional<double> neg_epr_minority;
    std::optional<double> neg_epr_majority;
    std::optional<double> dr;
    std::vector<double> alignments;
    std::vector<double> alignment_cosines;
    std::vector<double> hardness_per_client;
    std::vector<std::optional<double>> khop_error;
    std::vector<double> trust_weights;

    nlohmann::json to_json() const;
};

/// Per-capita gradient mass of the minority group over the majority's, with
/// a 1e-12 denominator guard. nullopt when either group is empty.
std::optional<double> gsd_ratio(double minority_mass, long minority_count,
                                double majority_mass, long majority_count);

/// Signed effect of message (u -> v) on v's loss: loss with the edge ablated
/// minus the full loss. Ablation removes u from v's aggregation slice and
/// renormalizes the remainder (self weight included); a weight-0 edge
/// therefore has EPR exactly 0. Dropout must be off.
double epr(const AttributedGraph& g, const std::vector<int>& train_labels,
           const ModelParams& params, const EdgeWeights& beta, int u, int v);

struct NegEprRatio {
    std::optional<double> minority, majority;
    long minority_edges = 0, majority_edges = 0;
    long minority_negative = 0, majority_negative = 0;
};

/// Fraction of in-edges with negative EPR among edges into labeled nodes,
/// split by the target's group membership.
NegEprRatio neg_epr_ratio(const AttributedGraph& g,
                          const std::vector<int>& train_labels,
                          const ModelParams& params, const EdgeWeights& beta,
                          const std::vector<char>& minority_class_mask);

/// Misclassification rate among test nodes at exact BFS distance h from the
/// union of the heterophilous and minority groups, for h = 0..max_hop.
/// Empty shells are nullopt.
std::vector<std::optional<double>> khop_error_profile(
    const AttributedGraph& g, const std::vector<int>& preds,
    const GroupAssignment& groups, int max_hop);

/// g_min = negative count-weighted mean of the per-client minority gradient
/// sums. nullopt when no client saw a minority-labeled node.
std::optional<ModelParams> minority_direction(
    const std::vector<ModelParams>& grad_sums, const std::vector<long>& counts);

struct AlignmentResult {
    std::vector<double> inner;
    std::vector<double> cosine;
};

AlignmentResult update_alignments(const std::vector<ModelParams>& deltas,
                                  const ModelParams& g_min);

/// DR = <sum_m w_m delta_m, g_min> / (mean_m [a_m]_+ + epsilon).
double dilution_ratio(const std::vector<ModelParams>& deltas,
                      const std::vector<double>& weights,
                      const ModelParams& g_min, double epsilon = 1e-8);

/// H_k = (minority share of the client's labeled nodes +
///        heterophilous share of its test nodes) / 2.
double client_hardness(const ClientSubgraph& client,
                       const GroupAssignment& groups);

}  // namespace boostfgl
