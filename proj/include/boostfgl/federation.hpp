#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "boostfgl/boosting.hpp"
#include "boostfgl/diagnostics.hpp"
#include "boostfgl/gnn.hpp"
#include "boostfgl/graph.hpp"
#include "boostfgl/metrics.hpp"
#include "boostfgl/partition.hpp"

namespace boostfgl {

enum class Method { FedAvg, BoostFgl };

struct DpConfig {
    double clip_norm = 1.0;
    double noise_std = 0.0;
};

struct RoundConfig {
    int rounds = 50;
    int local_epochs = 1;
    double participation = 1.0;
    Method method = Method::BoostFgl;
    bool node_boost = true;
    bool topo_boost = true;
    bool model_boost = true;
    std::optional<DpConfig> dp;
    std::uint64_t master_seed = 0;
    bool parallel_clients = false;
    bool diagnostics = true;
    int khop_max = 4;

    void validate() const;
    // FedAvg is the all-off configuration of the same loop.
    bool node_on() const { return method == Method::BoostFgl && node_boost; }
    bool topo_on() const { return method == Method::BoostFgl && topo_boost; }
    bool model_on() const { return method == Method::BoostFgl && model_boost; }
};

struct HyperParams {
    double mu = 0.1;
    double lambda_n = 0.5;
    double lambda_e = 0.5;
    double lambda_s = 0.5;
    double gamma = 0.5;
    TrustForm trust_form = TrustForm::Rational;
    EdgePruneConfig prune;
    int hidden = 256;
    double dropout = 0.5;
    OptimizerConfig optimizer;
};

struct ClientUpdate {
    int client_id = 0;
    int round = 0;
    bool skip = false;  // no labeled nodes: zero delta, zero count
    ModelParams delta;
    FairnessSummary summary;
};

/// Wire format: one JSON header line, then the delta as little-endian
/// float64 in parameter order. The in-process loop round-trips every
/// update and broadcast through these bytes.
std::vector<std::uint8_t> serialize_update(const ClientUpdate& u);
ClientUpdate deserialize_update(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_params(const ModelParams& p);
ModelParams deserialize_params(std::span<const std::uint8_t> bytes);

/// Per-client persistent training state.
struct ClientState {
    ClientSubgraph sub;
    DifficultyState difficulty;
    AggGraph agg_uniform;
    std::vector<int> train_labels;  // training-visible labels, -1 elsewhere
    std::vector<int> test_local;    // local ids of test nodes

    static ClientState make(ClientSubgraph sub, double mu);
    long n_labeled() const {
        return static_cast<long>(sub.train_labeled.size());
    }
};

/// Diagnostics instrumentation for one client round; never on the wire.
struct ClientRoundTrace {
    double min_mass_raw = 0, maj_mass_raw = 0;
    double min_mass_weighted = 0, maj_mass_weighted = 0;
    long n_min = 0, n_maj = 0;
    ModelParams minority_grad_sum;
    long minority_count = 0;
    long neg_edges_min = 0, edges_min = 0;
    long neg_edges_maj = 0, edges_maj = 0;
    double train_loss = 0.0;
};

/// One client round per the synchronous protocol: broadcast copy, scoring
/// pass, difficulty update, boosting weights, E local epochs, delta upload.
ClientUpdate local_round(ClientState& state, const ModelParams& theta_global,
                         const RoundConfig& rc, const HyperParams& hp,
                         const std::vector<char>& minority_class_mask,
                         int round, std::uint64_t stream_seed,
                         ClientRoundTrace* trace);

/// Clip to clip_norm in L2, then add iid Gaussian noise per coordinate.
void dp_transform(ClientUpdate& update, const DpConfig& dp, Rng& rng);

struct AggregateOutcome {
    ModelParams theta;
    std::vector<double> weights;  // aligned with updates; sums to 1
    std::vector<double> tau;      // empty when trust is off
    bool no_op = false;           // every client skipped
};

/// theta + sum_m w_m delta_m; w from trust scores when trust_on, otherwise
/// proportional to labeled-data size.
AggregateOutcome aggregate(const ModelParams& theta_prev,
                           const std::vector<ClientUpdate>& updates,
                           bool trust_on, const HyperParams& hp);

struct RoundRecord {
    int round = 0;
    EvalReport report;
    RoundDiagnostics diag;
    double train_loss = 0.0;
};

struct TrainingResult {
    ModelParams params;
    std::vector<RoundRecord> rounds;
};

/// Runs the full synchronous loop for rc.rounds rounds. Per-client RNG
/// streams are keyed by (master_seed, client, round) so parallel and
/// sequential scheduling are observationally identical.
TrainingResult run_training(const AttributedGraph& g,
                            const GroupAssignment& groups,
                            const std::vector<ClientSubgraph>& subgraphs,
                            const RoundConfig& rc, const HyperParams& hp);

}  // namespace boostfgl
