#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "boostfgl/types.hpp"

namespace boostfgl {

/// Attributed directed graph with per-node features, labels and splits.
/// Edges are stored deduplicated and without self-loops; the self
/// contribution is added during message passing. Immutable after finalize().
struct AttributedGraph {
    int num_nodes = 0;
    int num_classes = 0;
    Matrix features;                          // num_nodes x d
    std::vector<int> labels;                  // class index or kUnlabeled
    std::vector<Split> splits;
    std::vector<std::pair<int, int>> edges;   // directed (u -> v), sorted

    // CSR views, built by finalize().
    std::vector<int> in_ptr, in_src;          // in-neighbors of each target
    std::vector<int> out_ptr, out_dst;        // out-neighbors of each source
    std::vector<int> und_ptr, und_adj;        // undirected union, deduped

    int feature_dim() const { return static_cast<int>(features.cols()); }
    int in_degree(int v) const { return in_ptr[v + 1] - in_ptr[v]; }

    std::span<const int> in_neighbors(int v) const {
        return {in_src.data() + in_ptr[v], in_src.data() + in_ptr[v + 1]};
    }
    std::span<const int> und_neighbors(int v) const {
        return {und_adj.data() + und_ptr[v], und_adj.data() + und_ptr[v + 1]};
    }

    // Dedups/sorts edges, drops self-loops, builds the CSR views and checks
    // the structural invariants (valid endpoints, labeled eval nodes).
    void finalize();
};

/// Disadvantaged-group assignment over the test split.
struct GroupAssignment {
    std::vector<int> minority_classes;          // ascending
    std::vector<char> is_minority_class;        // size num_classes
    std::vector<int> minority_nodes;            // test nodes, ascending
    std::vector<int> hete_nodes;
    std::vector<int> hete_min_nodes;            // hete intersect minority
    double q = 0.0;
    double tau_h = 0.0;
};

/// Fraction of v's labeled neighbors (undirected view) sharing v's label.
/// nullopt when v is unlabeled or has no labeled neighbor; callers treat such
/// nodes as non-heterophilous.
std::optional<double> node_homophily(const AttributedGraph& g, int v);

/// Minority classes = shortest ascending-by-count prefix whose labeled mass
/// reaches q of the total (ties by class index); heterophilous test nodes
/// have homophily <= tau_h. Classes with zero labeled mass are never minority.
GroupAssignment build_groups(const AttributedGraph& g, double q, double tau_h);

/// Reads nodes.tsv / edges.tsv from `dir`. Errors carry the offending line.
AttributedGraph load_graph(const std::string& dir);

/// Writes nodes.tsv / edges.tsv into `dir` (created if missing).
void save_graph(const AttributedGraph& g, const std::string& dir);

/// Stochastic-block-model generator configuration. Edge probabilities may be
/// given as two scalars or overridden per class pair; class feature means are
/// unit Gaussian directions scaled by class_mean_scale.
struct SynthConfig {
    int num_nodes = 1000;
    int num_classes = 4;
    std::vector<double> priors;                 // defaults to uniform
    int feature_dim = 16;
    double noise_scale = 1.0;
    double intra_prob = 0.02;
    double inter_prob = 0.002;
    // Optional symmetric overrides, entries (class_a, class_b, prob).
    std::vector<std::tuple<int, int, double>> edge_prob_overrides;
    std::vector<double> class_mean_scale;       // defaults to all-ones
    // Explicit per-class mean vectors (C x d, row-major); when set they
    // replace the random unit directions and class_mean_scale is ignored.
    std::vector<std::vector<double>> class_means;
    std::vector<double> class_noise_scale;      // per-class noise override
    // Per-class probability that a node's features are pure noise around the
    // origin instead of carrying the class mean (missing-attribute nodes).
    std::vector<double> class_feature_mask_prob;
    // Training-label corruption: each train node whose class is listed gets
    // its stored label resampled among the other listed classes with this
    // probability. Features, edges and val/test labels stay clean.
    double train_label_noise = 0.0;
    std::vector<int> train_label_noise_classes;
    double train_ratio = 0.4;
    double val_ratio = 0.2;
    double test_ratio = 0.4;

    void validate() const;
    // Effective symmetric class-pair probability.
    double edge_prob(int a, int b) const;
};

/// Class-conditional Gaussian features over an SBM; undirected draws stored
/// as two directed edges. Bit-deterministic given seed.
AttributedGraph synth_graph(const SynthConfig& cfg, std::uint64_t seed);

}  // namespace boostfgl
