#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "boostfgl/graph.hpp"
#include "boostfgl/rng.hpp"
#include "boostfgl/types.hpp"

namespace boostfgl {

/// Parameters of the 2-layer message-passing GCN. Also reused as the
/// gradient / update / optimizer-moment container since all share the shape.
struct ModelParams {
    Matrix w0;  // d x h
    Vector b0;  // h
    Matrix w1;  // h x C
    Vector b1;  // C

    static ModelParams zeros(int d, int h, int c);
    /// Glorot-uniform weights, zero biases; deterministic in rng.
    static ModelParams init(int d, int h, int c, Rng& rng);

    long size() const {
        return w0.size() + b0.size() + w1.size() + b1.size();
    }
    void set_zero();
    bool all_finite() const;
    double squared_norm() const;
    double norm() const;
    double dot(const ModelParams& o) const;
    /// this += a * o
    void axpy(double a, const ModelParams& o);
    void scale(double a);

    ModelParams& operator+=(const ModelParams& o);
    ModelParams& operator-=(const ModelParams& o);
    friend ModelParams operator-(ModelParams a, const ModelParams& b) {
        a -= b;
        return a;
    }
    friend ModelParams operator+(ModelParams a, const ModelParams& b) {
        a += b;
        return a;
    }
};

/// Normalized propagation structure: per target node, the in-neighbors plus a
/// self edge, with weights summing to 1. The self edge's raw weight is the
/// mean of the target's in-edge weights (1 for isolated nodes); everything is
/// renormalized, which preserves the relative ordering of the in-weights.
struct AggGraph {
    int n = 0;
    std::vector<int> ptr;      // n+1; self entry is last in each slice
    std::vector<int> src;
    std::vector<double> w;

    /// beta: raw per-in-edge weights aligned with g.in_src; empty => uniform.
    /// Entries <= 0 are treated as removed edges.
    static AggGraph build(const AttributedGraph& g, std::span<const double> beta);

    Matrix apply(const Matrix& h) const;             // row v = sum_u w(u,v) h_u
    Matrix apply_transpose(const Matrix& g) const;   // adjoint of apply
};

struct ForwardCache {
    Matrix agg_x;    // A~ X
    Matrix z0;       // agg_x W0 + b0
    Matrix h1;       // relu(z0)
    Matrix h1d;      // dropout(h1) in train mode, else h1
    Matrix agg_h;    // A~ h1d
    Matrix logits;
    Matrix mask;     // inverted-dropout scale per entry; empty in eval mode
    bool train_mode = false;
};

/// h^(l+1) = sigma(A~ h^(l) W^(l) + b^(l)); ReLU after layer 0, identity at
/// the output. Dropout applies to the hidden layer in train mode and consumes
/// rng row-by-row. cache may be null when only logits are needed.
Matrix gnn_forward(const ModelParams& p, const AggGraph& agg, const Matrix& x,
                   bool train_mode, double dropout_rate, Rng* rng,
                   ForwardCache* cache);

Matrix softmax_rows(const Matrix& logits);

/// Sum over loss_nodes of alpha_v * CE(softmax(logits_v), y_v).
double weighted_loss(const Matrix& logits, const std::vector<int>& labels,
                     const std::vector<int>& loss_nodes, const Vector& alpha);

/// Exact gradient of weighted_loss w.r.t. all parameters; the propagation
/// weights are a constant (no gradient flows into the aggregation structure).
ModelParams gnn_backward(const ModelParams& p, const AggGraph& agg,
                         const ForwardCache& cache,
                         const std::vector<int>& labels,
                         const std::vector<int>& loss_nodes,
                         const Vector& alpha);

/// Gradient of the single unweighted loss term at node v. Touches only v's
/// aggregation slice, so it is cheap enough to call per labeled node.
ModelParams per_node_gradient(const ModelParams& p, const AggGraph& agg,
                              const ForwardCache& cache, int label, int v);

double per_node_grad_norm(const ModelParams& p, const AggGraph& agg,
                          const ForwardCache& cache, int label, int v);

enum class OptimizerKind { Adam, Sgd };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 1e-2;
    double weight_decay = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptimizerState {
    ModelParams m, v;
    long step = 0;
    static OptimizerState zeros_like(const ModelParams& p);
};

/// Adam with decoupled weight decay (or plain SGD + decay); throws
/// DivergedError on a non-finite gradient.
void optimizer_step(ModelParams& params, const ModelParams& grad,
                    OptimizerState& state, const OptimizerConfig& cfg);

/// Flat little-endian float64 payload after a one-line JSON shape header.
void save_checkpoint(const ModelParams& p, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

std::vector<double> params_to_flat(const ModelParams& p);
ModelParams params_from_flat(std::span<const double> flat, int d, int h, int c);

}  // namespace boostfgl
