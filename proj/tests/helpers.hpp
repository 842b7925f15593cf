#pragma once

// Test-only helpers and independent oracles. Everything here recomputes
// results through a different route than the library code under test.

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "boostfgl/gnn.hpp"
#include "boostfgl/graph.hpp"

namespace testutil {

using boostfgl::AttributedGraph;
using boostfgl::Matrix;
using boostfgl::Split;
using boostfgl::Vector;

inline AttributedGraph make_graph(
    int num_classes, const std::vector<int>& labels,
    const std::vector<Split>& splits,
    const std::vector<std::pair<int, int>>& directed_edges,
    const Matrix& features) {
    AttributedGraph g;
    g.num_nodes = static_cast<int>(labels.size());
    g.num_classes = num_classes;
    g.labels = labels;
    g.splits = splits;
    g.features = features;
    g.edges = directed_edges;
    g.finalize();
    return g;
}

// Both directions for every pair.
inline std::vector<std::pair<int, int>> undirected(
    const std::vector<std::pair<int, int>>& pairs) {
    std::vector<std::pair<int, int>> out;
    for (auto [u, v] : pairs) {
        out.emplace_back(u, v);
        out.emplace_back(v, u);
    }
    return out;
}

// Minority-selection oracle: smallest k such that the k smallest classes by
// (count, class index) reach mass >= q * total. Classes with zero labeled
// mass are excluded.
inline std::vector<int> minority_oracle(const std::vector<long>& counts,
                                        double q) {
    std::vector<int> order;
    for (int c = 0; c < static_cast<int>(counts.size()); ++c) {
        if (counts[c] > 0) order.push_back(c);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return counts[a] < counts[b]; });
    long total = 0;
    for (long c : counts) total += c;
    double threshold = q * static_cast<double>(total);
    std::vector<int> chosen;
    double mass = 0.0;
    for (int c : order) {
        chosen.push_back(c);
        mass += static_cast<double>(counts[c]);
        if (mass >= threshold) break;
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

// Dense-matrix oracle for the 2-layer forward pass: builds the full
// normalized aggregation matrix explicitly (self edge = mean in-weight, 1 if
// isolated) and evaluates with plain dense algebra.
inline Matrix dense_agg_matrix(const AttributedGraph& g,
                               const std::vector<double>& beta_in_csr) {
    Matrix a = Matrix::Zero(g.num_nodes, g.num_nodes);
    for (int v = 0; v < g.num_nodes; ++v) {
        int begin = g.in_ptr[v], end = g.in_ptr[v + 1];
        double sum = 0.0;
        int kept = 0;
        for (int e = begin; e < end; ++e) {
            double r = beta_in_csr.empty() ? 1.0 : beta_in_csr[e];
            if (r > 0.0) {
                sum += r;
                ++kept;
            }
        }
        if (kept == 0) {
            a(v, v) = 1.0;
            continue;
        }
        double self_raw = sum / kept;
        double denom = sum + self_raw;
        for (int e = begin; e < end; ++e) {
            double r = beta_in_csr.empty() ? 1.0 : beta_in_csr[e];
            if (r > 0.0) a(v, g.in_src[e]) += r / denom;
        }
        a(v, v) += self_raw / denom;
    }
    return a;
}

inline Matrix dense_forward(const boostfgl::ModelParams& p, const Matrix& agg,
                            const Matrix& x) {
    Matrix h1 = ((agg * x * p.w0).rowwise() + p.b0.transpose()).cwiseMax(0.0);
    return ((agg * h1 * p.w1).rowwise() + p.b1.transpose());
}

// Central finite differences of a scalar function over all parameters.
template <typename LossFn>
boostfgl::ModelParams finite_diff_grad(boostfgl::ModelParams p, LossFn loss,
                                       double step = 1e-5) {
    boostfgl::ModelParams grad = p;
    grad.set_zero();
    auto diff_block = [&](auto& theta, auto& out) {
        for (long i = 0; i < theta.size(); ++i) {
            double saved = theta.data()[i];
            theta.data()[i] = saved + step;
            double up = loss(p);
            theta.data()[i] = saved - step;
            double down = loss(p);
            theta.data()[i] = saved;
            out.data()[i] = (up - down) / (2.0 * step);
        }
    };
    diff_block(p.w0, grad.w0);
    diff_block(p.b0, grad.b0);
    diff_block(p.w1, grad.w1);
    diff_block(p.b1, grad.b1);
    return grad;
}

// Confusion-matrix oracle for macro-F1, written independently of the
// library's counting.
inline double macro_f1_oracle(const std::vector<int>& preds,
                              const std::vector<int>& labels,
                              const std::vector<int>& subset, int num_classes,
                              double eps = 1e-12) {
    Matrix confusion = Matrix::Zero(num_classes, num_classes);
    for (int v : subset) confusion(labels[v], preds[v]) += 1.0;
    double total = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        double tp = confusion(c, c);
        double fp = confusion.col(c).sum() - tp;
        double fn = confusion.row(c).sum() - tp;
        double prec = tp / (tp + fp + eps);
        double rec = tp / (tp + fn + eps);
        total += 2.0 * prec * rec / (prec + rec + eps);
    }
    return total / num_classes;
}

// Enumerates all partitions of {0..n-1} via restricted growth strings and
// returns the maximum Newman modularity and one argmax partition.
inline std::pair<double, std::vector<int>> max_modularity_bruteforce(
    const AttributedGraph& g) {
    int n = g.num_nodes;
    std::vector<int> rgs(n, 0);
    std::vector<int> best;
    double best_q = -2.0;
    auto modularity_of = [&](const std::vector<int>& comm) {
        double m = static_cast<double>(g.und_adj.size()) / 2.0;
        int k = *std::max_element(comm.begin(), comm.end()) + 1;
        std::vector<double> intra(k, 0.0), deg(k, 0.0);
        for (int v = 0; v < n; ++v) {
            deg[comm[v]] += static_cast<double>(g.und_neighbors(v).size());
            for (int u : g.und_neighbors(v)) {
                if (comm[u] == comm[v]) intra[comm[v]] += 0.5;
            }
        }
        double q = 0.0;
        for (int c = 0; c < k; ++c) {
            double f = deg[c] / (2.0 * m);
            q += intra[c] / m - f * f;
        }
        return q;
    };
    // Restricted growth: rgs[0]=0, rgs[i] <= max(rgs[0..i-1]) + 1.
    while (true) {
        double q = modularity_of(rgs);
        if (q > best_q) {
            best_q = q;
            best = rgs;
        }
        int i = n - 1;
        for (; i > 0; --i) {
            int mx = 0;
            for (int j = 0; j < i; ++j) mx = std::max(mx, rgs[j]);
            if (rgs[i] <= mx) {
                ++rgs[i];
                for (int j = i + 1; j < n; ++j) rgs[j] = 0;
                break;
            }
        }
        if (i == 0) break;
    }
    return {best_q, best};
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static std::mt19937_64 rng(std::random_device{}());
        path = std::filesystem::temp_directory_path() /
               ("boostfgl_test_" + std::to_string(rng()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
};

inline void write_file(const std::filesystem::path& p,
                       const std::string& content) {
    std::ofstream out(p);
    out << content;
}

}  // namespace testutil
