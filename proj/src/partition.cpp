#include "boostfgl/partition.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>

#include "boostfgl/rng.hpp"

namespace boostfgl {

namespace {

// Weighted undirected multigraph used across Louvain levels. Self-loop
// weight is kept separately; adj holds each edge in both directions.
struct LevelGraph {
    int n = 0;
    std::vector<std::vector<std::pair<int, double>>> adj;
    std::vector<double> self_w;
    std::vector<double> degree;  // sum of incident weights + 2*self
    double m2 = 0.0;             // total degree

    void compute_degrees() {
        degree.assign(n, 0.0);
        m2 = 0.0;
        for (int v = 0; v < n; ++v) {
            double d = 2.0 * self_w[v];
            for (const auto& [u, w] : adj[v]) d += w;
            degree[v] = d;
            m2 += d;
        }
    }
};

LevelGraph level_from_graph(const AttributedGraph& g) {
    LevelGraph lg;
    lg.n = g.num_nodes;
    lg.adj.resize(lg.n);
    lg.self_w.assign(lg.n, 0.0);
    for (int v = 0; v < lg.n; ++v) {
        for (int u : g.und_neighbors(v)) lg.adj[v].emplace_back(u, 1.0);
    }
    lg.compute_degrees();
    return lg;
}

// One pass of local moves in seeded order; returns whether any node moved.
// community sums are maintained incrementally.
bool local_move_pass(const LevelGraph& lg, std::vector<int>& comm,
                     std::vector<double>& tot, Rng& rng) {
    std::vector<int> order(lg.n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    std::vector<double> weight_to(lg.n, 0.0);
    std::vector<int> touched;
    bool moved = false;

    for (int v : order) {
        touched.clear();
        for (const auto& [u, w] : lg.adj[v]) {
            int c = comm[u];
            if (weight_to[c] == 0.0) touched.push_back(c);
            weight_to[c] += w;
        }
        int home = comm[v];
        if (weight_to[home] == 0.0) touched.push_back(home);

        tot[home] -= lg.degree[v];
        double kv = lg.degree[v];
        // gain(c) proportional to k_{v,c} - tot[c]*k_v/m2 with v detached.
        double best_gain = weight_to[home] - tot[home] * kv / lg.m2;
        int best = home;
        std::sort(touched.begin(), touched.end());
        for (int c : touched) {
            if (c == home) continue;
            double gain = weight_to[c] - tot[c] * kv / lg.m2;
            if (gain > best_gain + 1e-12) {
                best_gain = gain;
                best = c;
            }
        }
        tot[best] += kv;
        if (best != home) {
            comm[v] = best;
            moved = true;
        }
        for (int c : touched) weight_to[c] = 0.0;
    }
    return moved;
}

// Relabels communities to a contiguous 0-based range, preserving order of
// first appearance by smallest member id.
int compact_labels(std::vector<int>& comm) {
    std::vector<int> remap(comm.size(), -1);
    int next = 0;
    for (int& c : comm) {
        if (remap[c] < 0) remap[c] = next++;
        c = remap[c];
    }
    return next;
}

LevelGraph coarsen(const LevelGraph& lg, const std::vector<int>& comm,
                   int num_comm) {
    LevelGraph out;
    out.n = num_comm;
    out.adj.resize(num_comm);
    out.self_w.assign(num_comm, 0.0);
    std::vector<double> acc(num_comm, 0.0);
    std::vector<int> touched;
    for (int c = 0; c < num_comm; ++c) out.adj[c].reserve(4);

    std::vector<std::vector<int>> members(num_comm);
    for (size_t v = 0; v < comm.size(); ++v) members[comm[v]].push_back((int)v);

    for (int c = 0; c < num_comm; ++c) {
        touched.clear();
        double self_acc = 0.0;
        for (int v : members[c]) {
            self_acc += lg.self_w[v];
            for (const auto& [u, w] : lg.adj[v]) {
                int cu = comm[u];
                if (cu == c) {
                    self_acc += w * 0.5;  // both directions visited
                } else {
                    if (acc[cu] == 0.0) touched.push_back(cu);
                    acc[cu] += w;
                }
            }
        }
        out.self_w[c] = self_acc;
        std::sort(touched.begin(), touched.end());
        for (int cu : touched) {
            out.adj[c].emplace_back(cu, acc[cu]);
            acc[cu] = 0.0;
        }
    }
    out.compute_degrees();
    return out;
}

}  // namespace

Partition louvain(const AttributedGraph& g, std::uint64_t seed) {
    Partition result;
    result.community_of.resize(g.num_nodes);
    std::iota(result.community_of.begin(), result.community_of.end(), 0);

    if (g.edges.empty()) {
        result.num_communities = g.num_nodes;  // singletons
        return result;
    }

    LevelGraph lg = level_from_graph(g);
    // node -> community at the current level; composed into result at the end.
    std::vector<std::vector<int>> level_assignments;
    int level = 0;
    while (true) {
        Rng rng(derive_seed(seed, 0x4c4f5556, level));  // "LOUV"
        std::vector<int> comm(lg.n);
        std::iota(comm.begin(), comm.end(), 0);
        std::vector<double> tot = lg.degree;

        bool any_move = false;
        while (local_move_pass(lg, comm, tot, rng)) any_move = true;
        int num_comm = compact_labels(comm);
        level_assignments.push_back(comm);
        if (!any_move || num_comm == lg.n) break;
        lg = coarsen(lg, comm, num_comm);
        ++level;
    }

    for (int v = 0; v < g.num_nodes; ++v) {
        int c = v;
        for (const auto& assignment : level_assignments) c = assignment[c];
        result.community_of[v] = c;
    }
    result.num_communities = compact_labels(result.community_of);
    return result;
}

std::optional<double> modularity(const AttributedGraph& g, const Partition& p) {
    if (static_cast<int>(p.community_of.size()) != g.num_nodes) {
        throw ContractError("partition does not match graph");
    }
    double m = static_cast<double>(g.und_adj.size()) / 2.0;
    if (m == 0.0) return std::nullopt;

    std::vector<double> intra(p.num_communities, 0.0);
    std::vector<double> deg(p.num_communities, 0.0);
    for (int v = 0; v < g.num_nodes; ++v) {
        int cv = p.community_of[v];
        deg[cv] += static_cast<double>(g.und_neighbors(v).size());
        for (int u : g.und_neighbors(v)) {
            if (p.community_of[u] == cv) intra[cv] += 0.5;
        }
    }
    double q = 0.0;
    for (int c = 0; c < p.num_communities; ++c) {
        double frac = deg[c] / (2.0 * m);
        q += intra[c] / m - frac * frac;
    }
    return q;
}

std::vector<ClientSubgraph> assemble_clients(const AttributedGraph& g,
                                             const Partition& p, int k,
                                             std::uint64_t seed) {
    if (k < 1) throw ConfigError("client count K must be >= 1");
    if (k > g.num_nodes) {
        throw ConfigError("client count K=" + std::to_string(k) +
                          " exceeds number of nodes");
    }

    std::vector<std::vector<int>> groups(p.num_communities);
    for (int v = 0; v < g.num_nodes; ++v) groups[p.community_of[v]].push_back(v);

    // Merge the two smallest while above K (ties by lower index).
    while (static_cast<int>(groups.size()) > k) {
        int a = -1, b = -1;
        for (int i = 0; i < static_cast<int>(groups.size()); ++i) {
            if (a < 0 || groups[i].size() < groups[a].size()) {
                b = a;
                a = i;
            } else if (b < 0 || groups[i].size() < groups[b].size()) {
                b = i;
            }
        }
        if (a > b) std::swap(a, b);
        groups[a].insert(groups[a].end(), groups[b].begin(), groups[b].end());
        std::sort(groups[a].begin(), groups[a].end());
        groups.erase(groups.begin() + b);
    }

    // Split the largest by a seeded balanced cut while below K.
    Rng rng(derive_seed(seed, 0x53504c54));  // "SPLT"
    while (static_cast<int>(groups.size()) < k) {
        int largest = 0;
        for (int i = 1; i < static_cast<int>(groups.size()); ++i) {
            if (groups[i].size() > groups[largest].size()) largest = i;
        }
        auto nodes = groups[largest];
        rng.shuffle(nodes);
        size_t half = nodes.size() / 2;
        std::vector<int> left(nodes.begin(), nodes.begin() + half);
        std::vector<int> right(nodes.begin() + half, nodes.end());
        std::sort(left.begin(), left.end());
        std::sort(right.begin(), right.end());
        groups[largest] = std::move(left);
        groups.push_back(std::move(right));
    }

    std::vector<ClientSubgraph> clients(groups.size());
    std::vector<int> local_of(g.num_nodes, -1);
    std::vector<int> owner(g.num_nodes, -1);
    for (int c = 0; c < static_cast<int>(groups.size()); ++c) {
        for (int i = 0; i < static_cast<int>(groups[c].size()); ++i) {
            local_of[groups[c][i]] = i;
            owner[groups[c][i]] = c;
        }
    }
    for (int c = 0; c < static_cast<int>(groups.size()); ++c) {
        ClientSubgraph& cs = clients[c];
        cs.client_id = c;
        cs.global_ids = groups[c];
        int n = static_cast<int>(groups[c].size());
        cs.local.num_nodes = n;
        cs.local.num_classes = g.num_classes;
        cs.local.features.resize(n, g.feature_dim());
        cs.local.labels.resize(n);
        cs.local.splits.resize(n);
        for (int i = 0; i < n; ++i) {
            int v = groups[c][i];
            cs.local.features.row(i) = g.features.row(v);
            cs.local.labels[i] = g.labels[v];
            cs.local.splits[i] = g.splits[v];
        }
        // Intra-client edges only; cross-client edges are dropped.
        for (const auto& [u, v] : g.edges) {
            if (owner[u] == c && owner[v] == c) {
                cs.local.edges.emplace_back(local_of[u], local_of[v]);
            }
        }
        cs.local.finalize();
        for (int i = 0; i < n; ++i) {
            if (cs.local.splits[i] == Split::Train &&
                cs.local.labels[i] != kUnlabeled) {
                cs.train_labeled.push_back(i);
            }
        }
    }
    return clients;
}

void write_partition_tsv(const Partition& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    for (size_t v = 0; v < p.community_of.size(); ++v) {
        out << v << '\t' << p.community_of[v] << '\n';
    }
}

Partition read_partition_tsv(const std::string& path, int num_nodes) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    Partition p;
    p.community_of.assign(num_nodes, -1);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        int v = 0, c = 0;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError("expected node<TAB>client at line " +
                             std::to_string(line_no));
        }
        auto r1 = std::from_chars(line.data(), line.data() + tab, v);
        auto r2 = std::from_chars(line.data() + tab + 1,
                                  line.data() + line.size(), c);
        if (r1.ec != std::errc() || r2.ec != std::errc() || v < 0 ||
            v >= num_nodes || c < 0) {
            throw ParseError("bad partition row at line " +
                             std::to_string(line_no));
        }
        p.community_of[v] = c;
    }
    for (int v = 0; v < num_nodes; ++v) {
        if (p.community_of[v] < 0) {
            throw ParseError("node " + std::to_string(v) +
                             " missing from partition file");
        }
    }
    p.num_communities =
        *std::max_element(p.community_of.begin(), p.community_of.end()) + 1;
    return p;
}

}  // namespace boostfgl
