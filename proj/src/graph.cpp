#include "boostfgl/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "boostfgl/rng.hpp"

namespace boostfgl {

void AttributedGraph::finalize() {
    if (static_cast<int>(labels.size()) != num_nodes ||
        static_cast<int>(splits.size()) != num_nodes ||
        features.rows() != num_nodes) {
        throw ContractError("graph arrays disagree on num_nodes");
    }
    for (int v = 0; v < num_nodes; ++v) {
        if (labels[v] != kUnlabeled &&
            (labels[v] < 0 || labels[v] >= num_classes)) {
            throw ContractError("label out of range at node " + std::to_string(v));
        }
        if ((splits[v] == Split::Val || splits[v] == Split::Test) &&
            labels[v] == kUnlabeled) {
            throw ContractError("val/test node " + std::to_string(v) +
                                " has no label");
        }
    }

    std::erase_if(edges, [](const auto& e) { return e.first == e.second; });
    for (const auto& [u, v] : edges) {
        if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes) {
            throw ContractError("edge endpoint out of range: (" +
                                std::to_string(u) + ", " + std::to_string(v) + ")");
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    auto build_csr = [&](auto key, auto val, std::vector<int>& ptr,
                         std::vector<int>& adj) {
        ptr.assign(num_nodes + 1, 0);
        for (const auto& e : edges) ++ptr[key(e) + 1];
        std::partial_sum(ptr.begin(), ptr.end(), ptr.begin());
        adj.resize(edges.size());
        std::vector<int> cursor(ptr.begin(), ptr.end() - 1);
        for (const auto& e : edges) adj[cursor[key(e)]++] = val(e);
    };
    build_csr([](const auto& e) { return e.second; },
              [](const auto& e) { return e.first; }, in_ptr, in_src);
    build_csr([](const auto& e) { return e.first; },
              [](const auto& e) { return e.second; }, out_ptr, out_dst);

    // Undirected union view, deduplicated per node.
    std::vector<std::vector<int>> und(num_nodes);
    for (const auto& [u, v] : edges) {
        und[u].push_back(v);
        und[v].push_back(u);
    }
    und_ptr.assign(num_nodes + 1, 0);
    und_adj.clear();
    for (int v = 0; v < num_nodes; ++v) {
        auto& nb = und[v];
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
        und_adj.insert(und_adj.end(), nb.begin(), nb.end());
        und_ptr[v + 1] = static_cast<int>(und_adj.size());
    }
}

std::optional<double> node_homophily(const AttributedGraph& g, int v) {
    if (g.labels[v] == kUnlabeled) return std::nullopt;
    int labeled = 0, same = 0;
    for (int u : g.und_neighbors(v)) {
        if (g.labels[u] == kUnlabeled) continue;
        ++labeled;
        if (g.labels[u] == g.labels[v]) ++same;
    }
    if (labeled == 0) return std::nullopt;
    return static_cast<double>(same) / labeled;
}

GroupAssignment build_groups(const AttributedGraph& g, double q, double tau_h) {
    if (!(q > 0.0 && q < 1.0)) {
        throw ConfigError("minority ratio q must lie in (0, 1), got " +
                          std::to_string(q));
    }
    if (tau_h < 0.0 || tau_h > 1.0) {
        throw ConfigError("homophily threshold tau_h must lie in [0, 1]");
    }

    GroupAssignment out;
    out.q = q;
    out.tau_h = tau_h;
    out.is_minority_class.assign(g.num_classes, 0);

    // Labeled mass per class, counted on training nodes.
    std::vector<long> counts(g.num_classes, 0);
    long total = 0;
    for (int v = 0; v < g.num_nodes; ++v) {
        if (g.splits[v] == Split::Train && g.labels[v] != kUnlabeled) {
            ++counts[g.labels[v]];
            ++total;
        }
    }
    if (total == 0) throw ConfigError("no labeled training nodes");

    std::vector<int> order(g.num_classes);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return counts[a] < counts[b];
    });

    double threshold = q * static_cast<double>(total);
    double mass = 0.0;
    for (int c : order) {
        if (counts[c] == 0) continue;  // zero-mass classes cannot be minority
        out.minority_classes.push_back(c);
        out.is_minority_class[c] = 1;
        mass += static_cast<double>(counts[c]);
        if (mass >= threshold) break;
    }
    std::sort(out.minority_classes.begin(), out.minority_classes.end());

    for (int v = 0; v < g.num_nodes; ++v) {
        if (g.splits[v] != Split::Test) continue;
        bool minority = out.is_minority_class[g.labels[v]] != 0;
        if (minority) out.minority_nodes.push_back(v);
        auto phi = node_homophily(g, v);
        bool hete = phi.has_value() && *phi <= tau_h;
        if (hete) out.hete_nodes.push_back(v);
        if (minority && hete) out.hete_min_nodes.push_back(v);
    }
    return out;
}

namespace {

int parse_int(std::string_view s, const std::string& what, int line_no) {
    int value = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw ParseError(what + " at line " + std::to_string(line_no) + ": '" +
                         std::string(s) + "'");
    }
    return value;
}

double parse_double(std::string_view s, const std::string& what, int line_no) {
    double value = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw ParseError(what + " at line " + std::to_string(line_no) + ": '" +
                         std::string(s) + "'");
    }
    return value;
}

std::vector<std::string_view> split_on(std::string_view line, char sep) {
    std::vector<std::string_view> fields;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

}  // namespace

AttributedGraph load_graph(const std::string& dir) {
    namespace fs = std::filesystem;
    fs::path nodes_path = fs::path(dir) / "nodes.tsv";
    fs::path edges_path = fs::path(dir) / "edges.tsv";
    std::ifstream nodes_in(nodes_path);
    if (!nodes_in) throw ConfigError("cannot open " + nodes_path.string());
    std::ifstream edges_in(edges_path);
    if (!edges_in) throw ConfigError("cannot open " + edges_path.string());

    struct Row {
        int id, label;
        Split split;
        std::vector<double> feats;
    };
    std::vector<Row> rows;
    std::string line;
    int line_no = 0;
    int dim = -1;
    while (std::getline(nodes_in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_on(line, '\t');
        if (fields.size() != 4) {
            throw ParseError("expected 4 tab-separated fields at nodes.tsv line " +
                             std::to_string(line_no));
        }
        Row row;
        row.id = parse_int(fields[0], "bad node id", line_no);
        row.label = parse_int(fields[1], "bad label", line_no);
        if (fields[2] == "train") row.split = Split::Train;
        else if (fields[2] == "val") row.split = Split::Val;
        else if (fields[2] == "test") row.split = Split::Test;
        else {
            throw ParseError("bad split at nodes.tsv line " +
                             std::to_string(line_no) + ": '" +
                             std::string(fields[2]) + "'");
        }
        for (auto f : split_on(fields[3], ',')) {
            row.feats.push_back(parse_double(f, "bad feature", line_no));
        }
        if (dim < 0) dim = static_cast<int>(row.feats.size());
        if (static_cast<int>(row.feats.size()) != dim) {
            throw ParseError("feature row of arity " +
                             std::to_string(row.feats.size()) + " (expected " +
                             std::to_string(dim) + ") at nodes.tsv line " +
                             std::to_string(line_no));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("nodes.tsv is empty");

    AttributedGraph g;
    g.num_nodes = static_cast<int>(rows.size());
    std::sort(rows.begin(), rows.end(),
              [](const Row& a, const Row& b) { return a.id < b.id; });
    for (int i = 0; i < g.num_nodes; ++i) {
        if (rows[i].id != i) {
            throw ParseError("node ids must be a contiguous 0-based range; "
                             "missing or duplicate id " + std::to_string(i));
        }
    }
    g.features.resize(g.num_nodes, dim);
    g.labels.resize(g.num_nodes);
    g.splits.resize(g.num_nodes);
    int max_label = -1;
    for (int i = 0; i < g.num_nodes; ++i) {
        g.labels[i] = rows[i].label;
        g.splits[i] = rows[i].split;
        max_label = std::max(max_label, rows[i].label);
        for (int j = 0; j < dim; ++j) g.features(i, j) = rows[i].feats[j];
    }
    g.num_classes = max_label + 1;

    line_no = 0;
    while (std::getline(edges_in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_on(line, '\t');
        if (fields.size() != 2) {
            throw ParseError("expected 2 tab-separated fields at edges.tsv line " +
                             std::to_string(line_no));
        }
        int u = parse_int(fields[0], "bad source", line_no);
        int v = parse_int(fields[1], "bad target", line_no);
        if (u < 0 || u >= g.num_nodes || v < 0 || v >= g.num_nodes) {
            throw ParseError("dangling edge endpoint " +
                             std::to_string(u < 0 || u >= g.num_nodes ? u : v) +
                             " at edges.tsv line " + std::to_string(line_no));
        }
        g.edges.emplace_back(u, v);
    }
    g.finalize();
    return g;
}

void save_graph(const AttributedGraph& g, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream nodes_out(fs::path(dir) / "nodes.tsv");
    nodes_out.precision(17);
    for (int v = 0; v < g.num_nodes; ++v) {
        const char* split = g.splits[v] == Split::Train ? "train"
                          : g.splits[v] == Split::Val   ? "val"
                                                        : "test";
        nodes_out << v << '\t' << g.labels[v] << '\t' << split << '\t';
        for (int j = 0; j < g.feature_dim(); ++j) {
            if (j) nodes_out << ',';
            nodes_out << g.features(v, j);
        }
        nodes_out << '\n';
    }
    std::ofstream edges_out(fs::path(dir) / "edges.tsv");
    for (const auto& [u, v] : g.edges) edges_out << u << '\t' << v << '\n';
}

void SynthConfig::validate() const {
    if (num_nodes < 1) throw ConfigError("synth: num_nodes must be positive");
    if (num_classes < 2) throw ConfigError("synth: need at least 2 classes");
    if (!priors.empty() &&
        static_cast<int>(priors.size()) != num_classes) {
        throw ConfigError("synth: priors size must equal num_classes");
    }
    for (double p : priors) {
        if (p < 0.0) throw ConfigError("synth: negative class prior");
    }
    auto check_prob = [](double p, const char* what) {
        if (p < 0.0 || p > 1.0) {
            throw ConfigError(std::string("synth: ") + what +
                              " outside [0, 1]: " + std::to_string(p));
        }
    };
    check_prob(intra_prob, "intra_prob");
    check_prob(inter_prob, "inter_prob");
    for (const auto& [a, b, p] : edge_prob_overrides) {
        if (a < 0 || a >= num_classes || b < 0 || b >= num_classes) {
            throw ConfigError("synth: edge prob override names a bad class");
        }
        check_prob(p, "edge prob override");
    }
    if (!class_mean_scale.empty() &&
        static_cast<int>(class_mean_scale.size()) != num_classes) {
        throw ConfigError("synth: class_mean_scale size must equal num_classes");
    }
    if (!class_means.empty()) {
        if (static_cast<int>(class_means.size()) != num_classes) {
            throw ConfigError("synth: class_means must have one row per class");
        }
        for (const auto& row : class_means) {
            if (static_cast<int>(row.size()) != feature_dim) {
                throw ConfigError("synth: class_means row arity != feature_dim");
            }
        }
    }
    if (!class_noise_scale.empty() &&
        static_cast<int>(class_noise_scale.size()) != num_classes) {
        throw ConfigError(
            "synth: class_noise_scale size must equal num_classes");
    }
    for (double s : class_noise_scale) {
        if (s < 0) throw ConfigError("synth: negative class_noise_scale");
    }
    if (!class_feature_mask_prob.empty() &&
        static_cast<int>(class_feature_mask_prob.size()) != num_classes) {
        throw ConfigError(
            "synth: class_feature_mask_prob size must equal num_classes");
    }
    for (double p : class_feature_mask_prob) {
        if (p < 0.0 || p > 1.0) {
            throw ConfigError("synth: class_feature_mask_prob outside [0, 1]");
        }
    }
    if (train_label_noise < 0.0 || train_label_noise > 1.0) {
        throw ConfigError("synth: train_label_noise outside [0, 1]");
    }
    if (train_label_noise > 0.0 && train_label_noise_classes.size() < 2) {
        throw ConfigError(
            "synth: train_label_noise needs at least two classes to shuffle");
    }
    for (int c : train_label_noise_classes) {
        if (c < 0 || c >= num_classes) {
            throw ConfigError("synth: train_label_noise_classes names a bad class");
        }
    }
    double split_sum = train_ratio + val_ratio + test_ratio;
    if (train_ratio < 0 || val_ratio < 0 || test_ratio < 0 ||
        std::abs(split_sum - 1.0) > 1e-9) {
        throw ConfigError("synth: split ratios must be nonnegative and sum to 1");
    }
    if (noise_scale < 0) throw ConfigError("synth: negative noise_scale");
}

double SynthConfig::edge_prob(int a, int b) const {
    double p = (a == b) ? intra_prob : inter_prob;
    for (const auto& [oa, ob, op] : edge_prob_overrides) {
        if ((oa == a && ob == b) || (oa == b && ob == a)) p = op;
    }
    return p;
}

AttributedGraph synth_graph(const SynthConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(derive_seed(seed, 0x53594e54));  // "SYNT"

    AttributedGraph g;
    g.num_nodes = cfg.num_nodes;
    g.num_classes = cfg.num_classes;

    std::vector<double> priors = cfg.priors;
    if (priors.empty()) priors.assign(cfg.num_classes, 1.0);

    g.labels.resize(g.num_nodes);
    for (int v = 0; v < g.num_nodes; ++v) g.labels[v] = rng.categorical(priors);

    // Class means: explicit rows when configured, otherwise random unit
    // directions scaled per class. The random draws happen either way so the
    // label/edge stream is unaffected by the choice.
    Matrix means(cfg.num_classes, cfg.feature_dim);
    for (int c = 0; c < cfg.num_classes; ++c) {
        for (int j = 0; j < cfg.feature_dim; ++j) means(c, j) = rng.normal();
        if (cfg.class_means.empty()) {
            double norm = means.row(c).norm();
            if (norm > 0) means.row(c) /= norm;
            double scale =
                cfg.class_mean_scale.empty() ? 1.0 : cfg.class_mean_scale[c];
            means.row(c) *= scale;
        } else {
            for (int j = 0; j < cfg.feature_dim; ++j) {
                means(c, j) = cfg.class_means[c][j];
            }
        }
    }
    g.features.resize(g.num_nodes, cfg.feature_dim);
    for (int v = 0; v < g.num_nodes; ++v) {
        double noise = cfg.class_noise_scale.empty()
                           ? cfg.noise_scale
                           : cfg.class_noise_scale[g.labels[v]];
        bool masked = !cfg.class_feature_mask_prob.empty() &&
                      rng.bernoulli(cfg.class_feature_mask_prob[g.labels[v]]);
        for (int j = 0; j < cfg.feature_dim; ++j) {
            double mu = masked ? 0.0 : means(g.labels[v], j);
            g.features(v, j) = mu + noise * rng.normal();
        }
    }

    // SBM edges: one Bernoulli per unordered pair, stored in both directions.
    for (int u = 0; u < g.num_nodes; ++u) {
        for (int v = u + 1; v < g.num_nodes; ++v) {
            double p = cfg.edge_prob(g.labels[u], g.labels[v]);
            if (p > 0.0 && rng.bernoulli(p)) {
                g.edges.emplace_back(u, v);
                g.edges.emplace_back(v, u);
            }
        }
    }

    // Split sizes by largest remainder, then a seeded shuffle assigns nodes.
    double raw_train = cfg.train_ratio * g.num_nodes;
    double raw_val = cfg.val_ratio * g.num_nodes;
    int n_train = static_cast<int>(std::floor(raw_train));
    int n_val = static_cast<int>(std::floor(raw_val));
    double frac_train = raw_train - n_train;
    double frac_val = raw_val - n_val;
    int leftover = g.num_nodes - n_train - n_val -
                   static_cast<int>(std::floor(cfg.test_ratio * g.num_nodes));
    for (int i = 0; i < leftover; ++i) {
        if (frac_train >= frac_val && frac_train > 0) {
            ++n_train;
            frac_train = 0;
        } else if (frac_val > 0) {
            ++n_val;
            frac_val = 0;
        } else {
            break;
        }
    }
    std::vector<int> order(g.num_nodes);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    g.splits.assign(g.num_nodes, Split::Test);
    for (int i = 0; i < n_train && i < g.num_nodes; ++i) {
        g.splits[order[i]] = Split::Train;
    }
    for (int i = n_train; i < n_train + n_val && i < g.num_nodes; ++i) {
        g.splits[order[i]] = Split::Val;
    }

    if (cfg.train_label_noise > 0.0) {
        std::vector<char> in_set(cfg.num_classes, 0);
        for (int c : cfg.train_label_noise_classes) in_set[c] = 1;
        for (int v = 0; v < g.num_nodes; ++v) {
            if (g.splits[v] != Split::Train || !in_set[g.labels[v]]) continue;
            if (!rng.bernoulli(cfg.train_label_noise)) continue;
            int current = g.labels[v];
            int pick;
            do {
                pick = cfg.train_label_noise_classes[rng.uniform_int(
                    cfg.train_label_noise_classes.size())];
            } while (pick == current);
            g.labels[v] = pick;
        }
    }

    g.finalize();
    return g;
}

}  // namespace boostfgl
