#include "boostfgl/federation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <future>
#include <iostream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace boostfgl {

void RoundConfig::validate() const {
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (local_epochs < 1) throw ConfigError("local epochs must be >= 1");
    if (!(participation > 0.0 && participation <= 1.0)) {
        throw ConfigError("participation fraction must lie in (0, 1]");
    }
    if (dp) {
        if (dp->clip_norm <= 0.0) throw ConfigError("dp clip_norm must be > 0");
        if (dp->noise_std < 0.0) throw ConfigError("dp noise_std must be >= 0");
    }
    if (khop_max < 0) throw ConfigError("khop_max must be >= 0");
}

std::vector<std::uint8_t> serialize_params(const ModelParams& p) {
    nlohmann::json header = {
        {"format", "boostfgl-params-v1"},
        {"d", p.w0.rows()},
        {"h", p.w0.cols()},
        {"c", p.w1.cols()},
        {"order", {"w0", "b0", "w1", "b1"}},
        {"layout", "col-major"},
        {"dtype", "f64-le"},
    };
    std::string head = header.dump();
    auto flat = params_to_flat(p);
    std::vector<std::uint8_t> bytes;
    bytes.reserve(head.size() + 1 + flat.size() * sizeof(double));
    bytes.insert(bytes.end(), head.begin(), head.end());
    bytes.push_back('\n');
    const auto* raw = reinterpret_cast<const std::uint8_t*>(flat.data());
    bytes.insert(bytes.end(), raw, raw + flat.size() * sizeof(double));
    return bytes;
}

namespace {

std::pair<nlohmann::json, std::span<const std::uint8_t>> split_message(
    std::span<const std::uint8_t> bytes) {
    auto it = std::find(bytes.begin(), bytes.end(), std::uint8_t('\n'));
    if (it == bytes.end()) throw ParseError("message lacks a header line");
    size_t head_len = static_cast<size_t>(it - bytes.begin());
    auto header = nlohmann::json::parse(
        std::string(reinterpret_cast<const char*>(bytes.data()), head_len));
    return {header, bytes.subspan(head_len + 1)};
}

std::vector<double> payload_doubles(std::span<const std::uint8_t> payload,
                                    size_t count) {
    if (payload.size() != count * sizeof(double)) {
        throw ParseError("message payload has wrong length");
    }
    std::vector<double> flat(count);
    std::memcpy(flat.data(), payload.data(), payload.size());
    return flat;
}

}  // namespace

ModelParams deserialize_params(std::span<const std::uint8_t> bytes) {
    auto [header, payload] = split_message(bytes);
    if (header.value("format", "") != "boostfgl-params-v1") {
        throw ParseError("unexpected params message format");
    }
    int d = header.at("d").get<int>();
    int h = header.at("h").get<int>();
    int c = header.at("c").get<int>();
    size_t count = (size_t)d * h + h + (size_t)h * c + c;
    return params_from_flat(payload_doubles(payload, count), d, h, c);
}

std::vector<std::uint8_t> serialize_update(const ClientUpdate& u) {
    nlohmann::json header = {
        {"format", "boostfgl-update-v1"},
        {"client_id", u.client_id},
        {"round", u.round},
        {"skip", u.skip},
        {"d", u.delta.w0.rows()},
        {"h", u.delta.w0.cols()},
        {"c", u.delta.w1.cols()},
        {"summary",
         {{"mean_minority_difficulty", u.summary.mean_minority_difficulty},
          {"acc_minority", u.summary.acc_minority},
          {"acc_majority", u.summary.acc_majority},
          {"gap", u.summary.gap},
          {"n_labeled", u.summary.n_labeled}}},
    };
    std::string head = header.dump();
    auto flat = params_to_flat(u.delta);
    std::vector<std::uint8_t> bytes;
    bytes.reserve(head.size() + 1 + flat.size() * sizeof(double));
    bytes.insert(bytes.end(), head.begin(), head.end());
    bytes.push_back('\n');
    const auto* raw = reinterpret_cast<const std::uint8_t*>(flat.data());
    bytes.insert(bytes.end(), raw, raw + flat.size() * sizeof(double));
    return bytes;
}

ClientUpdate deserialize_update(std::span<const std::uint8_t> bytes) {
    auto [header, payload] = split_message(bytes);
    if (header.value("format", "") != "boostfgl-update-v1") {
        throw ParseError("unexpected update message format");
    }
    ClientUpdate u;
    u.client_id = header.at("client_id").get<int>();
    u.round = header.at("round").get<int>();
    u.skip = header.at("skip").get<bool>();
    const auto& s = header.at("summary");
    u.summary.mean_minority_difficulty =
        s.at("mean_minority_difficulty").get<double>();
    u.summary.acc_minority = s.at("acc_minority").get<double>();
    u.summary.acc_majority = s.at("acc_majority").get<double>();
    u.summary.gap = s.at("gap").get<double>();
    u.summary.n_labeled = s.at("n_labeled").get<long>();
    int d = header.at("d").get<int>();
    int h = header.at("h").get<int>();
    int c = header.at("c").get<int>();
    size_t count = (size_t)d * h + h + (size_t)h * c + c;
    u.delta = params_from_flat(payload_doubles(payload, count), d, h, c);
    if (!u.delta.all_finite()) {
        throw ContractError("client update carries non-finite entries");
    }
    return u;
}

ClientState ClientState::make(ClientSubgraph sub, double mu) {
    ClientState state;
    state.difficulty = DifficultyState::zeros(sub.local.num_nodes, mu);
    state.agg_uniform = AggGraph::build(sub.local, {});
    state.train_labels.assign(sub.local.num_nodes, kUnlabeled);
    for (int v : sub.train_labeled) state.train_labels[v] = sub.local.labels[v];
    for (int v = 0; v < sub.local.num_nodes; ++v) {
        if (sub.local.splits[v] == Split::Test) state.test_local.push_back(v);
    }
    state.sub = std::move(sub);
    return state;
}

namespace {

int argmax_row(const Matrix& m, int row) {
    Eigen::Index idx = 0;
    m.row(row).maxCoeff(&idx);
    return static_cast<int>(idx);
}

FairnessSummary make_summary(const ClientState& state, const Matrix& probs,
                             const std::vector<char>& minority_class_mask) {
    FairnessSummary s;
    long n_min = 0, n_maj = 0, ok_min = 0, ok_maj = 0;
    double dsum = 0.0;
    for (int v : state.sub.train_labeled) {
        int y = state.train_labels[v];
        bool correct = argmax_row(probs, v) == y;
        if (minority_class_mask[y]) {
            ++n_min;
            ok_min += correct;
            dsum += state.difficulty.d_bar(v);
        } else {
            ++n_maj;
            ok_maj += correct;
        }
    }
    s.n_labeled = n_min + n_maj;
    double acc_min = n_min > 0 ? (double)ok_min / n_min : 0.0;
    double acc_maj = n_maj > 0 ? (double)ok_maj / n_maj : 0.0;
    // A client that only sees one group has no observable local disparity.
    if (n_min == 0) acc_min = acc_maj;
    if (n_maj == 0) acc_maj = acc_min;
    s.acc_minority = acc_min;
    s.acc_majority = acc_maj;
    s.mean_minority_difficulty = n_min > 0 ? dsum / n_min : 0.0;
    s.gap = std::clamp(acc_maj - acc_min, 0.0, 1.0);
    return s;
}

EdgeWeights uniform_edge_weights(const AttributedGraph& g) {
    EdgeWeights ew;
    ew.lambda_e = 0.0;
    ew.score.assign(g.in_src.size(), 0.0);
    ew.beta.resize(g.in_src.size());
    for (int v = 0; v < g.num_nodes; ++v) {
        int k = g.in_degree(v);
        for (int e = g.in_ptr[v]; e < g.in_ptr[v + 1]; ++e) {
            ew.beta[e] = 1.0 / k;
        }
    }
    return ew;
}

}  // namespace

ClientUpdate local_round(ClientState& state, const ModelParams& theta_global,
                         const RoundConfig& rc, const HyperParams& hp,
                         const std::vector<char>& minority_class_mask,
                         int round, std::uint64_t stream_seed,
                         ClientRoundTrace* trace) {
    const AttributedGraph& g = state.sub.local;
    const int d = g.feature_dim();
    const int h = hp.hidden;
    const int c = g.num_classes;

    ClientUpdate u;
    u.client_id = state.sub.client_id;
    u.round = round;
    if (state.sub.train_labeled.empty()) {
        u.skip = true;
        u.delta = ModelParams::zeros(d, h, c);
        return u;
    }

    Rng rng(stream_seed);

    // Scoring pass at the broadcast model: uniform propagation, dropout off.
    ForwardCache score_cache;
    gnn_forward(theta_global, state.agg_uniform, g.features, false, 0.0,
                nullptr, &score_cache);
    Matrix probs = softmax_rows(score_cache.logits);
    update_difficulty(state.difficulty, probs, state.train_labels);

    Vector alpha = rc.node_on() ? node_weights(state.difficulty, hp.lambda_n)
                                : Vector::Ones(g.num_nodes);

    EdgeWeights beta;
    AggGraph agg_boosted;
    const AggGraph* agg = &state.agg_uniform;
    if (rc.topo_on()) {
        auto scores = edge_scores(g, state.difficulty, probs, state.train_labels);
        beta = edge_softmax(g, scores, hp.lambda_e, hp.prune);
        agg_boosted = AggGraph::build(g, beta.beta);
        agg = &agg_boosted;
    }

    ModelParams params = theta_global;
    OptimizerState opt = OptimizerState::zeros_like(params);
    for (int epoch = 0; epoch < rc.local_epochs; ++epoch) {
        ForwardCache cache;
        gnn_forward(params, *agg, g.features, true, hp.dropout, &rng, &cache);
        double loss = weighted_loss(cache.logits, state.train_labels,
                                    state.sub.train_labeled, alpha);
        if (!std::isfinite(loss)) {
            throw DivergedError("client " + std::to_string(u.client_id) +
                                " diverged at round " + std::to_string(round));
        }
        if (trace) trace->train_loss = loss;
        ModelParams grad = gnn_backward(params, *agg, cache, state.train_labels,
                                        state.sub.train_labeled, alpha);
        optimizer_step(params, grad, opt, hp.optimizer);
    }
    u.delta = params - theta_global;

    // Post-training snapshot with dropout off; feeds the fairness summary
    // and the per-node gradient diagnostics.
    ForwardCache snap;
    gnn_forward(params, *agg, g.features, false, 0.0, nullptr, &snap);
    u.summary = make_summary(state, softmax_rows(snap.logits),
                             minority_class_mask);

    if (trace) {
        trace->minority_grad_sum = ModelParams::zeros(d, h, c);
        for (int v : state.sub.train_labeled) {
            int y = state.train_labels[v];
            double norm = per_node_grad_norm(params, *agg, snap, y, v);
            if (minority_class_mask[y]) {
                trace->min_mass_raw += norm;
                trace->min_mass_weighted += alpha(v) * norm;
                ++trace->n_min;
                // Minority descent contribution: raw gradient at the
                // broadcast model under uniform propagation.
                trace->minority_grad_sum += per_node_gradient(
                    theta_global, state.agg_uniform, score_cache, y, v);
                ++trace->minority_count;
            } else {
                trace->maj_mass_raw += norm;
                trace->maj_mass_weighted += alpha(v) * norm;
                ++trace->n_maj;
            }
        }
        const EdgeWeights& epr_beta =
            rc.topo_on() ? beta : uniform_edge_weights(g);
        NegEprRatio ratio = neg_epr_ratio(g, state.train_labels, params,
                                          epr_beta, minority_class_mask);
        trace->neg_edges_min = ratio.minority_negative;
        trace->edges_min = ratio.minority_edges;
        trace->neg_edges_maj = ratio.majority_negative;
        trace->edges_maj = ratio.majority_edges;
    }
    return u;
}

void dp_transform(ClientUpdate& update, const DpConfig& dp, Rng& rng) {
    if (dp.clip_norm <= 0.0) throw ConfigError("dp clip_norm must be > 0");
    if (dp.noise_std < 0.0) throw ConfigError("dp noise_std must be >= 0");
    if (update.skip) return;
    double norm = update.delta.norm();
    if (norm > dp.clip_norm) update.delta.scale(dp.clip_norm / norm);
    if (dp.noise_std > 0.0) {
        auto add_noise = [&](auto& block) {
            double* data = block.data();
            for (long i = 0; i < block.size(); ++i) {
                data[i] += rng.normal(0.0, dp.noise_std);
            }
        };
        add_noise(update.delta.w0);
        add_noise(update.delta.b0);
        add_noise(update.delta.w1);
        add_noise(update.delta.b1);
    }
}

AggregateOutcome aggregate(const ModelParams& theta_prev,
                           const std::vector<ClientUpdate>& updates,
                           bool trust_on, const HyperParams& hp) {
    AggregateOutcome out;
    out.theta = theta_prev;
    out.weights.assign(updates.size(), 0.0);

    bool any = std::any_of(updates.begin(), updates.end(),
                           [](const ClientUpdate& u) { return !u.skip; });
    if (!any) {
        out.no_op = true;
        return out;
    }

    if (trust_on) {
        std::vector<double> norms(updates.size());
        std::vector<FairnessSummary> summaries(updates.size());
        for (size_t i = 0; i < updates.size(); ++i) {
            norms[i] = updates[i].skip ? 0.0 : updates[i].delta.norm();
            summaries[i] = updates[i].summary;
        }
        TrustResult tr =
            trust_scores(norms, summaries, hp.lambda_s, hp.gamma, hp.trust_form);
        out.tau = tr.tau;
        out.weights = tr.weights;
    } else {
        long total = 0;
        for (const auto& u : updates) {
            if (!u.skip) total += u.summary.n_labeled;
        }
        if (total == 0) {
            out.no_op = true;
            return out;
        }
        for (size_t i = 0; i < updates.size(); ++i) {
            if (!updates[i].skip) {
                out.weights[i] = static_cast<double>(updates[i].summary.n_labeled) /
                                 static_cast<double>(total);
            }
        }
    }

    double sum = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ContractError("aggregation weights do not sum to 1");
    }
    for (size_t i = 0; i < updates.size(); ++i) {
        if (out.weights[i] != 0.0) out.theta.axpy(out.weights[i], updates[i].delta);
    }
    return out;
}

namespace {

// Eq. 13 per client, generalized to size-weighted rational trust where the
// per-client bound is N_m / (lambda_s * sum_j N_j tau_j).
void check_influence_bound(const std::vector<ClientUpdate>& updates,
                           const AggregateOutcome& agg, const HyperParams& hp,
                           int round) {
    if (agg.tau.empty() || hp.lambda_s <= 0.0) return;
    double weighted_tau_sum = 0.0;
    double tau_sum = 0.0;
    for (size_t i = 0; i < updates.size(); ++i) {
        weighted_tau_sum +=
            static_cast<double>(updates[i].summary.n_labeled) * agg.tau[i];
        tau_sum += agg.tau[i];
    }
    for (size_t i = 0; i < updates.size(); ++i) {
        if (updates[i].skip) continue;
        double influence = agg.weights[i] * updates[i].delta.norm();
        double bound =
            hp.trust_form == TrustForm::Rational
                ? static_cast<double>(updates[i].summary.n_labeled) /
                      (hp.lambda_s * weighted_tau_sum)
                : 1.0 / (hp.lambda_s * tau_sum);
        if (influence > bound * (1.0 + 1e-9)) {
            throw ContractError("influence bound violated at round " +
                                std::to_string(round));
        }
    }
}

void eval_client(const ClientState& state, const ModelParams& theta,
                 const RoundConfig& rc, const HyperParams& hp,
                 std::vector<int>& preds_global) {
    const AttributedGraph& g = state.sub.local;
    if (g.num_nodes == 0 || state.test_local.empty()) return;
    const AggGraph* agg = &state.agg_uniform;
    AggGraph agg_eval;
    if (rc.topo_on()) {
        Matrix probs = softmax_rows(gnn_forward(
            theta, state.agg_uniform, g.features, false, 0.0, nullptr, nullptr));
        auto scores =
            edge_scores(g, state.difficulty, probs, state.train_labels);
        EdgeWeights beta = edge_softmax(g, scores, hp.lambda_e, hp.prune);
        agg_eval = AggGraph::build(g, beta.beta);
        agg = &agg_eval;
    }
    Matrix logits =
        gnn_forward(theta, *agg, g.features, false, 0.0, nullptr, nullptr);
    for (int i : state.test_local) {
        preds_global[state.sub.global_ids[i]] = argmax_row(logits, i);
    }
}

}  // namespace

TrainingResult run_training(const AttributedGraph& g,
                            const GroupAssignment& groups,
                            const std::vector<ClientSubgraph>& subgraphs,
                            const RoundConfig& rc, const HyperParams& hp) {
    rc.validate();
    const int d = g.feature_dim();
    const int c = g.num_classes;
    const int num_clients = static_cast<int>(subgraphs.size());

    std::vector<ClientState> clients;
    clients.reserve(subgraphs.size());
    std::vector<double> hardness;
    for (const auto& sub : subgraphs) {
        hardness.push_back(client_hardness(sub, groups));
        clients.push_back(ClientState::make(sub, hp.mu));
    }

    Rng init_rng(derive_seed(rc.master_seed, 0x494e4954ULL));  // "INIT"
    ModelParams theta = ModelParams::init(d, hp.hidden, c, init_rng);

    std::vector<int> test_nodes;
    for (int v = 0; v < g.num_nodes; ++v) {
        if (g.splits[v] == Split::Test) test_nodes.push_back(v);
    }

    TrainingResult result;
    for (int t = 1; t <= rc.rounds; ++t) {
        std::vector<int> participating(num_clients);
        std::iota(participating.begin(), participating.end(), 0);
        if (rc.participation < 1.0) {
            Rng prng(derive_seed(rc.master_seed, 0x50415254ULL, t));  // "PART"
            prng.shuffle(participating);
            int keep = std::max(
                1, static_cast<int>(std::round(rc.participation * num_clients)));
            participating.resize(std::min(keep, num_clients));
            std::sort(participating.begin(), participating.end());
        }
        const size_t m = participating.size();

        auto broadcast = serialize_params(theta);
        std::vector<ClientUpdate> updates(m);
        std::vector<ClientRoundTrace> traces(m);
        auto run_client = [&](size_t idx) {
            int cid = participating[idx];
            ModelParams local_theta = deserialize_params(broadcast);
            std::uint64_t seed =
                derive_seed(rc.master_seed, 0x434c4e54ULL, cid, t);  // "CLNT"
            ClientRoundTrace* tr = rc.diagnostics ? &traces[idx] : nullptr;
            ClientUpdate u =
                local_round(clients[cid], local_theta, rc, hp,
                            groups.is_minority_class, t, seed, tr);
            auto bytes = serialize_update(u);
            updates[idx] = deserialize_update(bytes);
        };
        if (rc.parallel_clients) {
            std::vector<std::future<void>> futures;
            futures.reserve(m);
            for (size_t i = 0; i < m; ++i) {
                futures.push_back(
                    std::async(std::launch::async, run_client, i));
            }
            for (auto& f : futures) f.get();
        } else {
            for (size_t i = 0; i < m; ++i) run_client(i);
        }

        if (rc.dp) {
            for (size_t i = 0; i < m; ++i) {
                Rng dp_rng(derive_seed(rc.master_seed, 0x44504e53ULL,
                                       participating[i], t));  // "DPNS"
                dp_transform(updates[i], *rc.dp, dp_rng);
            }
        }

        AggregateOutcome agg = aggregate(theta, updates, rc.model_on(), hp);
        if (agg.no_op) {
            std::cerr << "[boostfgl] round " << t
                      << ": every client skipped; global model unchanged\n";
        } else {
            check_influence_bound(updates, agg, hp, t);
        }
        theta = agg.theta;
        if (!theta.all_finite()) {
            throw DivergedError("global model diverged at round " +
                                std::to_string(t));
        }

        std::vector<int> preds(g.num_nodes, -1);
        for (const auto& state : clients) {
            eval_client(state, theta, rc, hp, preds);
        }

        RoundRecord rec;
        rec.round = t;
        rec.report = group_report(preds, g.labels, test_nodes, groups, c);
        for (const auto& tr : traces) rec.train_loss += tr.train_loss;

        if (rc.diagnostics) {
            RoundDiagnostics diag;
            diag.round = t;
            double min_raw = 0, maj_raw = 0, min_w = 0, maj_w = 0;
            long n_min = 0, n_maj = 0;
            long neg_min = 0, edges_min = 0, neg_maj = 0, edges_maj = 0;
            std::vector<ModelParams> grad_sums;
            std::vector<long> grad_counts;
            for (const auto& tr : traces) {
                min_raw += tr.min_mass_raw;
                maj_raw += tr.maj_mass_raw;
                min_w += tr.min_mass_weighted;
                maj_w += tr.maj_mass_weighted;
                n_min += tr.n_min;
                n_maj += tr.n_maj;
                neg_min += tr.neg_edges_min;
                edges_min += tr.edges_min;
                neg_maj += tr.neg_edges_maj;
                edges_maj += tr.edges_maj;
                diag.gsd_per_client.push_back(
                    gsd_ratio(tr.min_mass_weighted, tr.n_min,
                              tr.maj_mass_weighted, tr.n_maj));
                // Skip clients leave the trace untouched; substitute zeros.
                grad_sums.push_back(tr.minority_grad_sum.size() > 0
                                        ? tr.minority_grad_sum
                                        : ModelParams::zeros(d, hp.hidden, c));
                grad_counts.push_back(tr.minority_count);
            }
            diag.gsd = gsd_ratio(min_w, n_min, maj_w, n_maj);
            diag.gsd_raw = gsd_ratio(min_raw, n_min, maj_raw, n_maj);
            if (edges_min > 0) {
                diag.neg_epr_minority = (double)neg_min / (double)edges_min;
            }
            if (edges_maj > 0) {
                diag.neg_epr_majority = (double)neg_maj / (double)edges_maj;
            }

            auto g_min = minority_direction(grad_sums, grad_counts);
            if (g_min && g_min->norm() > 0.0) {
                std::vector<ModelParams> deltas;
                deltas.reserve(m);
                for (const auto& u : updates) deltas.push_back(u.delta);
                AlignmentResult al = update_alignments(deltas, *g_min);
                diag.alignments = al.inner;
                diag.alignment_cosines = al.cosine;
                if (!agg.no_op) {
                    diag.dr = dilution_ratio(deltas, agg.weights, *g_min);
                }
            }
            diag.hardness_per_client = hardness;
            diag.khop_error = khop_error_profile(g, preds, groups, rc.khop_max);
            diag.trust_weights = agg.weights;
            rec.diag = std::move(diag);
        }
        result.rounds.push_back(std::move(rec));
    }
    result.params = std::move(theta);
    return result;
}

}  // namespace boostfgl
