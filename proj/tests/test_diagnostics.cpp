#include <doctest.h>

#include <cmath>

#include "boostfgl/diagnostics.hpp"
#include "boostfgl/rng.hpp"
#include "helpers.hpp"

using namespace boostfgl;
using testutil::make_graph;
using testutil::undirected;

TEST_CASE("gsd ratio") {
    SUBCASE("all masses equal gives the fair baseline 1") {
        CHECK(*gsd_ratio(3.0, 3, 5.0, 5) == doctest::Approx(1.0));
    }
    SUBCASE("frozen example: minority 1 node mass 1, majority 2 nodes mass 4") {
        CHECK(*gsd_ratio(1.0, 1, 4.0, 2) == doctest::Approx(0.5));
    }
    SUBCASE("empty groups are undefined") {
        CHECK(!gsd_ratio(1.0, 0, 4.0, 2).has_value());
        CHECK(!gsd_ratio(1.0, 1, 0.0, 0).has_value());
    }
    SUBCASE("scale invariance") {
        Rng rng(2);
        for (int it = 0; it < 50; ++it) {
            double a = rng.uniform(0.1, 5.0), b = rng.uniform(0.1, 5.0);
            long na = 1 + (long)rng.uniform_int(9);
            long nb = 1 + (long)rng.uniform_int(9);
            double c = rng.uniform(0.1, 10.0);
            CHECK(*gsd_ratio(c * a, na, c * b, nb) ==
                  doctest::Approx(*gsd_ratio(a, na, b, nb)).epsilon(1e-9));
        }
    }
}

TEST_CASE("gsd cross-checked against the per-node backward oracle") {
    // Train a couple of steps on a small graph, then recompute group masses
    // with explicit per-node backward passes (alpha = indicator vectors).
    SynthConfig cfg;
    cfg.num_nodes = 30;
    cfg.num_classes = 3;
    cfg.priors = {0.5, 0.3, 0.2};
    cfg.feature_dim = 4;
    cfg.intra_prob = 0.2;
    cfg.inter_prob = 0.05;
    auto g = synth_graph(cfg, 33);
    Rng rng(3);
    ModelParams p = ModelParams::init(4, 6, 3, rng);
    AggGraph agg = AggGraph::build(g, {});
    ForwardCache cache;
    gnn_forward(p, agg, g.features, false, 0.0, nullptr, &cache);

    std::vector<int> train_nodes;
    for (int v = 0; v < g.num_nodes; ++v) {
        if (g.splits[v] == Split::Train && g.labels[v] != kUnlabeled) {
            train_nodes.push_back(v);
        }
    }
    auto groups = build_groups(g, 0.25, 0.5);

    double min_mass = 0, maj_mass = 0;
    long n_min = 0, n_maj = 0;
    double min_mass_oracle = 0, maj_mass_oracle = 0;
    for (int v : train_nodes) {
        double norm = per_node_grad_norm(p, agg, cache, g.labels[v], v);
        // Oracle: full backward with a one-hot weight vector.
        Vector indicator = Vector::Zero(g.num_nodes);
        indicator(v) = 1.0;
        double oracle =
            gnn_backward(p, agg, cache, g.labels, train_nodes, indicator).norm();
        CHECK(norm == doctest::Approx(oracle).epsilon(1e-9));
        if (groups.is_minority_class[g.labels[v]]) {
            min_mass += norm;
            min_mass_oracle += oracle;
            ++n_min;
        } else {
            maj_mass += norm;
            maj_mass_oracle += oracle;
            ++n_maj;
        }
    }
    REQUIRE(n_min > 0);
    REQUIRE(n_maj > 0);
    CHECK(*gsd_ratio(min_mass, n_min, maj_mass, n_maj) ==
          doctest::Approx(*gsd_ratio(min_mass_oracle, n_min, maj_mass_oracle,
                                     n_maj))
              .epsilon(1e-9));
}

namespace {

// 3-node star: 1 -> 0 and 2 -> 0, labels on everything.
struct StarFixture {
    AttributedGraph g;
    ModelParams params;
    EdgeWeights beta;

    StarFixture() {
        g = make_graph(2, {0, 1, 0}, std::vector<Split>(3, Split::Train),
                       {{1, 0}, {2, 0}},
                       (Matrix(3, 2) << 1.0, 0.5, -0.5, 2.0, 0.25, -1.0)
                           .finished());
        Rng rng(5);
        params = ModelParams::zeros(2, 3, 2);
        auto fill = [&](auto& m) {
            for (long i = 0; i < m.size(); ++i) m.data()[i] = 0.4 * rng.normal();
        };
        fill(params.w0);
        fill(params.b0);
        fill(params.w1);
        fill(params.b1);
        beta.lambda_e = 1.0;
        beta.beta = {0.7, 0.3};
        beta.score = {0.0, 0.0};
    }
};

// Dense oracle: loss at node v evaluated with an explicit aggregation matrix.
double dense_loss_at(const AttributedGraph& g, const ModelParams& p,
                     const std::vector<double>& beta, int v) {
    Matrix a = testutil::dense_agg_matrix(g, beta);
    Matrix logits = testutil::dense_forward(p, a, g.features);
    double mx = logits.row(v).maxCoeff();
    double lse = std::log((logits.row(v).array() - mx).exp().sum()) + mx;
    return lse - logits(v, g.labels[v]);
}

}  // namespace

TEST_CASE("epr matches the brute-force double-forward oracle") {
    StarFixture fx;
    // Full pass loss and ablated pass loss, both via the dense oracle.
    double full = dense_loss_at(fx.g, fx.params, fx.beta.beta, 0);
    // Ablating edge (1 -> 0): zero its weight; the dense builder drops
    // non-positive weights and renormalizes with the self mean unchanged
    // relative to remaining edges.
    std::vector<double> ablated = fx.beta.beta;
    ablated[0] = 0.0;
    // The library keeps the self weight at the full-neighborhood mean, so the
    // oracle must too: replicate by scaling the remaining weight so the self
    // share stays sum/k of the original.
    double self_raw = (0.7 + 0.3) / 2.0;
    Matrix a = Matrix::Zero(3, 3);
    double denom = 0.3 + self_raw;
    a(0, 2) = 0.3 / denom;
    a(0, 0) = self_raw / denom;
    a(1, 1) = 1.0;
    a(2, 2) = 1.0;
    Matrix logits = testutil::dense_forward(fx.params, a, fx.g.features);
    double mx = logits.row(0).maxCoeff();
    double ablated_loss = std::log((logits.row(0).array() - mx).exp().sum()) +
                          mx - logits(0, fx.g.labels[0]);

    double value = epr(fx.g, fx.g.labels, fx.params, fx.beta, 1, 0);
    CHECK(value == doctest::Approx(ablated_loss - full).epsilon(1e-12));
}

TEST_CASE("epr of a weight-zero edge is exactly zero") {
    StarFixture fx;
    EdgeWeights zeroed = fx.beta;
    zeroed.beta = {1.0, 0.0};
    CHECK(epr(fx.g, fx.g.labels, fx.params, zeroed, 2, 0) == 0.0);
}

TEST_CASE("epr is zero when the ablated message equals the aggregate") {
    // Identical features everywhere: removing any neighbor cannot change the
    // aggregated representation.
    auto g = make_graph(2, {0, 0, 0}, std::vector<Split>(3, Split::Train),
                        {{1, 0}, {2, 0}},
                        (Matrix(3, 2) << 1.0, -2.0, 1.0, -2.0, 1.0, -2.0)
                            .finished());
    Rng rng(7);
    ModelParams p = ModelParams::zeros(2, 3, 2);
    for (long i = 0; i < p.w0.size(); ++i) p.w0.data()[i] = rng.normal();
    for (long i = 0; i < p.w1.size(); ++i) p.w1.data()[i] = rng.normal();
    EdgeWeights beta;
    beta.beta = {0.5, 0.5};
    CHECK(epr(g, g.labels, p, beta, 1, 0) == doctest::Approx(0.0));
}

TEST_CASE("epr requires a labeled target") {
    StarFixture fx;
    std::vector<int> hidden = fx.g.labels;
    hidden[0] = kUnlabeled;
    CHECK_THROWS_AS(epr(fx.g, hidden, fx.params, fx.beta, 1, 0), ContractError);
}

TEST_CASE("negative-epr ratios count per group") {
    StarFixture fx;
    std::vector<char> minority_mask = {1, 0};  // class 0 is minority
    auto ratio = neg_epr_ratio(fx.g, fx.g.labels, fx.params, fx.beta,
                               minority_mask);
    // Targets: node 0 (class 0, two in-edges) is minority; nodes 1, 2 have
    // no in-edges.
    CHECK(ratio.minority_edges == 2);
    CHECK(ratio.majority_edges == 0);
    CHECK(!ratio.majority.has_value());
    CHECK(ratio.minority.has_value());
    double recomputed = 0.0;
    for (int u : {1, 2}) {
        if (epr(fx.g, fx.g.labels, fx.params, fx.beta, u, 0) < 0.0) {
            recomputed += 0.5;
        }
    }
    CHECK(*ratio.minority == doctest::Approx(recomputed));
}

TEST_CASE("khop error profile") {
    // Path 0-1-2-3-4; seeds at node 0 (hete+minority).
    auto g = make_graph(
        2, {1, 0, 0, 0, 0}, std::vector<Split>(5, Split::Test),
        undirected({{0, 1}, {1, 2}, {2, 3}, {3, 4}}), Matrix::Zero(5, 2));
    GroupAssignment groups;
    groups.is_minority_class = {0, 1};
    groups.minority_nodes = {0};
    groups.hete_nodes = {0};
    groups.hete_min_nodes = {0};

    SUBCASE("all-correct predictions give a zero profile") {
        auto profile = khop_error_profile(g, g.labels, groups, 4);
        REQUIRE(profile.size() == 5);
        for (const auto& p : profile) {
            REQUIRE(p.has_value());
            CHECK(*p == doctest::Approx(0.0));
        }
    }

    SUBCASE("hand BFS on the path") {
        // Wrong at nodes 1 and 3 (hops 1 and 3).
        std::vector<int> preds = {1, 1, 0, 1, 0};
        auto profile = khop_error_profile(g, preds, groups, 4);
        CHECK(*profile[0] == doctest::Approx(0.0));
        CHECK(*profile[1] == doctest::Approx(1.0));
        CHECK(*profile[2] == doctest::Approx(0.0));
        CHECK(*profile[3] == doctest::Approx(1.0));
        CHECK(*profile[4] == doctest::Approx(0.0));
    }

    SUBCASE("hop zero is the seed set and empty shells are undefined") {
        auto profile = khop_error_profile(g, g.labels, groups, 6);
        REQUIRE(profile.size() == 7);
        CHECK(profile[4].has_value());
        CHECK(!profile[5].has_value());
        CHECK(!profile[6].has_value());
    }
}

TEST_CASE("minority direction and alignments") {
    const int d = 2, h = 3, c = 2;
    Rng rng(11);
    ModelParams g1 = ModelParams::zeros(d, h, c);
    g1.w0(0, 0) = 1.0;
    ModelParams g2 = ModelParams::zeros(d, h, c);
    g2.w0(0, 0) = 3.0;

    SUBCASE("count-weighted averaging and negation") {
        auto dir = minority_direction({g1, g2}, {1, 3});
        REQUIRE(dir.has_value());
        // -(1 + 3)/4 = -1 on the single populated coordinate.
        CHECK(dir->w0(0, 0) == doctest::Approx(-1.0));
        CHECK(!minority_direction({g1}, {0}).has_value());
    }

    SUBCASE("aligned and orthogonal updates") {
        ModelParams gmin = ModelParams::zeros(d, h, c);
        gmin.w0(0, 0) = 2.0;
        ModelParams aligned = gmin;
        aligned.scale(0.7);
        ModelParams ortho = ModelParams::zeros(d, h, c);
        ortho.w1(0, 1) = 5.0;
        auto al = update_alignments({aligned, ortho}, gmin);
        CHECK(al.cosine[0] == doctest::Approx(1.0));
        CHECK(al.inner[1] == doctest::Approx(0.0));
        CHECK(al.cosine[1] == doctest::Approx(0.0));
    }

    SUBCASE("two-client inner products match a dense dot oracle") {
        auto rand_params = [&](double scale) {
            ModelParams p = ModelParams::zeros(d, h, c);
            auto fill = [&](auto& m) {
                for (long i = 0; i < m.size(); ++i) {
                    m.data()[i] = scale * rng.normal();
                }
            };
            fill(p.w0);
            fill(p.b0);
            fill(p.w1);
            fill(p.b1);
            return p;
        };
        ModelParams gmin = rand_params(1.0);
        ModelParams d1 = rand_params(0.5), d2 = rand_params(2.0);
        auto al = update_alignments({d1, d2}, gmin);
        auto flat_dot = [](const ModelParams& a, const ModelParams& b) {
            auto fa = params_to_flat(a);
            auto fb = params_to_flat(b);
            double acc = 0.0;
            for (size_t i = 0; i < fa.size(); ++i) acc += fa[i] * fb[i];
            return acc;
        };
        CHECK(al.inner[0] == doctest::Approx(flat_dot(d1, gmin)).epsilon(1e-12));
        CHECK(al.inner[1] == doctest::Approx(flat_dot(d2, gmin)).epsilon(1e-12));
    }
}

TEST_CASE("dilution ratio") {
    const int d = 1, h = 1, c = 1;
    ModelParams gmin = ModelParams::zeros(d, h, c);
    gmin.w0(0, 0) = 1.0;
    auto with_alignment = [&](double a) {
        ModelParams p = ModelParams::zeros(d, h, c);
        p.w0(0, 0) = a;
        return p;
    };

    SUBCASE("single fully aligned client tends to 1") {
        for (double a : {1.0, 10.0, 1000.0}) {
            double dr = dilution_ratio({with_alignment(a)}, {1.0}, gmin);
            CHECK(dr > 0.99);
            CHECK(dr <= 1.0);
        }
    }

    SUBCASE("destructive interference drives DR to zero") {
        double dr = dilution_ratio({with_alignment(1.0), with_alignment(-1.0)},
                                   {0.5, 0.5}, gmin);
        CHECK(std::abs(dr) < 1e-6);
    }

    SUBCASE("trust weights beat uniform on a constructed instance") {
        std::vector<ModelParams> deltas = {with_alignment(1.0),
                                           with_alignment(-1.0)};
        double dr_trust = dilution_ratio(deltas, {1.0 / 1.2, 0.2 / 1.2}, gmin);
        double dr_uniform = dilution_ratio(deltas, {0.5, 0.5}, gmin);
        CHECK(dr_trust > dr_uniform);
        CHECK(dr_trust == doctest::Approx((1.0 - 0.2) / 1.2 / (0.5 + 1e-8)));
    }
}

TEST_CASE("client hardness") {
    SynthConfig cfg;
    cfg.num_nodes = 40;
    cfg.num_classes = 2;
    cfg.priors = {0.7, 0.3};
    cfg.feature_dim = 2;
    cfg.intra_prob = 0.15;
    cfg.inter_prob = 0.05;
    auto g = synth_graph(cfg, 8);
    auto groups = build_groups(g, 0.3, 0.5);
    Partition p = louvain(g, 8);
    auto clients = assemble_clients(g, p, 2, 8);

    for (const auto& cl : clients) {
        double h = client_hardness(cl, groups);
        CHECK(h >= 0.0);
        CHECK(h <= 1.0);
        // Recompute by hand.
        long lab = 0, lab_min = 0, test = 0, test_hete = 0;
        for (int i = 0; i < cl.local.num_nodes; ++i) {
            if (cl.local.splits[i] == Split::Train &&
                cl.local.labels[i] != kUnlabeled) {
                ++lab;
                lab_min += groups.is_minority_class[cl.local.labels[i]];
            }
            if (cl.local.splits[i] == Split::Test) {
                ++test;
                test_hete += std::binary_search(groups.hete_nodes.begin(),
                                                groups.hete_nodes.end(),
                                                cl.global_ids[i]);
            }
        }
        double expect = 0.5 * (lab ? (double)lab_min / lab : 0.0) +
                        0.5 * (test ? (double)test_hete / test : 0.0);
        CHECK(h == doctest::Approx(expect));
    }

    // Frozen arithmetic: 40% minority, 20% hete -> 0.3.
    CHECK(0.5 * 0.4 + 0.5 * 0.2 == doctest::Approx(0.3));
}

TEST_CASE("round diagnostics serialize undefined values as nulls") {
    RoundDiagnostics diag;
    diag.round = 3;
    diag.gsd = std::nullopt;
    diag.dr = 0.5;
    diag.khop_error = {0.25, std::nullopt};
    auto j = diag.to_json();
    CHECK(j["gsd"].is_null());
    CHECK(j["dr"] == 0.5);
    CHECK(j["khop_error"][0] == 0.25);
    CHECK(j["khop_error"][1].is_null());
}
