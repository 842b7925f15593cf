#include <doctest.h>

#include <cmath>

#include "boostfgl/federation.hpp"
#include "helpers.hpp"

using namespace boostfgl;

namespace {

// Small homophilous 3-class instance shared by the federation tests.
struct Fixture {
    AttributedGraph g;
    GroupAssignment groups;
    std::vector<ClientSubgraph> clients;

    explicit Fixture(std::uint64_t seed = 5, int nodes = 80, int k = 3) {
        SynthConfig cfg;
        cfg.num_nodes = nodes;
        cfg.num_classes = 3;
        cfg.priors = {0.5, 0.3, 0.2};
        cfg.feature_dim = 4;
        cfg.noise_scale = 0.8;
        cfg.intra_prob = 0.12;
        cfg.inter_prob = 0.03;
        g = synth_graph(cfg, seed);
        groups = build_groups(g, 0.2, 0.5);
        Partition p = louvain(g, seed);
        clients = assemble_clients(g, p, k, seed);
    }
};

HyperParams small_hyper() {
    HyperParams hp;
    hp.hidden = 8;
    return hp;
}

double param_gap(const TrainingResult& a, const TrainingResult& b) {
    ModelParams diff = a.params - b.params;
    return diff.norm();
}

}  // namespace

TEST_CASE("local round basics") {
    Fixture fx;
    HyperParams hp = small_hyper();
    RoundConfig rc;
    rc.rounds = 1;
    Rng init(1);
    ModelParams theta =
        ModelParams::init(fx.g.feature_dim(), hp.hidden, fx.g.num_classes, init);

    ClientState state = ClientState::make(fx.clients[0], hp.mu);

    SUBCASE("zero learning rate gives a zero delta") {
        HyperParams frozen = hp;
        frozen.optimizer.lr = 0.0;
        ClientUpdate u = local_round(state, theta, rc, frozen,
                                     fx.groups.is_minority_class, 1, 42, nullptr);
        CHECK(u.delta.norm() == doctest::Approx(0.0));
        CHECK(u.summary.n_labeled == state.n_labeled());
    }

    SUBCASE("same stream seed reproduces the update bit-exactly") {
        ClientState s1 = ClientState::make(fx.clients[0], hp.mu);
        ClientState s2 = ClientState::make(fx.clients[0], hp.mu);
        ClientUpdate a = local_round(s1, theta, rc, hp,
                                     fx.groups.is_minority_class, 1, 42, nullptr);
        ClientUpdate b = local_round(s2, theta, rc, hp,
                                     fx.groups.is_minority_class, 1, 42, nullptr);
        ModelParams diff = a.delta - b.delta;
        CHECK(diff.norm() == 0.0);
        ClientUpdate c = local_round(s1, theta, rc, hp,
                                     fx.groups.is_minority_class, 2, 43, nullptr);
        ModelParams diff2 = a.delta - c.delta;
        CHECK(diff2.norm() > 0.0);
    }

    SUBCASE("client with no labeled nodes skips") {
        ClientSubgraph sub = fx.clients[0];
        for (auto& s : sub.local.splits) s = Split::Test;
        for (auto& l : sub.local.labels) {
            if (l == kUnlabeled) l = 0;
        }
        sub.local.finalize();
        sub.train_labeled.clear();
        ClientState empty = ClientState::make(sub, hp.mu);
        ClientUpdate u = local_round(empty, theta, rc, hp,
                                     fx.groups.is_minority_class, 1, 1, nullptr);
        CHECK(u.skip);
        CHECK(u.delta.norm() == 0.0);
        CHECK(u.summary.n_labeled == 0);
    }
}

TEST_CASE("update serialization round trip") {
    Fixture fx;
    HyperParams hp = small_hyper();
    RoundConfig rc;
    Rng init(2);
    ModelParams theta =
        ModelParams::init(fx.g.feature_dim(), hp.hidden, fx.g.num_classes, init);
    ClientState state = ClientState::make(fx.clients[0], hp.mu);
    ClientUpdate u = local_round(state, theta, rc, hp,
                                 fx.groups.is_minority_class, 3, 17, nullptr);
    auto bytes = serialize_update(u);
    ClientUpdate v = deserialize_update(bytes);
    CHECK(v.client_id == u.client_id);
    CHECK(v.round == 3);
    CHECK(v.skip == u.skip);
    CHECK(v.summary.n_labeled == u.summary.n_labeled);
    CHECK(v.summary.gap == u.summary.gap);
    ModelParams diff = v.delta - u.delta;
    CHECK(diff.norm() == 0.0);

    auto pbytes = serialize_params(theta);
    ModelParams w = deserialize_params(pbytes);
    ModelParams pdiff = w - theta;
    CHECK(pdiff.norm() == 0.0);
}

TEST_CASE("aggregate examples") {
    ModelParams prev = ModelParams::zeros(1, 1, 1);
    HyperParams hp = small_hyper();

    auto mk_update = [&](double delta, long n, bool skip = false) {
        ClientUpdate u;
        u.delta = ModelParams::zeros(1, 1, 1);
        u.delta.w0(0, 0) = delta;
        u.summary.n_labeled = n;
        u.skip = skip;
        return u;
    };

    SUBCASE("single client moves the model by its delta") {
        auto out = aggregate(prev, {mk_update(0.7, 5)}, false, hp);
        CHECK(out.theta.w0(0, 0) == doctest::Approx(0.7));
        CHECK(out.weights[0] == doctest::Approx(1.0));
    }

    SUBCASE("equal sizes with opposite deltas cancel") {
        auto out =
            aggregate(prev, {mk_update(1.0, 10), mk_update(-1.0, 10)}, false, hp);
        CHECK(out.theta.w0(0, 0) == doctest::Approx(0.0));
    }

    SUBCASE("size weighting 100 vs 300") {
        auto out = aggregate(prev, {mk_update(1.0, 100), mk_update(1.0, 300)},
                             false, hp);
        CHECK(out.weights[0] == doctest::Approx(0.25));
        CHECK(out.weights[1] == doctest::Approx(0.75));
    }

    SUBCASE("all clients skipped is a no-op") {
        auto out = aggregate(prev, {mk_update(0, 0, true)}, false, hp);
        CHECK(out.no_op);
        CHECK(out.theta.w0(0, 0) == 0.0);
    }

    SUBCASE("trust weighting with equal everything matches fedavg") {
        auto out =
            aggregate(prev, {mk_update(1.0, 10), mk_update(1.0, 10)}, true, hp);
        CHECK(out.weights[0] == doctest::Approx(0.5));
        CHECK(out.tau[0] == doctest::Approx(out.tau[1]));
    }
}

TEST_CASE("dp transform") {
    DpConfig dp;
    dp.clip_norm = 1.0;
    ClientUpdate u;
    u.delta = ModelParams::zeros(2, 2, 2);
    u.delta.w0(0, 0) = 0.6;
    u.delta.w0(1, 1) = 0.3;

    SUBCASE("below the clip with zero noise is untouched") {
        Rng rng(1);
        ClientUpdate v = u;
        dp_transform(v, dp, rng);
        ModelParams diff = v.delta - u.delta;
        CHECK(diff.norm() == 0.0);
    }

    SUBCASE("norm above the clip is scaled onto the ball") {
        ClientUpdate v = u;
        v.delta.scale(2.0 * dp.clip_norm / v.delta.norm());
        Rng rng(1);
        dp_transform(v, dp, rng);
        CHECK(v.delta.norm() == doctest::Approx(dp.clip_norm));
    }

    SUBCASE("noise is reproducible under the same seed") {
        DpConfig noisy = dp;
        noisy.noise_std = 0.05;
        ClientUpdate a = u, b = u;
        Rng r1(9), r2(9);
        dp_transform(a, noisy, r1);
        dp_transform(b, noisy, r2);
        ModelParams diff = a.delta - b.delta;
        CHECK(diff.norm() == 0.0);
        ModelParams moved = a.delta - u.delta;
        CHECK(moved.norm() > 0.0);
    }
}

TEST_CASE("flags-off boostfgl is trajectory-identical to fedavg") {
    Fixture fx;
    HyperParams hp = small_hyper();

    RoundConfig fedavg;
    fedavg.method = Method::FedAvg;
    fedavg.rounds = 5;
    fedavg.master_seed = 11;
    fedavg.diagnostics = false;

    RoundConfig off = fedavg;
    off.method = Method::BoostFgl;
    off.node_boost = false;
    off.topo_boost = false;
    off.model_boost = false;

    auto a = run_training(fx.g, fx.groups, fx.clients, fedavg, hp);
    auto b = run_training(fx.g, fx.groups, fx.clients, off, hp);
    CHECK(param_gap(a, b) == 0.0);
}

TEST_CASE("lambda-zero boostfgl stays within 1e-12 of fedavg over 10 rounds") {
    Fixture fx;
    HyperParams hp = small_hyper();

    RoundConfig fedavg;
    fedavg.method = Method::FedAvg;
    fedavg.rounds = 10;
    fedavg.master_seed = 13;
    fedavg.diagnostics = false;

    RoundConfig zeroed = fedavg;
    zeroed.method = Method::BoostFgl;
    zeroed.model_boost = false;  // trust off
    HyperParams hz = hp;
    hz.lambda_n = 0.0;
    hz.lambda_e = 0.0;

    auto a = run_training(fx.g, fx.groups, fx.clients, fedavg, hp);
    auto b = run_training(fx.g, fx.groups, fx.clients, zeroed, hz);
    CHECK(param_gap(a, b) < 1e-12);
}

TEST_CASE("parallel and sequential scheduling agree bit-exactly") {
    Fixture fx(7, 100, 4);
    HyperParams hp = small_hyper();
    RoundConfig seq;
    seq.rounds = 4;
    seq.master_seed = 21;
    RoundConfig par = seq;
    par.parallel_clients = true;

    auto a = run_training(fx.g, fx.groups, fx.clients, seq, hp);
    auto b = run_training(fx.g, fx.groups, fx.clients, par, hp);
    CHECK(param_gap(a, b) == 0.0);
    REQUIRE(a.rounds.size() == b.rounds.size());
    for (size_t t = 0; t < a.rounds.size(); ++t) {
        CHECK(a.rounds[t].report.accuracy == b.rounds[t].report.accuracy);
        CHECK(a.rounds[t].diag.to_json() == b.rounds[t].diag.to_json());
    }
}

TEST_CASE("repeated runs are bit-identical") {
    Fixture fx;
    HyperParams hp = small_hyper();
    RoundConfig rc;
    rc.rounds = 3;
    rc.master_seed = 31;
    auto a = run_training(fx.g, fx.groups, fx.clients, rc, hp);
    auto b = run_training(fx.g, fx.groups, fx.clients, rc, hp);
    CHECK(param_gap(a, b) == 0.0);
}

TEST_CASE("aggregation weights sum to one and respect the influence bound") {
    Fixture fx(9, 90, 3);
    HyperParams hp = small_hyper();
    for (auto form : {TrustForm::Rational, TrustForm::Exponential}) {
        HyperParams h = hp;
        h.trust_form = form;
        RoundConfig rc;
        rc.rounds = 5;
        rc.master_seed = 3;
        // run_training throws if the weight sum or influence bound breaks.
        auto result = run_training(fx.g, fx.groups, fx.clients, rc, h);
        for (const auto& rec : result.rounds) {
            double sum = 0.0;
            for (double w : rec.diag.trust_weights) sum += w;
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("partial participation stays deterministic and trains") {
    Fixture fx(15, 100, 5);
    HyperParams hp = small_hyper();
    RoundConfig rc;
    rc.rounds = 6;
    rc.participation = 0.6;
    rc.master_seed = 8;
    auto a = run_training(fx.g, fx.groups, fx.clients, rc, hp);
    auto b = run_training(fx.g, fx.groups, fx.clients, rc, hp);
    CHECK(param_gap(a, b) == 0.0);
    CHECK(a.rounds.size() == 6);
}

TEST_CASE("training lifts test accuracy on an easy instance") {
    SynthConfig cfg;
    cfg.num_nodes = 120;
    cfg.num_classes = 3;
    cfg.priors = {0.4, 0.35, 0.25};
    cfg.feature_dim = 4;
    cfg.noise_scale = 0.4;
    cfg.intra_prob = 0.15;
    cfg.inter_prob = 0.02;
    auto g = synth_graph(cfg, 23);
    auto groups = build_groups(g, 0.2, 0.5);
    auto clients = assemble_clients(g, louvain(g, 23), 2, 23);

    HyperParams hp = small_hyper();
    RoundConfig rc;
    rc.rounds = 30;
    rc.master_seed = 4;
    rc.diagnostics = false;
    auto result = run_training(g, groups, clients, rc, hp);
    CHECK(*result.rounds.back().report.accuracy > 0.7);
}
