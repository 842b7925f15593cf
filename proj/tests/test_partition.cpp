#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "boostfgl/partition.hpp"
#include "boostfgl/rng.hpp"
#include "helpers.hpp"

using namespace boostfgl;
using testutil::make_graph;
using testutil::undirected;

namespace {

AttributedGraph plain_graph(int n,
                            const std::vector<std::pair<int, int>>& pairs) {
    std::vector<int> labels(n, 0);
    std::vector<Split> splits(n, Split::Train);
    return make_graph(2, labels, splits, undirected(pairs),
                      Matrix::Zero(n, 1));
}

// Two K4 cliques joined by a single bridge edge (3-4).
AttributedGraph two_cliques_bridged() {
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
            pairs.emplace_back(i, j);
            pairs.emplace_back(i + 4, j + 4);
        }
    }
    pairs.emplace_back(3, 4);
    return plain_graph(8, pairs);
}

}  // namespace

TEST_CASE("modularity closed forms") {
    // Whole graph in one community -> Q = 0.
    auto g = plain_graph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
    Partition one;
    one.community_of.assign(4, 0);
    one.num_communities = 1;
    CHECK(*modularity(g, one) == doctest::Approx(0.0));

    // Triangle with singleton communities -> Q = -1/3.
    auto tri = plain_graph(3, {{0, 1}, {1, 2}, {2, 0}});
    Partition singles;
    singles.community_of = {0, 1, 2};
    singles.num_communities = 3;
    CHECK(*modularity(tri, singles) == doctest::Approx(-1.0 / 3.0));

    // Two disjoint K4s, one community each -> Q = 0.5.
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
            pairs.emplace_back(i, j);
            pairs.emplace_back(i + 4, j + 4);
        }
    }
    auto k4s = plain_graph(8, pairs);
    Partition halves;
    halves.community_of = {0, 0, 0, 0, 1, 1, 1, 1};
    halves.num_communities = 2;
    CHECK(*modularity(k4s, halves) == doctest::Approx(0.5));

    // Edgeless graph -> undefined.
    auto empty = plain_graph(3, {});
    CHECK(!modularity(empty, singles).has_value());
}

TEST_CASE("louvain recovers the two-clique partition") {
    auto g = two_cliques_bridged();

    // Independent oracle: enumerate every partition of the 8 nodes.
    auto [best_q, best_partition] = testutil::max_modularity_bruteforce(g);
    std::set<int> left(best_partition.begin(), best_partition.begin() + 4);
    std::set<int> right(best_partition.begin() + 4, best_partition.end());
    REQUIRE(left.size() == 1);
    REQUIRE(right.size() == 1);
    CHECK(left != right);

    for (std::uint64_t seed : {1, 2, 3, 11}) {
        Partition p = louvain(g, seed);
        CHECK(p.num_communities == 2);
        for (int i = 1; i < 4; ++i) {
            CHECK(p.community_of[i] == p.community_of[0]);
            CHECK(p.community_of[4 + i] == p.community_of[4]);
        }
        CHECK(p.community_of[0] != p.community_of[4]);
        CHECK(*modularity(g, p) == doctest::Approx(best_q));
    }
}

TEST_CASE("louvain trivial cases") {
    // Single triangle: brute force over the 5 partitions says 1 community.
    auto tri = plain_graph(3, {{0, 1}, {1, 2}, {2, 0}});
    auto [best_q, best_partition] = testutil::max_modularity_bruteforce(tri);
    CHECK(best_q == doctest::Approx(0.0));
    CHECK(std::set<int>(best_partition.begin(), best_partition.end()).size() ==
          1);
    Partition p = louvain(tri, 5);
    CHECK(p.num_communities == 1);

    // Edgeless graph: one singleton community per node.
    auto empty = plain_graph(5, {});
    Partition q = louvain(empty, 9);
    CHECK(q.num_communities == 5);
    std::set<int> distinct(q.community_of.begin(), q.community_of.end());
    CHECK(distinct.size() == 5);
}

TEST_CASE("louvain never loses to the singleton partition") {
    Rng rng(31);
    for (int it = 0; it < 20; ++it) {
        int n = 6 + (int)rng.uniform_int(20);
        std::vector<std::pair<int, int>> pairs;
        for (int u = 0; u < n; ++u) {
            for (int v = u + 1; v < n; ++v) {
                if (rng.bernoulli(0.2)) pairs.emplace_back(u, v);
            }
        }
        if (pairs.empty()) continue;
        auto g = plain_graph(n, pairs);
        Partition p = louvain(g, it);
        Partition singles;
        singles.community_of.resize(n);
        std::iota(singles.community_of.begin(), singles.community_of.end(), 0);
        singles.num_communities = n;
        CHECK(*modularity(g, p) >= *modularity(g, singles) - 1e-12);

        // Determinism.
        Partition p2 = louvain(g, it);
        CHECK(p.community_of == p2.community_of);
    }
}

TEST_CASE("assemble_clients merges the two smallest communities") {
    // Communities of sizes 10,10,10,10,3,2 with K=5: the 3 and 2 merge.
    int n = 45;
    std::vector<int> labels(n, 0);
    std::vector<Split> splits(n, Split::Train);
    auto g = make_graph(2, labels, splits, {}, Matrix::Zero(n, 1));
    Partition p;
    p.community_of.resize(n);
    int offset = 0, cid = 0;
    for (int size : {10, 10, 10, 10, 3, 2}) {
        for (int i = 0; i < size; ++i) p.community_of[offset + i] = cid;
        offset += size;
        ++cid;
    }
    p.num_communities = 6;

    auto clients = assemble_clients(g, p, 5, 1);
    REQUIRE(clients.size() == 5);
    std::multiset<size_t> sizes;
    for (const auto& c : clients) sizes.insert(c.global_ids.size());
    CHECK(sizes == std::multiset<size_t>{5, 10, 10, 10, 10});
}

TEST_CASE("assemble_clients exact K passes communities through") {
    auto g = two_cliques_bridged();
    Partition p = louvain(g, 3);
    REQUIRE(p.num_communities == 2);
    auto clients = assemble_clients(g, p, 2, 1);
    REQUIRE(clients.size() == 2);
    for (const auto& c : clients) CHECK(c.global_ids.size() == 4);
    // Intra-client edges only: the bridge is dropped, each K4 keeps 12
    // directed edges.
    for (const auto& c : clients) CHECK(c.local.edges.size() == 12);
}

TEST_CASE("assemble_clients splits when below K") {
    auto tri = plain_graph(3, {{0, 1}, {1, 2}, {2, 0}});
    Partition p = louvain(tri, 5);
    REQUIRE(p.num_communities == 1);
    auto clients = assemble_clients(tri, p, 2, 7);
    REQUIRE(clients.size() == 2);
    size_t total = clients[0].global_ids.size() + clients[1].global_ids.size();
    CHECK(total == 3);
    CHECK(std::abs((int)clients[0].global_ids.size() -
                   (int)clients[1].global_ids.size()) <= 1);
}

TEST_CASE("client node sets partition V exactly") {
    SynthConfig cfg;
    cfg.num_nodes = 120;
    cfg.num_classes = 3;
    cfg.intra_prob = 0.15;
    cfg.inter_prob = 0.01;
    auto g = synth_graph(cfg, 21);
    Partition p = louvain(g, 21);
    for (int k : {1, 3, 5, 9}) {
        auto clients = assemble_clients(g, p, k, 21);
        REQUIRE((int)clients.size() == k);
        std::vector<int> seen(g.num_nodes, 0);
        for (const auto& c : clients) {
            for (int v : c.global_ids) ++seen[v];
            // Local splits inherited.
            for (int i = 0; i < c.local.num_nodes; ++i) {
                CHECK(c.local.labels[i] == g.labels[c.global_ids[i]]);
                CHECK(c.local.splits[i] == g.splits[c.global_ids[i]]);
            }
        }
        CHECK(std::all_of(seen.begin(), seen.end(),
                          [](int x) { return x == 1; }));
    }
    CHECK_THROWS_AS(assemble_clients(g, p, g.num_nodes + 1, 1), ConfigError);
}

TEST_CASE("partition tsv round trip") {
    testutil::TempDir dir;
    Partition p;
    p.community_of = {0, 1, 1, 0, 2};
    p.num_communities = 3;
    auto path = (dir.path / "partition.tsv").string();
    write_partition_tsv(p, path);
    Partition q = read_partition_tsv(path, 5);
    CHECK(q.community_of == p.community_of);
    CHECK(q.num_communities == 3);
}
