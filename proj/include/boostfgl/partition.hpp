#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "boostfgl/graph.hpp"

namespace boostfgl {

/// Node-to-community map with contiguous community ids.
struct Partition {
    std::vector<int> community_of;
    int num_communities = 0;
};

/// Two-phase Louvain over the undirected unit-weight view of the graph:
/// seeded-order local moves that strictly increase modularity, then community
/// coarsening, iterated to a fixed point. Resolution 1.
Partition louvain(const AttributedGraph& g, std::uint64_t seed);

/// Newman modularity Q of a partition over the undirected unit-weight view.
/// nullopt on an edgeless graph.
std::optional<double> modularity(const AttributedGraph& g, const Partition& p);

/// One client's induced subgraph. Only intra-client edges are kept; splits
/// and labels are inherited from the global graph.
struct ClientSubgraph {
    int client_id = 0;
    AttributedGraph local;
    std::vector<int> global_ids;      // local index -> global node id
    std::vector<int> train_labeled;   // local ids, ascending
};

/// Turns a partition into exactly K clients: merges the two smallest
/// communities while there are more than K, splits the largest by a seeded
/// balanced cut while there are fewer. Client node sets partition V.
std::vector<ClientSubgraph> assemble_clients(const AttributedGraph& g,
                                             const Partition& p, int k,
                                             std::uint64_t seed);

void write_partition_tsv(const Partition& p, const std::string& path);
Partition read_partition_tsv(const std::string& path, int num_nodes);

}  // namespace boostfgl
