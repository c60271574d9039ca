#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "udg/core.hpp"
#include "udg/matrix.hpp"

namespace udg {

enum class Metric { OneMinusCosine, Euclidean };
enum class TransferMode { Replace, Union };

Metric parse_metric(const std::string& name);
TransferMode parse_transfer_mode(const std::string& name);

// Directed k-NN edge set over the nodes of an EmbeddingSet. Node i's
// out-neighborhood lists the k nearest other nodes that carry the graph's
// channel; nodes without the channel have no edges at all. Self-loops never
// appear here (the +I term of the normalized adjacency adds them).
struct KnnGraph {
  int n_nodes = 0;
  int k = 0;
  Channel channel = Channel::Body;
  std::vector<std::vector<int>> adj;       // adj[i] sorted ascending
  std::vector<std::uint8_t> has_channel;   // node carries the channel vector

  bool has_edge(int i, int j) const;
  std::size_t edge_count() const;
  // All edges as ordered (src,dst) pairs, sorted; handy for exact
  // comparisons against oracles.
  std::vector<std::pair<int, int>> edge_list() const;
};

// For each node carrying the channel, links its k nearest channel-bearing
// other nodes under the metric; distance ties break toward the lower node
// index. Fewer than k candidates means all of them are linked.
KnnGraph build_knn_graph(const EmbeddingSet& set, Channel channel, int k,
                         Metric metric);

// Rewrites the body graph using head-graph edges. Replace mode: on every
// ordered pair whose two endpoints both carry heads, edge presence is taken
// from the head graph; every other pair keeps its body edge. Union mode:
// head edges between head-bearing endpoints are added on top of the body
// edges. Both modes are idempotent for a fixed head graph.
KnnGraph transfer_head_edges(const KnnGraph& head_graph,
                             const KnnGraph& body_graph, TransferMode mode);

// Symmetric degree-normalized adjacency D^{-1/2} (A + I) D^{-1/2}, where A
// is the symmetrized 0/1 edge matrix and D the degree matrix of A + I.
struct NormalizedAdjacency {
  Matrix values;
  std::size_t size() const { return values.rows(); }
};

NormalizedAdjacency normalize_adjacency(const KnnGraph& g);

}  // namespace udg
