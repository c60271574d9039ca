#include "udg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "udg/losses.hpp"

namespace udg {

Metric parse_metric(const std::string& name) {
  if (name == "cosine" || name == "one-minus-cosine") {
    return Metric::OneMinusCosine;
  }
  if (name == "euclidean") return Metric::Euclidean;
  throw ConfigError("unknown metric '" + name + "'");
}

TransferMode parse_transfer_mode(const std::string& name) {
  if (name == "replace") return TransferMode::Replace;
  if (name == "union") return TransferMode::Union;
  throw ConfigError("unknown transfer mode '" + name + "'");
}

bool KnnGraph::has_edge(int i, int j) const {
  const auto& nbrs = adj[i];
  return std::binary_search(nbrs.begin(), nbrs.end(), j);
}

std::size_t KnnGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& nbrs : adj) n += nbrs.size();
  return n;
}

std::vector<std::pair<int, int>> KnnGraph::edge_list() const {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(edge_count());
  for (int i = 0; i < n_nodes; ++i) {
    for (int j : adj[i]) edges.emplace_back(i, j);
  }
  return edges;
}

KnnGraph build_knn_graph(const EmbeddingSet& set, Channel channel, int k,
                         Metric metric) {
  if (k <= 0) throw ConfigError("build_knn_graph: k must be >= 1");
  const int n = static_cast<int>(set.size());

  KnnGraph g;
  g.n_nodes = n;
  g.k = k;
  g.channel = channel;
  g.adj.resize(n);
  g.has_channel.resize(n);

  std::vector<int> carriers;
  for (int i = 0; i < n; ++i) {
    g.has_channel[i] = set.has_channel(i, channel) ? 1 : 0;
    if (g.has_channel[i]) carriers.push_back(i);
  }
  if (carriers.size() < 2) {
    throw DegenerateGraphError(
        "build_knn_graph: fewer than 2 nodes carry the " +
        to_string(channel) + " channel");
  }

  const DistanceKind dk = metric == Metric::Euclidean
                              ? DistanceKind::Euclidean
                              : DistanceKind::OneMinusCosine;

  // Per node: bounded max-heap on (distance, index); the lexicographic order
  // makes ties resolve toward the lower index.
  using Cand = std::pair<double, int>;
  for (int i : carriers) {
    const auto& vi = set.channel_vector(i, channel);
    std::priority_queue<Cand> heap;
    for (int j : carriers) {
      if (j == i) continue;
      const double d = pair_distance(vi, set.channel_vector(j, channel), dk);
      if (heap.size() < static_cast<std::size_t>(k)) {
        heap.emplace(d, j);
      } else if (Cand(d, j) < heap.top()) {
        heap.pop();
        heap.emplace(d, j);
      }
    }
    auto& nbrs = g.adj[i];
    nbrs.reserve(heap.size());
    while (!heap.empty()) {
      nbrs.push_back(heap.top().second);
      heap.pop();
    }
    std::sort(nbrs.begin(), nbrs.end());
  }
  return g;
}

KnnGraph transfer_head_edges(const KnnGraph& head_graph,
                             const KnnGraph& body_graph, TransferMode mode) {
  if (head_graph.n_nodes != body_graph.n_nodes) {
    throw GraphMismatchError("transfer_head_edges: node count mismatch (" +
                             std::to_string(head_graph.n_nodes) + " vs " +
                             std::to_string(body_graph.n_nodes) + ")");
  }
  const auto& headed = head_graph.has_channel;

  KnnGraph out;
  out.n_nodes = body_graph.n_nodes;
  out.k = body_graph.k;
  out.channel = body_graph.channel;
  out.has_channel = body_graph.has_channel;
  out.adj.resize(out.n_nodes);

  for (int i = 0; i < out.n_nodes; ++i) {
    std::vector<int> nbrs;
    if (mode == TransferMode::Replace && headed[i]) {
      // Head-headed pairs follow the head graph; pairs with a headless
      // endpoint keep their body edges.
      for (int j : body_graph.adj[i]) {
        if (!headed[j]) nbrs.push_back(j);
      }
      for (int j : head_graph.adj[i]) nbrs.push_back(j);
    } else {
      nbrs = body_graph.adj[i];
      if (mode == TransferMode::Union && headed[i]) {
        for (int j : head_graph.adj[i]) nbrs.push_back(j);
      }
    }
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    out.adj[i] = std::move(nbrs);
  }
  return out;
}

NormalizedAdjacency normalize_adjacency(const KnnGraph& g) {
  const int n = g.n_nodes;
  if (n == 0) {
    throw DegenerateGraphError("normalize_adjacency: empty graph");
  }

  // Symmetrize: edge if either direction is present.
  Matrix a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j : g.adj[i]) {
      a(i, j) = 1.0;
      a(j, i) = 1.0;
    }
  }
  std::vector<double> degree(n);
  for (int i = 0; i < n; ++i) {
    double d = 1.0;  // self-loop from the +I term
    for (int j = 0; j < n; ++j) d += a(i, j);
    degree[i] = d;
  }

  NormalizedAdjacency norm;
  norm.values = Matrix(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double aij = (i == j) ? 1.0 : a(i, j);
      if (aij != 0.0) {
        norm.values(i, j) = aij / std::sqrt(degree[i] * degree[j]);
      }
    }
  }
  return norm;
}

}  // namespace udg
