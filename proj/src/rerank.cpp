#include "udg/rerank.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "udg/synth.hpp"

namespace udg {

MissingHeadPolicy parse_missing_head_policy(const std::string& name) {
  if (name == "fallback" || name == "fallback_to_update") {
    return MissingHeadPolicy::FallbackToUpdate;
  }
  if (name == "drop-query" || name == "drop_query") {
    return MissingHeadPolicy::DropQuery;
  }
  throw ConfigError("unknown missing-head policy '" + name + "'");
}

GraphSource parse_graph_source(const std::string& name) {
  if (name == "head" || name == "head-driven") return GraphSource::HeadDriven;
  if (name == "body" || name == "body-driven") return GraphSource::BodyDriven;
  throw ConfigError("unknown graph source '" + name + "'");
}

SimilarityMatrix fuse_similarities(const SimilarityMatrix& s_head,
                                   const SimilarityMatrix& s_update,
                                   const FusionConfig& cfg) {
  if (cfg.lambda < 0.0 || cfg.lambda > 1.0) {
    throw ConfigError("fuse_similarities: lambda must lie in [0,1]");
  }
  if (s_head.row_ids != s_update.row_ids ||
      s_head.col_ids != s_update.col_ids) {
    throw MatrixMismatchError(
        "fuse_similarities: row/col id lists do not match");
  }
  if (s_update.any_missing()) {
    throw DataError("fuse_similarities: update matrix has missing entries");
  }

  const std::size_t rows = s_head.rows(), cols = s_head.cols();

  // Under DropQuery a query whose own head is absent (entire row missing)
  // is removed; gallery-side gaps still fall back to the update score.
  std::vector<std::size_t> keep_rows;
  for (std::size_t i = 0; i < rows; ++i) {
    bool all_missing = true;
    for (std::size_t j = 0; j < cols && all_missing; ++j) {
      if (!s_head.is_missing(i, j)) all_missing = false;
    }
    if (cfg.missing_head_policy == MissingHeadPolicy::DropQuery && all_missing) {
      continue;
    }
    keep_rows.push_back(i);
  }

  SimilarityMatrix fused;
  fused.col_ids = s_head.col_ids;
  fused.values = Matrix(keep_rows.size(), cols);
  fused.missing.assign(keep_rows.size() * cols, 0);
  for (std::size_t r = 0; r < keep_rows.size(); ++r) {
    const std::size_t i = keep_rows[r];
    fused.row_ids.push_back(s_head.row_ids[i]);
    for (std::size_t j = 0; j < cols; ++j) {
      fused.values(r, j) =
          s_head.is_missing(i, j)
              ? s_update.values(i, j)
              : cfg.lambda * s_head.values(i, j) +
                    (1.0 - cfg.lambda) * s_update.values(i, j);
    }
  }
  return fused;
}

std::vector<RankedList> rank_by_similarity(const SimilarityMatrix& sim) {
  std::vector<RankedList> out;
  out.reserve(sim.rows());
  for (std::size_t i = 0; i < sim.rows(); ++i) {
    RankedList list;
    list.query_id = sim.row_ids[i];
    std::vector<std::size_t> order;
    order.reserve(sim.cols());
    for (std::size_t j = 0; j < sim.cols(); ++j) {
      if (!sim.is_missing(i, j)) order.push_back(j);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double sa = sim.values(i, a), sb = sim.values(i, b);
      if (sa != sb) return sa > sb;
      return sim.col_ids[a] < sim.col_ids[b];
    });
    for (std::size_t j : order) {
      list.gallery_ids.push_back(sim.col_ids[j]);
      list.scores.push_back(sim.values(i, j));
    }
    out.push_back(std::move(list));
  }
  return out;
}

namespace {

Matrix body_matrix(const EmbeddingSet& set) {
  Matrix m(set.size(), set.body_dim());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& v = set[i].body;
    std::copy(v.begin(), v.end(), m.row(i));
  }
  return m;
}

std::size_t headed_count(const EmbeddingSet& set) {
  std::size_t n = 0;
  for (const auto& rec : set.records()) {
    if (rec.has_head()) ++n;
  }
  return n;
}

// Body graph, rewritten by head edges when the config asks for the
// head-driven variant. With fewer than two head-bearing nodes the transfer
// set is empty and the body graph is used as-is.
KnnGraph build_driven_graph(const EmbeddingSet& set,
                            const PipelineConfig& cfg) {
  KnnGraph body_g = build_knn_graph(set, Channel::Body, cfg.k, cfg.metric);
  if (cfg.graph_source == GraphSource::BodyDriven) return body_g;
  if (headed_count(set) < 2) return body_g;
  KnnGraph head_g = build_knn_graph(set, Channel::Head, cfg.k, cfg.metric);
  return transfer_head_edges(head_g, body_g, cfg.transfer_mode);
}

// Identity labels remapped to contiguous class indices (ascending identity
// order).
std::vector<std::optional<int>> contiguous_labels(const EmbeddingSet& set) {
  std::map<int, int> remap;
  for (const auto& rec : set.records()) {
    if (rec.label) remap.emplace(*rec.label, 0);
  }
  int next = 0;
  for (auto& [identity, cls] : remap) cls = next++;
  std::vector<std::optional<int>> labels;
  labels.reserve(set.size());
  for (const auto& rec : set.records()) {
    if (rec.label) {
      labels.push_back(remap.at(*rec.label));
    } else {
      labels.push_back(std::nullopt);
    }
  }
  return labels;
}

}  // namespace

PipelineTrainResult train_pipeline_net(const EmbeddingSet& train,
                                       const PipelineConfig& cfg) {
  if (train.empty()) throw EmptySetError("train_pipeline_net: empty train set");
  KnnGraph graph = build_driven_graph(train, cfg);
  NormalizedAdjacency adj = normalize_adjacency(graph);
  const Matrix features = body_matrix(train);
  const auto labels = contiguous_labels(train);
  TrainConfig tcfg;
  tcfg.net = cfg.net;
  tcfg.learning_rate = cfg.learning_rate;
  tcfg.epochs = cfg.epochs;
  tcfg.seed = cfg.seed;
  TrainResult trained = train_gcn(features, adj, labels, tcfg);

  PipelineTrainResult result;
  result.loss_history = std::move(trained.loss_history);
  result.train_accuracy =
      labeled_accuracy(gcn_forward(features, adj, trained.net).probs, labels);
  result.net = std::move(trained.net);
  return result;
}

PipelineResult rerank_with_net(const MixhopNet& net, const EmbeddingSet& query,
                               const EmbeddingSet& gallery,
                               const PipelineConfig& cfg) {
  if (query.empty() || gallery.empty()) {
    throw EmptySetError("rerank: empty query or gallery set");
  }
  const EmbeddingSet pooled = query.concat(gallery);
  KnnGraph graph = build_driven_graph(pooled, cfg);
  NormalizedAdjacency adj = normalize_adjacency(graph);
  Matrix updated = extract_updated_features(net, body_matrix(pooled), adj);

  // Split the pooled updated features back into query and gallery rows.
  const std::size_t nq = query.size();
  std::vector<std::uint64_t> query_ids, gallery_ids;
  for (std::size_t i = 0; i < nq; ++i) query_ids.push_back(query[i].record_id);
  for (std::size_t j = 0; j < gallery.size(); ++j) {
    gallery_ids.push_back(gallery[j].record_id);
  }

  PipelineResult result;
  result.update_similarity = pairwise_similarity(
      slice_rows(updated, 0, nq), slice_rows(updated, nq, gallery.size()),
      std::move(query_ids), std::move(gallery_ids));
  result.head_similarity = pairwise_similarity(query, gallery, Channel::Head);
  result.fused = fuse_similarities(result.head_similarity,
                                   result.update_similarity, cfg.fusion);
  result.rankings = rank_by_similarity(result.fused);
  if (cfg.exclude_same_frame) {
    result.rankings =
        exclude_same_frame_entries(result.rankings, query, gallery);
  }
  return result;
}

PipelineResult rerank_pipeline(const EmbeddingSet& train,
                               const EmbeddingSet& query,
                               const EmbeddingSet& gallery,
                               const PipelineConfig& cfg) {
  return rerank_with_net(train_pipeline_net(train, cfg).net, query, gallery,
                         cfg);
}

std::vector<RankedList> baseline_cosine_ranking(const EmbeddingSet& query,
                                                const EmbeddingSet& gallery,
                                                Channel channel,
                                                bool exclude_same_frame) {
  auto rankings = rank_by_similarity(
      pairwise_similarity(query, gallery, channel));
  if (exclude_same_frame) {
    rankings = exclude_same_frame_entries(rankings, query, gallery);
  }
  return rankings;
}

std::vector<RankedList> exclude_same_frame_entries(
    const std::vector<RankedList>& rankings, const EmbeddingSet& query,
    const EmbeddingSet& gallery) {
  std::map<std::uint64_t, std::uint64_t> frame_of;
  for (const auto& rec : gallery.records()) {
    frame_of[rec.record_id] = rec.frame_id;
  }
  std::vector<RankedList> out;
  out.reserve(rankings.size());
  for (const auto& list : rankings) {
    const auto qidx = query.index_of(list.query_id);
    if (!qidx) {
      out.push_back(list);
      continue;
    }
    const std::uint64_t qframe = query[*qidx].frame_id;
    RankedList filtered;
    filtered.query_id = list.query_id;
    for (std::size_t r = 0; r < list.gallery_ids.size(); ++r) {
      auto it = frame_of.find(list.gallery_ids[r]);
      if (it != frame_of.end() && it->second == qframe) continue;
      filtered.gallery_ids.push_back(list.gallery_ids[r]);
      filtered.scores.push_back(list.scores[r]);
    }
    out.push_back(std::move(filtered));
  }
  return out;
}

}  // namespace udg
