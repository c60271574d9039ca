#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "udg/core.hpp"
#include "udg/graph.hpp"
#include "udg/mixhop.hpp"

namespace udg {

// What to do with fused entries whose head similarity is missing. Fallback
// substitutes the update score; DropQuery removes queries whose head is
// absent outright (their whole head row is missing) while per-entry gallery
// gaps still fall back to the update score.
enum class MissingHeadPolicy { FallbackToUpdate, DropQuery };

MissingHeadPolicy parse_missing_head_policy(const std::string& name);

struct FusionConfig {
  double lambda = 0.5;  // weight of the head similarity, in [0, 1]
  MissingHeadPolicy missing_head_policy = MissingHeadPolicy::FallbackToUpdate;
};

// Entrywise lambda * S_head + (1 - lambda) * S_update over matrices with
// identical row/col id lists.
SimilarityMatrix fuse_similarities(const SimilarityMatrix& s_head,
                                   const SimilarityMatrix& s_update,
                                   const FusionConfig& cfg);

// Which graph drives feature propagation: the body graph rewritten by head
// edges, or the plain body graph (the ablation control).
enum class GraphSource { HeadDriven, BodyDriven };

GraphSource parse_graph_source(const std::string& name);

struct PipelineConfig {
  int k = 5;
  Metric metric = Metric::OneMinusCosine;
  TransferMode transfer_mode = TransferMode::Replace;
  GraphSource graph_source = GraphSource::HeadDriven;
  MixhopConfig net;
  double learning_rate = 0.5;
  int epochs = 40;
  std::uint64_t seed = 0;
  FusionConfig fusion;
  bool exclude_same_frame = true;
};

struct RankedList {
  std::uint64_t query_id = 0;
  std::vector<std::uint64_t> gallery_ids;  // descending fused score
  std::vector<double> scores;
};

struct PipelineResult {
  SimilarityMatrix head_similarity;
  SimilarityMatrix update_similarity;
  SimilarityMatrix fused;
  std::vector<RankedList> rankings;
};

struct PipelineTrainResult {
  MixhopNet net;
  std::vector<double> loss_history;
  double train_accuracy = 0.0;  // labeled accuracy on the train graph
};

// Builds the configured graph over the train set and fits the MixHop net to
// its identity labels (remapped to contiguous classes).
PipelineTrainResult train_pipeline_net(const EmbeddingSet& train,
                                       const PipelineConfig& cfg);

// Inference over query + gallery pooled into one graph: propagate with the
// trained net, compute head and updated-feature similarities, fuse, rank.
PipelineResult rerank_with_net(const MixhopNet& net, const EmbeddingSet& query,
                               const EmbeddingSet& gallery,
                               const PipelineConfig& cfg);

// train_pipeline_net + rerank_with_net.
PipelineResult rerank_pipeline(const EmbeddingSet& train,
                               const EmbeddingSet& query,
                               const EmbeddingSet& gallery,
                               const PipelineConfig& cfg);

// Gallery order per query by descending score, ties toward the lower record
// id. Missing entries must already be resolved.
std::vector<RankedList> rank_by_similarity(const SimilarityMatrix& sim);

// Control ranking straight from channel cosine similarity, no graph.
std::vector<RankedList> baseline_cosine_ranking(const EmbeddingSet& query,
                                                const EmbeddingSet& gallery,
                                                Channel channel,
                                                bool exclude_same_frame = true);

// Drops gallery entries sharing the query's frame from each ranked list.
std::vector<RankedList> exclude_same_frame_entries(
    const std::vector<RankedList>& rankings, const EmbeddingSet& query,
    const EmbeddingSet& gallery);

}  // namespace udg
