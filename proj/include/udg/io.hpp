#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "udg/core.hpp"
#include "udg/eval.hpp"
#include "udg/rerank.hpp"
#include "udg/synth.hpp"

namespace udg {

enum class FileFormat { Auto, Binary, Jsonl };

FileFormat parse_format(const std::string& name);

struct LoadOptions {
  bool normalize = true;          // L2-normalize vectors on ingestion
  double min_head_score = 0.0;    // drop heads of records scored below this
};

// Embedding container formats. Binary is the framed "UDGB" layout; JSONL is
// one object per record. Both store vectors in single precision and
// interconvert losslessly at that precision. Auto sniffs the magic bytes.
void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path,
                     FileFormat format);
EmbeddingSet load_embeddings(const std::filesystem::path& path,
                             FileFormat format = FileFormat::Auto,
                             const LoadOptions& opts = {});

// Detection boxes: JSONL {frame, box, score}. Ground truth: {frame, box,
// identity}.
std::vector<BoxRecord> load_detection_boxes(const std::filesystem::path& path);
std::vector<BoxRecord> load_ground_truth_boxes(
    const std::filesystem::path& path);

// Ranked lists as JSON lines {query_id, ranked_gallery_ids, scores}.
void save_rankings(const std::vector<RankedList>& rankings,
                   const std::filesystem::path& path);
std::vector<RankedList> load_rankings(const std::filesystem::path& path);

// Everything a CLI run needs; config file values are overlaid first, then
// explicitly passed flags win.
struct RunConfig {
  // pipeline
  int k = 5;
  double lambda = 0.5;
  std::string transfer_mode = "replace";
  std::string powers = "0,1,2";
  int depth = 3;
  int hidden_width = 128;
  double lr = 0.5;
  int epochs = 40;
  std::uint64_t seed = 0;
  double min_head_score = 0.0;
  double iou_threshold = 0.5;
  std::string graph = "head";
  std::string metric = "cosine";
  std::string missing_head_policy = "fallback";
  bool normalize = true;
  bool exclude_same_frame = true;
  std::string format = "binary";
  std::string out_dir = ".";

  // scenario generation
  int identities = 100;
  int clothes = 3;
  int samples_per_clothing = 10;
  int body_dim = 64;
  int head_dim = 32;
  double body_sigma = 0.15;
  double head_sigma = 0.15;
  double confusion = 0.3;
  double head_missing_rate = 0.3;
  double train_fraction = 0.6;
};

// Plain-text `key = value` lines; '#' starts a comment. Unknown keys are
// rejected.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

// Attaches relevance flags (gallery label == query label) to ranked lists.
// Ids must resolve against the given sets; unlabeled queries end up with no
// positives and are excluded downstream.
std::vector<RankedResult> to_ranked_results(
    const std::vector<RankedList>& rankings, const EmbeddingSet& query,
    const EmbeddingSet& gallery);

// Deterministic metric serializations: identical metrics give identical
// bytes.
std::string retrieval_metrics_json(const RetrievalMetrics& metrics);
std::string detection_metrics_json(const DetectionMetrics& metrics);

std::vector<int> parse_powers(const std::string& csv);

PipelineConfig pipeline_config_from(const RunConfig& cfg);
ScenarioConfig scenario_config_from(const RunConfig& cfg);

}  // namespace udg
