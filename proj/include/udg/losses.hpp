#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "udg/core.hpp"
#include "udg/matrix.hpp"

namespace udg {

// Memory bank of per-identity feature centers. Rows are kept unit-norm; the
// softmax over bank logits is tempered by `temperature` and rows are updated
// with momentum `momentum` (1 freezes the bank, 0 replaces rows outright).
struct OimBank {
  Matrix centers;  // C x L, unit rows
  double temperature = 1.0 / 30.0;
  double momentum = 0.5;

  std::size_t num_identities() const { return centers.rows(); }
  std::size_t dim() const { return centers.cols(); }

  // Bank with rows drawn as random unit vectors from the seeded generator.
  static OimBank random(std::size_t n_identities, std::size_t dim,
                        double temperature, double momentum,
                        std::uint64_t seed);

  // Throws ConfigError / DimensionError / NormalizationError when the bank
  // invariants do not hold.
  void validate() const;
};

struct OimResult {
  double loss = 0.0;
  Matrix grad;  // B x L, d(loss)/d(batch rows); bank treated as constant
};

// Mean over the batch of -log softmax_{label}(centers * x / temperature).
OimResult oim_loss(const Matrix& batch, const std::vector<int>& labels,
                   const OimBank& bank);

// Folds the batch into the bank in batch order:
//   v_label <- normalize(momentum * v_label + (1 - momentum) * x)
OimBank oim_update_bank(OimBank bank, const Matrix& batch,
                        const std::vector<int>& labels);

enum class DistanceKind { Euclidean, OneMinusCosine };

double pair_distance(std::span<const double> a, std::span<const double> b,
                     DistanceKind kind);

struct TripletConfig {
  double margin = 0.3;
  DistanceKind distance = DistanceKind::Euclidean;
};

struct TripletResult {
  double loss = 0.0;
  std::vector<double> grad_anchor;
  std::vector<double> grad_positive;
  std::vector<double> grad_negative;
};

// max(margin + d(a,p) - d(a,n), 0) with analytic gradients for all three
// inputs; gradients are identically zero when the hinge is inactive.
TripletResult triplet_loss(std::span<const double> anchor,
                           std::span<const double> positive,
                           std::span<const double> negative,
                           const TripletConfig& cfg);

struct TripletIndices {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
};

// Batch-hard mining: per anchor, the same-label row at maximum distance and
// the different-label row at minimum distance (ties to the lower index).
// Anchors without both a positive and a negative are skipped.
std::vector<TripletIndices> mine_batch_hard(const Matrix& batch,
                                            const std::vector<int>& labels,
                                            DistanceKind kind);

struct ProjectionTrainConfig {
  double learning_rate = 0.1;
  int epochs = 10;
  int batch_size = 32;
  double triplet_weight = 1.0;
  double temperature = 1.0 / 30.0;
  double momentum = 0.5;
  TripletConfig triplet;
  std::uint64_t seed = 0;
};

struct ProjectionTrainResult {
  Matrix weight;              // dim x dim
  std::vector<double> bias;   // dim
  OimBank bank;
  std::vector<double> loss_history;  // mean combined loss per epoch
};

// Demonstration trainer for the losses: fits one affine map y = W x + b on
// the labeled records of the chosen channel, minimizing the OIM loss plus
// triplet_weight times the batch-hard triplet loss, with the bank updated
// after every mini-batch. Deterministic in the seed.
ProjectionTrainResult fit_projection_head(const EmbeddingSet& set,
                                          Channel channel,
                                          const ProjectionTrainConfig& cfg);

}  // namespace udg
