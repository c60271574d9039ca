#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "udg/graph.hpp"
#include "udg/matrix.hpp"

namespace udg {

enum class Activation { Identity, Relu };

// One graph layer: for each adjacency power j in `powers` the input is
// propagated j hops and projected through its own weight matrix; the
// per-power activations are concatenated column-wise, so the layer output
// width is powers.size() * hidden_dim.
struct MixhopLayer {
  std::vector<int> powers;       // ascending, non-negative
  std::vector<Matrix> weights;   // one per power, in_dim x hidden_dim
  Activation activation = Activation::Relu;

  std::size_t in_dim() const { return weights.front().rows(); }
  std::size_t hidden_dim() const { return weights.front().cols(); }
  std::size_t out_dim() const { return powers.size() * hidden_dim(); }
};

struct Classifier {
  Matrix weight;  // in_dim x n_classes
  std::vector<double> bias;
};

struct MixhopNet {
  std::vector<MixhopLayer> layers;
  Classifier classifier;

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }
  std::size_t n_classes() const { return classifier.bias.size(); }
};

struct MixhopConfig {
  int depth = 3;
  std::vector<int> powers = {0, 1, 2};
  int hidden_width = 128;
};

// Seeded init: weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases
// zero. Hidden layers use ReLU, the final graph layer is linear so the
// extracted embeddings keep both signs.
MixhopNet init_mixhop_net(std::size_t in_dim, std::size_t n_classes,
                          const MixhopConfig& cfg, std::uint64_t seed);

// Materialized dense powers of the normalized adjacency (power 0 is treated
// as the identity and never stored).
class AdjacencyPowers {
 public:
  AdjacencyPowers(const NormalizedAdjacency& adj, int max_power);

  std::size_t n_nodes() const { return n_; }
  int max_power() const { return static_cast<int>(powers_.size()); }

  // adj^j * m
  Matrix apply(int power, const Matrix& m) const;

 private:
  std::size_t n_ = 0;
  std::vector<Matrix> powers_;  // powers_[j-1] = adj^j
};

// Column concatenation over ascending powers j of
// activation(adj^j * h * W_j).
Matrix mixhop_forward(const Matrix& h, const AdjacencyPowers& powers,
                      const MixhopLayer& layer);
Matrix mixhop_forward(const Matrix& h, const NormalizedAdjacency& adj,
                      const MixhopLayer& layer);

struct GcnOutput {
  Matrix embeddings;  // output of the final graph layer
  Matrix probs;       // row-wise softmax of the classifier logits
};

GcnOutput gcn_forward(const Matrix& features, const AdjacencyPowers& powers,
                      const MixhopNet& net);
GcnOutput gcn_forward(const Matrix& features, const NormalizedAdjacency& adj,
                      const MixhopNet& net);

struct CrossEntropyResult {
  double loss = 0.0;
  Matrix grad_logits;  // (probs - onehot) / n_labeled on labeled rows
};

// Mean negative log-likelihood over labeled rows; unlabeled rows contribute
// nothing. probs must be softmax outputs for grad_logits to be meaningful.
CrossEntropyResult cross_entropy(const Matrix& probs,
                                 const std::vector<std::optional<int>>& labels);

// Parameter gradients mirroring the net layout.
struct NetGradients {
  std::vector<std::vector<Matrix>> layer_weights;  // [layer][power]
  Matrix classifier_weight;
  std::vector<double> classifier_bias;
};

// Cross-entropy loss of the full forward pass; when grads is non-null it is
// filled with analytic d(loss)/d(parameter) via backpropagation.
double gcn_loss_and_gradients(const Matrix& features,
                              const AdjacencyPowers& powers,
                              const std::vector<std::optional<int>>& labels,
                              const MixhopNet& net, NetGradients* grads);

struct TrainConfig {
  MixhopConfig net;
  double learning_rate = 0.5;
  int epochs = 100;
  std::uint64_t seed = 0;
};

struct TrainResult {
  MixhopNet net;
  std::vector<double> loss_history;  // loss before each update, one per epoch
};

// Full-batch gradient descent on the cross-entropy of the labeled nodes.
// Deterministic given the seed; throws TrainingDivergedError (with the epoch
// index) the moment the loss stops being finite.
TrainResult train_gcn(const Matrix& features, const NormalizedAdjacency& adj,
                      const std::vector<std::optional<int>>& labels,
                      const TrainConfig& cfg);

// L2-normalized output of the final graph layer (the classifier is not
// applied). Rows that come out identically zero are left zero.
Matrix extract_updated_features(const MixhopNet& net, const Matrix& features,
                                const NormalizedAdjacency& adj);
Matrix extract_updated_features(const MixhopNet& net, const Matrix& features,
                                const AdjacencyPowers& powers);

// Versioned binary net file ("UDGN", little-endian, f64 weights).
void save_net(const MixhopNet& net, const std::filesystem::path& path);
MixhopNet load_net(const std::filesystem::path& path);

// Fraction of labeled rows whose arg-max probability matches the label.
double labeled_accuracy(const Matrix& probs,
                        const std::vector<std::optional<int>>& labels);

}  // namespace udg
