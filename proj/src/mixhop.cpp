#include "udg/mixhop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "binary_util.hpp"
#include "udg/core.hpp"
#include "udg/rng.hpp"

namespace udg {

namespace {

Matrix apply_activation(const Matrix& z, Activation act) {
  if (act == Activation::Identity) return z;
  Matrix a = z;
  for (auto& x : a.data()) x = x > 0.0 ? x : 0.0;
  return a;
}

void validate_powers(const std::vector<int>& powers) {
  if (powers.empty()) throw ConfigError("mixhop: empty power set");
  for (std::size_t i = 0; i < powers.size(); ++i) {
    if (powers[i] < 0) throw ConfigError("mixhop: negative adjacency power");
    if (i > 0 && powers[i] <= powers[i - 1]) {
      throw ConfigError("mixhop: powers must be strictly ascending");
    }
  }
}

int max_net_power(const MixhopNet& net) {
  int p = 0;
  for (const auto& layer : net.layers) {
    p = std::max(p, layer.powers.back());
  }
  return p;
}

Matrix init_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix w(fan_in, fan_out);
  for (auto& x : w.data()) x = rng.uniform(-bound, bound);
  return w;
}

}  // namespace

MixhopNet init_mixhop_net(std::size_t in_dim, std::size_t n_classes,
                          const MixhopConfig& cfg, std::uint64_t seed) {
  if (cfg.depth < 1) throw ConfigError("mixhop: depth must be >= 1");
  if (cfg.hidden_width < 1) throw ConfigError("mixhop: hidden width must be >= 1");
  if (n_classes < 2) throw ConfigError("mixhop: need at least 2 classes");
  validate_powers(cfg.powers);

  Rng rng(seed);
  MixhopNet net;
  std::size_t dim = in_dim;
  for (int l = 0; l < cfg.depth; ++l) {
    MixhopLayer layer;
    layer.powers = cfg.powers;
    layer.activation =
        l + 1 < cfg.depth ? Activation::Relu : Activation::Identity;
    for (std::size_t p = 0; p < cfg.powers.size(); ++p) {
      layer.weights.push_back(
          init_weight(dim, static_cast<std::size_t>(cfg.hidden_width), rng));
    }
    dim = layer.out_dim();
    net.layers.push_back(std::move(layer));
  }
  net.classifier.weight = init_weight(dim, n_classes, rng);
  net.classifier.bias.assign(n_classes, 0.0);
  return net;
}

AdjacencyPowers::AdjacencyPowers(const NormalizedAdjacency& adj,
                                 int max_power) {
  n_ = adj.size();
  if (max_power < 0) throw ConfigError("AdjacencyPowers: negative power");
  if (max_power >= 1) powers_.push_back(adj.values);
  for (int j = 2; j <= max_power; ++j) {
    powers_.push_back(matmul(powers_.back(), adj.values));
  }
}

Matrix AdjacencyPowers::apply(int power, const Matrix& m) const {
  if (power == 0) return m;
  if (power > max_power()) {
    throw ConfigError("AdjacencyPowers: power " + std::to_string(power) +
                      " not materialized");
  }
  return matmul(powers_[power - 1], m);
}

Matrix mixhop_forward(const Matrix& h, const AdjacencyPowers& powers,
                      const MixhopLayer& layer) {
  validate_powers(layer.powers);
  if (h.cols() != layer.in_dim()) {
    throw DimensionError("mixhop_forward: feature dim " +
                         std::to_string(h.cols()) + " != layer in_dim " +
                         std::to_string(layer.in_dim()));
  }
  if (h.rows() != powers.n_nodes()) {
    throw DimensionError("mixhop_forward: node count mismatch");
  }
  std::vector<Matrix> blocks;
  blocks.reserve(layer.powers.size());
  for (std::size_t p = 0; p < layer.powers.size(); ++p) {
    Matrix z = powers.apply(layer.powers[p], matmul(h, layer.weights[p]));
    blocks.push_back(apply_activation(z, layer.activation));
  }
  return hconcat(blocks);
}

Matrix mixhop_forward(const Matrix& h, const NormalizedAdjacency& adj,
                      const MixhopLayer& layer) {
  AdjacencyPowers powers(adj, layer.powers.back());
  return mixhop_forward(h, powers, layer);
}

namespace {

Matrix softmax_rows(const Matrix& logits) {
  Matrix probs(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const double* z = logits.row(i);
    double* p = probs.row(i);
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < logits.cols(); ++j) zmax = std::max(zmax, z[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < logits.cols(); ++j) {
      p[j] = std::exp(z[j] - zmax);
      denom += p[j];
    }
    for (std::size_t j = 0; j < logits.cols(); ++j) p[j] /= denom;
  }
  return probs;
}

Matrix classifier_logits(const Matrix& embeddings, const Classifier& clf) {
  Matrix logits = matmul(embeddings, clf.weight);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    double* row = logits.row(i);
    for (std::size_t j = 0; j < logits.cols(); ++j) row[j] += clf.bias[j];
  }
  return logits;
}

// Per-layer forward caches kept for backpropagation.
struct LayerCache {
  Matrix input;                   // H_l
  std::vector<Matrix> projected;  // B_j = H_l W_j
  std::vector<Matrix> pre_act;    // Z_j = adj^j B_j
};

Matrix forward_cached(const Matrix& features, const AdjacencyPowers& powers,
                      const MixhopNet& net, std::vector<LayerCache>* caches) {
  Matrix h = features;
  for (const auto& layer : net.layers) {
    LayerCache cache;
    if (caches) cache.input = h;
    std::vector<Matrix> blocks;
    blocks.reserve(layer.powers.size());
    for (std::size_t p = 0; p < layer.powers.size(); ++p) {
      Matrix b = matmul(h, layer.weights[p]);
      Matrix z = powers.apply(layer.powers[p], b);
      blocks.push_back(apply_activation(z, layer.activation));
      if (caches) {
        cache.projected.push_back(std::move(b));
        cache.pre_act.push_back(std::move(z));
      }
    }
    h = hconcat(blocks);
    if (caches) caches->push_back(std::move(cache));
  }
  return h;
}

}  // namespace

GcnOutput gcn_forward(const Matrix& features, const AdjacencyPowers& powers,
                      const MixhopNet& net) {
  if (net.layers.empty()) throw ConfigError("gcn_forward: empty net");
  if (features.cols() != net.in_dim()) {
    throw DimensionError("gcn_forward: feature dim mismatch");
  }
  GcnOutput out;
  out.embeddings = forward_cached(features, powers, net, nullptr);
  if (out.embeddings.cols() != net.classifier.weight.rows()) {
    throw DimensionError("gcn_forward: classifier dim mismatch");
  }
  out.probs = softmax_rows(classifier_logits(out.embeddings, net.classifier));
  return out;
}

GcnOutput gcn_forward(const Matrix& features, const NormalizedAdjacency& adj,
                      const MixhopNet& net) {
  AdjacencyPowers powers(adj, max_net_power(net));
  return gcn_forward(features, powers, net);
}

CrossEntropyResult cross_entropy(
    const Matrix& probs, const std::vector<std::optional<int>>& labels) {
  if (labels.size() != probs.rows()) {
    throw DimensionError("cross_entropy: label count != row count");
  }
  std::size_t n_labeled = 0;
  for (const auto& y : labels) {
    if (!y) continue;
    if (*y < 0 || static_cast<std::size_t>(*y) >= probs.cols()) {
      throw LabelError("cross_entropy: label out of range");
    }
    ++n_labeled;
  }
  if (n_labeled == 0) throw LabelError("cross_entropy: no labeled rows");

  CrossEntropyResult result;
  result.grad_logits = Matrix(probs.rows(), probs.cols());
  const double inv = 1.0 / static_cast<double>(n_labeled);
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    if (!labels[i]) continue;
    const int y = *labels[i];
    result.loss += -std::log(probs(i, y));
    double* grow = result.grad_logits.row(i);
    const double* prow = probs.row(i);
    for (std::size_t j = 0; j < probs.cols(); ++j) {
      grow[j] = (prow[j] - (static_cast<int>(j) == y ? 1.0 : 0.0)) * inv;
    }
  }
  result.loss *= inv;
  return result;
}

double gcn_loss_and_gradients(const Matrix& features,
                              const AdjacencyPowers& powers,
                              const std::vector<std::optional<int>>& labels,
                              const MixhopNet& net, NetGradients* grads) {
  std::vector<LayerCache> caches;
  Matrix embeddings =
      forward_cached(features, powers, net, grads ? &caches : nullptr);
  Matrix probs = softmax_rows(classifier_logits(embeddings, net.classifier));
  CrossEntropyResult ce = cross_entropy(probs, labels);
  if (!grads) return ce.loss;

  grads->layer_weights.assign(net.layers.size(), {});
  grads->classifier_weight = matmul(transpose(embeddings), ce.grad_logits);
  grads->classifier_bias.assign(net.n_classes(), 0.0);
  for (std::size_t i = 0; i < ce.grad_logits.rows(); ++i) {
    const double* row = ce.grad_logits.row(i);
    for (std::size_t j = 0; j < ce.grad_logits.cols(); ++j) {
      grads->classifier_bias[j] += row[j];
    }
  }

  // d(loss)/d(embeddings), then walk the layers backwards.
  Matrix dh = matmul(ce.grad_logits, transpose(net.classifier.weight));
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const auto& layer = net.layers[li];
    const auto& cache = caches[li];
    const std::size_t hidden = layer.hidden_dim();
    Matrix dinput(cache.input.rows(), cache.input.cols());
    auto& wgrads = grads->layer_weights[li];
    wgrads.resize(layer.powers.size());

    for (std::size_t p = 0; p < layer.powers.size(); ++p) {
      Matrix dz = slice_cols(dh, p * hidden, hidden);
      if (layer.activation == Activation::Relu) {
        const auto& z = cache.pre_act[p];
        for (std::size_t idx = 0; idx < dz.data().size(); ++idx) {
          if (z.data()[idx] <= 0.0) dz.data()[idx] = 0.0;
        }
      }
      // adj^j is symmetric, so the transpose propagation reuses apply().
      Matrix db = powers.apply(layer.powers[p], dz);
      wgrads[p] = matmul(transpose(cache.input), db);
      add_inplace(dinput, matmul(db, transpose(layer.weights[p])));
    }
    dh = std::move(dinput);
  }
  return ce.loss;
}

TrainResult train_gcn(const Matrix& features, const NormalizedAdjacency& adj,
                      const std::vector<std::optional<int>>& labels,
                      const TrainConfig& cfg) {
  if (features.rows() != adj.size()) {
    throw DimensionError("train_gcn: feature rows != graph size");
  }
  if (labels.size() != features.rows()) {
    throw DimensionError("train_gcn: label count != node count");
  }
  if (cfg.epochs < 0) throw ConfigError("train_gcn: negative epoch count");
  if (cfg.learning_rate <= 0.0) {
    throw ConfigError("train_gcn: learning rate must be > 0");
  }

  int max_label = -1;
  std::size_t distinct = 0;
  std::vector<char> seen;
  for (const auto& y : labels) {
    if (!y) continue;
    if (*y < 0) throw LabelError("train_gcn: negative label");
    if (*y > max_label) {
      max_label = *y;
      seen.resize(static_cast<std::size_t>(max_label) + 1, 0);
    }
    if (!seen[*y]) {
      seen[*y] = 1;
      ++distinct;
    }
  }
  if (distinct < 2) {
    throw LabelError("train_gcn: need at least 2 classes among labeled nodes");
  }

  TrainResult result;
  result.net = init_mixhop_net(features.cols(),
                               static_cast<std::size_t>(max_label) + 1,
                               cfg.net, cfg.seed);
  AdjacencyPowers powers(adj, max_net_power(result.net));

  NetGradients grads;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double loss =
        gcn_loss_and_gradients(features, powers, labels, result.net, &grads);
    if (!std::isfinite(loss)) {
      throw TrainingDivergedError(
          epoch, "train_gcn: non-finite loss at epoch " +
                     std::to_string(epoch));
    }
    result.loss_history.push_back(loss);

    for (std::size_t li = 0; li < result.net.layers.size(); ++li) {
      auto& layer = result.net.layers[li];
      for (std::size_t p = 0; p < layer.weights.size(); ++p) {
        axpy_inplace(layer.weights[p], -cfg.learning_rate,
                     grads.layer_weights[li][p]);
      }
    }
    axpy_inplace(result.net.classifier.weight, -cfg.learning_rate,
                 grads.classifier_weight);
    for (std::size_t j = 0; j < result.net.classifier.bias.size(); ++j) {
      result.net.classifier.bias[j] -=
          cfg.learning_rate * grads.classifier_bias[j];
    }
  }
  return result;
}

Matrix extract_updated_features(const MixhopNet& net, const Matrix& features,
                                const AdjacencyPowers& powers) {
  Matrix h = forward_cached(features, powers, net, nullptr);
  for (std::size_t i = 0; i < h.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < h.cols(); ++j) s += h(i, j) * h(i, j);
    if (s == 0.0) continue;
    const double inv = 1.0 / std::sqrt(s);
    for (std::size_t j = 0; j < h.cols(); ++j) h(i, j) *= inv;
  }
  return h;
}

Matrix extract_updated_features(const MixhopNet& net, const Matrix& features,
                                const NormalizedAdjacency& adj) {
  AdjacencyPowers powers(adj, max_net_power(net));
  return extract_updated_features(net, features, powers);
}

double labeled_accuracy(const Matrix& probs,
                        const std::vector<std::optional<int>>& labels) {
  std::size_t n_labeled = 0, correct = 0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    if (!labels[i]) continue;
    ++n_labeled;
    std::size_t best = 0;
    for (std::size_t j = 1; j < probs.cols(); ++j) {
      if (probs(i, j) > probs(i, best)) best = j;
    }
    if (static_cast<int>(best) == *labels[i]) ++correct;
  }
  if (n_labeled == 0) throw LabelError("labeled_accuracy: no labeled rows");
  return static_cast<double>(correct) / static_cast<double>(n_labeled);
}

namespace {
constexpr char kNetMagic[4] = {'U', 'D', 'G', 'N'};
constexpr std::uint32_t kNetVersion = 1;
}  // namespace

void save_net(const MixhopNet& net, const std::filesystem::path& path) {
  detail::BinaryWriter w(path.string());
  w.bytes(kNetMagic, 4);
  w.u32(kNetVersion);
  w.u32(static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& layer : net.layers) {
    w.u32(static_cast<std::uint32_t>(layer.powers.size()));
    for (int p : layer.powers) w.u32(static_cast<std::uint32_t>(p));
    w.u32(static_cast<std::uint32_t>(layer.in_dim()));
    w.u32(static_cast<std::uint32_t>(layer.hidden_dim()));
    w.u8(layer.activation == Activation::Relu ? 1 : 0);
    for (const auto& weight : layer.weights) {
      for (double x : weight.data()) w.f64(x);
    }
  }
  w.u32(static_cast<std::uint32_t>(net.classifier.weight.rows()));
  w.u32(static_cast<std::uint32_t>(net.n_classes()));
  for (double x : net.classifier.weight.data()) w.f64(x);
  for (double x : net.classifier.bias) w.f64(x);
  w.close();
}

MixhopNet load_net(const std::filesystem::path& path) {
  detail::BinaryReader r(path.string());
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kNetMagic, 4) != 0) {
    throw FormatError("'" + path.string() + "': bad magic, not a net file");
  }
  const std::uint32_t version = r.u32();
  if (version != kNetVersion) {
    throw FormatError("'" + path.string() + "': unsupported net version " +
                      std::to_string(version));
  }
  MixhopNet net;
  const std::uint32_t n_layers = r.u32();
  for (std::uint32_t li = 0; li < n_layers; ++li) {
    MixhopLayer layer;
    const std::uint32_t n_powers = r.u32();
    for (std::uint32_t p = 0; p < n_powers; ++p) {
      layer.powers.push_back(static_cast<int>(r.u32()));
    }
    const std::uint32_t in_dim = r.u32();
    const std::uint32_t hidden = r.u32();
    layer.activation = r.u8() ? Activation::Relu : Activation::Identity;
    for (std::uint32_t p = 0; p < n_powers; ++p) {
      Matrix weight(in_dim, hidden);
      for (auto& x : weight.data()) x = r.f64();
      layer.weights.push_back(std::move(weight));
    }
    validate_powers(layer.powers);
    net.layers.push_back(std::move(layer));
  }
  const std::uint32_t clf_in = r.u32();
  const std::uint32_t n_classes = r.u32();
  net.classifier.weight = Matrix(clf_in, n_classes);
  for (auto& x : net.classifier.weight.data()) x = r.f64();
  net.classifier.bias.resize(n_classes);
  for (auto& x : net.classifier.bias) x = r.f64();
  return net;
}

}  // namespace udg
