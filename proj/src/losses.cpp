#include "udg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "udg/rng.hpp"

namespace udg {

OimBank OimBank::random(std::size_t n_identities, std::size_t dim,
                        double temperature, double momentum,
                        std::uint64_t seed) {
  OimBank bank;
  bank.temperature = temperature;
  bank.momentum = momentum;
  bank.centers = Matrix(n_identities, dim);
  Rng rng(seed);
  for (std::size_t i = 0; i < n_identities; ++i) {
    auto v = rng.normal_vector(dim);
    l2_normalize_inplace(v);
    for (std::size_t j = 0; j < dim; ++j) bank.centers(i, j) = v[j];
  }
  bank.validate();
  return bank;
}

void OimBank::validate() const {
  if (temperature <= 0.0) {
    throw ConfigError("OimBank: temperature must be > 0");
  }
  if (momentum < 0.0 || momentum > 1.0) {
    throw ConfigError("OimBank: momentum must lie in [0,1]");
  }
  if (centers.rows() < 2) {
    throw ConfigError("OimBank: need at least 2 identities");
  }
  for (std::size_t i = 0; i < centers.rows(); ++i) {
    const double n =
        norm(std::span<const double>(centers.row(i), centers.cols()));
    if (std::abs(n - 1.0) > 1e-9) {
      throw NormalizationError("OimBank: row " + std::to_string(i) +
                               " is not unit-norm");
    }
  }
}

OimResult oim_loss(const Matrix& batch, const std::vector<int>& labels,
                   const OimBank& bank) {
  bank.validate();
  if (batch.rows() != labels.size()) {
    throw DimensionError("oim_loss: batch/label count mismatch");
  }
  if (batch.rows() == 0) throw EmptySetError("oim_loss: empty batch");
  if (batch.cols() != bank.dim()) {
    throw DimensionError("oim_loss: feature dimension != bank dimension");
  }
  const std::size_t c = bank.num_identities();
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw LabelError("oim_loss: label " + std::to_string(y) +
                       " outside [0," + std::to_string(c) + ")");
    }
  }

  const std::size_t b = batch.rows();
  const double inv_tau = 1.0 / bank.temperature;
  OimResult result;
  result.grad = Matrix(b, batch.cols());
  std::vector<double> logits(c), probs(c);

  for (std::size_t i = 0; i < b; ++i) {
    const std::span<const double> x(batch.row(i), batch.cols());
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      logits[j] =
          dot(std::span<const double>(bank.centers.row(j), bank.dim()), x) *
          inv_tau;
      zmax = std::max(zmax, logits[j]);
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[j] = std::exp(logits[j] - zmax);
      denom += probs[j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[j] /= denom;

    const int y = labels[i];
    result.loss += -(logits[y] - zmax - std::log(denom));

    // d(loss_i)/dx = (1/tau) * sum_j (p_j - [j==y]) v_j, averaged over batch
    double* grow = result.grad.row(i);
    for (std::size_t j = 0; j < c; ++j) {
      const double coeff =
          (probs[j] - (static_cast<int>(j) == y ? 1.0 : 0.0)) * inv_tau /
          static_cast<double>(b);
      const double* vrow = bank.centers.row(j);
      for (std::size_t d = 0; d < batch.cols(); ++d) {
        grow[d] += coeff * vrow[d];
      }
    }
  }
  result.loss /= static_cast<double>(b);
  return result;
}

OimBank oim_update_bank(OimBank bank, const Matrix& batch,
                        const std::vector<int>& labels) {
  bank.validate();
  if (batch.rows() != labels.size()) {
    throw DimensionError("oim_update_bank: batch/label count mismatch");
  }
  if (batch.cols() != bank.dim()) {
    throw DimensionError("oim_update_bank: feature dimension mismatch");
  }
  const std::size_t c = bank.num_identities();
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw LabelError("oim_update_bank: label out of range");
    }
  }
  std::vector<double> merged(bank.dim());
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    const int y = labels[i];
    double* vrow = bank.centers.row(y);
    const double* x = batch.row(i);
    for (std::size_t d = 0; d < bank.dim(); ++d) {
      merged[d] = bank.momentum * vrow[d] + (1.0 - bank.momentum) * x[d];
    }
    l2_normalize_inplace(merged);
    std::copy(merged.begin(), merged.end(), vrow);
  }
  return bank;
}

double pair_distance(std::span<const double> a, std::span<const double> b,
                     DistanceKind kind) {
  if (a.size() != b.size()) {
    throw DimensionError("pair_distance: dimension mismatch");
  }
  if (kind == DistanceKind::Euclidean) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      s += d * d;
    }
    return std::sqrt(s);
  }
  return 1.0 - cosine_sim(a, b);
}

namespace {

// d/da of pair_distance(a, b, kind), accumulated into grad with sign.
void accumulate_distance_grad_a(std::span<const double> a,
                                std::span<const double> b, DistanceKind kind,
                                double sign, std::vector<double>& grad) {
  const std::size_t n = a.size();
  if (kind == DistanceKind::Euclidean) {
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = a[i] - b[i];
      d += t * t;
    }
    d = std::sqrt(d);
    if (d == 0.0) return;  // subgradient 0 at coincident points
    for (std::size_t i = 0; i < n; ++i) {
      grad[i] += sign * (a[i] - b[i]) / d;
    }
    return;
  }
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) {
    throw NormalizationError("triplet distance gradient: zero vector");
  }
  const double ab = dot(a, b);
  // d(1 - cos)/da = cos * a / |a|^2 - b / (|a||b|)
  const double ca = ab / (na * na * na * nb);
  const double cb = 1.0 / (na * nb);
  for (std::size_t i = 0; i < n; ++i) {
    grad[i] += sign * (ca * a[i] - cb * b[i]);
  }
}

// d/db of pair_distance(a, b, kind).
void accumulate_distance_grad_b(std::span<const double> a,
                                std::span<const double> b, DistanceKind kind,
                                double sign, std::vector<double>& grad) {
  accumulate_distance_grad_a(b, a, kind, sign, grad);
}

}  // namespace

TripletResult triplet_loss(std::span<const double> anchor,
                           std::span<const double> positive,
                           std::span<const double> negative,
                           const TripletConfig& cfg) {
  if (anchor.size() != positive.size() || anchor.size() != negative.size()) {
    throw DimensionError("triplet_loss: dimension mismatch");
  }
  if (!std::isfinite(cfg.margin)) {
    throw ConfigError("triplet_loss: margin must be finite");
  }
  TripletResult result;
  result.grad_anchor.assign(anchor.size(), 0.0);
  result.grad_positive.assign(anchor.size(), 0.0);
  result.grad_negative.assign(anchor.size(), 0.0);

  const double dp = pair_distance(anchor, positive, cfg.distance);
  const double dn = pair_distance(anchor, negative, cfg.distance);
  const double hinge = cfg.margin + dp - dn;
  if (hinge <= 0.0) return result;

  result.loss = hinge;
  accumulate_distance_grad_a(anchor, positive, cfg.distance, 1.0,
                             result.grad_anchor);
  accumulate_distance_grad_a(anchor, negative, cfg.distance, -1.0,
                             result.grad_anchor);
  accumulate_distance_grad_b(anchor, positive, cfg.distance, 1.0,
                             result.grad_positive);
  accumulate_distance_grad_b(anchor, negative, cfg.distance, -1.0,
                             result.grad_negative);
  return result;
}

ProjectionTrainResult fit_projection_head(const EmbeddingSet& set,
                                          Channel channel,
                                          const ProjectionTrainConfig& cfg) {
  if (cfg.epochs < 0) throw ConfigError("fit_projection_head: negative epochs");
  if (cfg.batch_size < 2) {
    throw ConfigError("fit_projection_head: batch size must be >= 2");
  }
  if (cfg.learning_rate <= 0.0) {
    throw ConfigError("fit_projection_head: learning rate must be > 0");
  }

  // Labeled records carrying the channel, with labels remapped to
  // contiguous identity classes.
  std::vector<std::size_t> rows;
  std::map<int, int> remap;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (!set[i].label || !set.has_channel(i, channel)) continue;
    rows.push_back(i);
    remap.emplace(*set[i].label, 0);
  }
  if (rows.size() < 2 || remap.size() < 2) {
    throw LabelError("fit_projection_head: need >= 2 labeled identities");
  }
  int next = 0;
  for (auto& [identity, cls] : remap) cls = next++;

  const std::size_t dim =
      channel == Channel::Body ? set.body_dim() : set.head_dim();
  ProjectionTrainResult result;
  result.weight = Matrix::identity(dim);
  result.bias.assign(dim, 0.0);
  result.bank = OimBank::random(remap.size(), dim, cfg.temperature,
                                cfg.momentum, cfg.seed);

  Rng rng(cfg.seed + 1);
  std::vector<std::size_t> order = rows;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Seeded Fisher-Yates shuffle.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.next_below(i)]);
    }
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t b = end - start;
      if (b < 2) break;

      Matrix inputs(b, dim), projected(b, dim);
      std::vector<int> labels(b);
      for (std::size_t r = 0; r < b; ++r) {
        const auto& rec_vec = set.channel_vector(order[start + r], channel);
        labels[r] = remap.at(*set[order[start + r]].label);
        for (std::size_t d = 0; d < dim; ++d) inputs(r, d) = rec_vec[d];
      }
      projected = matmul(inputs, result.weight);
      for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t d = 0; d < dim; ++d) {
          projected(r, d) += result.bias[d];
        }
      }

      OimResult oim = oim_loss(projected, labels, result.bank);
      Matrix dproj = oim.grad;
      double batch_loss = oim.loss;

      const auto triplets =
          mine_batch_hard(projected, labels, cfg.triplet.distance);
      if (!triplets.empty() && cfg.triplet_weight != 0.0) {
        const double scale =
            cfg.triplet_weight / static_cast<double>(triplets.size());
        double triplet_sum = 0.0;
        for (const auto& t : triplets) {
          const std::span<const double> a(projected.row(t.anchor), dim);
          const std::span<const double> p(projected.row(t.positive), dim);
          const std::span<const double> n(projected.row(t.negative), dim);
          TripletResult tr = triplet_loss(a, p, n, cfg.triplet);
          triplet_sum += tr.loss;
          for (std::size_t d = 0; d < dim; ++d) {
            dproj(t.anchor, d) += scale * tr.grad_anchor[d];
            dproj(t.positive, d) += scale * tr.grad_positive[d];
            dproj(t.negative, d) += scale * tr.grad_negative[d];
          }
        }
        batch_loss +=
            cfg.triplet_weight * triplet_sum / static_cast<double>(triplets.size());
      }

      // y = x W + bias: dW = x^T dy, dbias = column sums of dy.
      Matrix dw = matmul(transpose(inputs), dproj);
      axpy_inplace(result.weight, -cfg.learning_rate, dw);
      for (std::size_t d = 0; d < dim; ++d) {
        double g = 0.0;
        for (std::size_t r = 0; r < b; ++r) g += dproj(r, d);
        result.bias[d] -= cfg.learning_rate * g;
      }
      result.bank = oim_update_bank(std::move(result.bank), projected, labels);

      epoch_loss += batch_loss;
      ++n_batches;
    }
    if (n_batches == 0) {
      throw ConfigError("fit_projection_head: no usable batches");
    }
    result.loss_history.push_back(epoch_loss /
                                  static_cast<double>(n_batches));
  }
  return result;
}

std::vector<TripletIndices> mine_batch_hard(const Matrix& batch,
                                            const std::vector<int>& labels,
                                            DistanceKind kind) {
  if (batch.rows() != labels.size()) {
    throw DimensionError("mine_batch_hard: batch/label count mismatch");
  }
  const std::size_t n = batch.rows();
  std::vector<TripletIndices> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> a(batch.row(i), batch.cols());
    double worst_pos = -1.0, best_neg = std::numeric_limits<double>::infinity();
    std::size_t pos_idx = n, neg_idx = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d =
          pair_distance(a, std::span<const double>(batch.row(j), batch.cols()),
                        kind);
      if (labels[j] == labels[i]) {
        if (d > worst_pos) {
          worst_pos = d;
          pos_idx = j;
        }
      } else if (d < best_neg) {
        best_neg = d;
        neg_idx = j;
      }
    }
    if (pos_idx < n && neg_idx < n) {
      out.push_back({i, pos_idx, neg_idx});
    }
  }
  return out;
}

}  // namespace udg
