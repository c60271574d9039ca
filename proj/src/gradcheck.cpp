#include "udg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "udg/graph.hpp"
#include "udg/losses.hpp"
#include "udg/mixhop.hpp"
#include "udg/rng.hpp"
#include "udg/synth.hpp"

namespace udg {

double gradient_rel_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1.0});
  return std::abs(analytic - numeric) / denom;
}

double central_difference(double* param, const std::function<double()>& eval,
                          double step) {
  const double saved = *param;
  *param = saved + step;
  const double up = eval();
  *param = saved - step;
  const double down = eval();
  *param = saved;
  return (up - down) / (2.0 * step);
}

GradCheckReport gradcheck_oim(std::uint64_t seed) {
  GradCheckReport report;
  report.name = "oim_loss";

  Rng rng(seed);
  const std::size_t n_ids = 6, dim = 8, batch_size = 5;
  OimBank bank = OimBank::random(n_ids, dim, 1.0 / 30.0, 0.5, seed + 1);

  Matrix batch(batch_size, dim);
  std::vector<int> labels;
  for (std::size_t i = 0; i < batch_size; ++i) {
    auto v = rng.normal_vector(dim);
    l2_normalize_inplace(v);
    std::copy(v.begin(), v.end(), batch.row(i));
    labels.push_back(static_cast<int>(rng.next_below(n_ids)));
  }

  const OimResult analytic = oim_loss(batch, labels, bank);
  for (std::size_t i = 0; i < batch_size; ++i) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double numeric = central_difference(&batch.row(i)[d], [&] {
        return oim_loss(batch, labels, bank).loss;
      });
      report.max_rel_error = std::max(
          report.max_rel_error,
          gradient_rel_error(analytic.grad(i, d), numeric));
      ++report.n_parameters;
    }
  }
  report.pass = report.max_rel_error < kGradCheckTolerance;
  return report;
}

namespace {

// One triplet configuration, checked for all three inputs.
void check_triplet_case(std::vector<double> a, std::vector<double> p,
                        std::vector<double> n, const TripletConfig& cfg,
                        bool expect_active, GradCheckReport& report) {
  const double dp = pair_distance(a, p, cfg.distance);
  const double dn = pair_distance(a, n, cfg.distance);
  const double hinge = cfg.margin + dp - dn;
  // Cases are constructed to sit at least 1e-2 from the hinge boundary.
  if (expect_active ? hinge < 1e-2 : hinge > -1e-2) {
    throw ConfigError("gradcheck_triplet: case too close to hinge boundary");
  }

  const TripletResult analytic = triplet_loss(a, p, n, cfg);
  auto eval = [&] { return triplet_loss(a, p, n, cfg).loss; };
  std::vector<double>* inputs[3] = {&a, &p, &n};
  const std::vector<double>* grads[3] = {&analytic.grad_anchor,
                                         &analytic.grad_positive,
                                         &analytic.grad_negative};
  for (int which = 0; which < 3; ++which) {
    for (std::size_t d = 0; d < a.size(); ++d) {
      const double numeric = central_difference(&(*inputs[which])[d], eval);
      report.max_rel_error =
          std::max(report.max_rel_error,
                   gradient_rel_error((*grads[which])[d], numeric));
      ++report.n_parameters;
    }
  }
}

}  // namespace

GradCheckReport gradcheck_triplet(std::uint64_t seed) {
  GradCheckReport report;
  report.name = "triplet_loss";

  Rng rng(seed);
  const std::size_t dim = 6;
  for (DistanceKind kind :
       {DistanceKind::Euclidean, DistanceKind::OneMinusCosine}) {
    auto anchor = rng.normal_vector(dim);
    l2_normalize_inplace(anchor);
    auto near = anchor;
    for (auto& x : near) x += 0.05 * rng.normal();
    l2_normalize_inplace(near);
    // Orthogonalize so the far vector sits at a known large distance.
    auto far = rng.normal_vector(dim);
    const double proj = dot(far, anchor);
    for (std::size_t d = 0; d < dim; ++d) far[d] -= proj * anchor[d];
    l2_normalize_inplace(far);

    // Active hinge: positive far, negative near, generous margin.
    check_triplet_case(anchor, far, near, {0.5, kind}, true, report);
    // Inactive hinge: positive near, negative far, zero margin.
    check_triplet_case(anchor, near, far, {0.0, kind}, false, report);
  }
  report.pass = report.max_rel_error < kGradCheckTolerance;
  return report;
}

GradCheckReport gradcheck_net(std::uint64_t seed) {
  GradCheckReport report;
  report.name = "mixhop_net";

  // Small labeled scenario for a well-conditioned graph.
  ScenarioConfig scfg;
  scfg.n_identities = 5;
  scfg.clothes_per_identity = 2;
  scfg.samples_per_clothing = 3;
  scfg.body_dim = 6;
  scfg.head_dim = 4;
  scfg.clothing_confusion = 0.0;
  scfg.head_missing_rate = 0.0;
  scfg.train_fraction = 0.6;
  scfg.seed = seed;
  Scenario scenario = generate_scenario(scfg);
  const EmbeddingSet& set = scenario.train;  // 18 nodes

  KnnGraph graph = build_knn_graph(set, Channel::Body, 3,
                                   Metric::OneMinusCosine);
  NormalizedAdjacency adj = normalize_adjacency(graph);

  Matrix features(set.size(), set.body_dim());
  std::vector<std::optional<int>> labels;
  for (std::size_t i = 0; i < set.size(); ++i) {
    std::copy(set[i].body.begin(), set[i].body.end(), features.row(i));
    labels.push_back(set[i].label);
  }

  MixhopConfig mcfg;
  mcfg.depth = 3;
  mcfg.powers = {0, 1, 2};
  mcfg.hidden_width = 4;
  MixhopNet net = init_mixhop_net(set.body_dim(), 3, mcfg, seed + 7);
  AdjacencyPowers powers(adj, 2);

  // Keep every ReLU pre-activation at least 1e-3 from zero so the kink
  // cannot sit inside a finite-difference interval; nudge the seed if the
  // random draw lands too close.
  for (std::uint64_t attempt = 0; attempt < 32; ++attempt) {
    bool safe = true;
    Matrix h = features;
    for (const auto& layer : net.layers) {
      std::vector<Matrix> blocks;
      for (std::size_t p = 0; p < layer.powers.size() && safe; ++p) {
        Matrix z = powers.apply(layer.powers[p], matmul(h, layer.weights[p]));
        if (layer.activation == Activation::Relu) {
          for (double x : z.data()) {
            if (std::abs(x) < 1e-3) {
              safe = false;
              break;
            }
          }
        }
        Matrix a = z;
        if (layer.activation == Activation::Relu) {
          for (auto& x : a.data()) x = x > 0.0 ? x : 0.0;
        }
        blocks.push_back(std::move(a));
      }
      if (!safe) break;
      h = hconcat(blocks);
    }
    if (safe) break;
    net = init_mixhop_net(set.body_dim(), 3, mcfg, seed + 8 + attempt);
  }

  NetGradients grads;
  gcn_loss_and_gradients(features, powers, labels, net, &grads);
  auto eval = [&] {
    return gcn_loss_and_gradients(features, powers, labels, net, nullptr);
  };

  auto check_matrix = [&](Matrix& param, const Matrix& grad) {
    for (std::size_t idx = 0; idx < param.data().size(); ++idx) {
      const double numeric = central_difference(&param.data()[idx], eval);
      report.max_rel_error = std::max(
          report.max_rel_error, gradient_rel_error(grad.data()[idx], numeric));
      ++report.n_parameters;
    }
  };

  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    for (std::size_t p = 0; p < net.layers[li].weights.size(); ++p) {
      check_matrix(net.layers[li].weights[p], grads.layer_weights[li][p]);
    }
  }
  check_matrix(net.classifier.weight, grads.classifier_weight);
  for (std::size_t j = 0; j < net.classifier.bias.size(); ++j) {
    const double numeric = central_difference(&net.classifier.bias[j], eval);
    report.max_rel_error =
        std::max(report.max_rel_error,
                 gradient_rel_error(grads.classifier_bias[j], numeric));
    ++report.n_parameters;
  }
  report.pass = report.max_rel_error < kGradCheckTolerance;
  return report;
}

std::vector<GradCheckReport> run_all_gradchecks(std::uint64_t seed) {
  return {gradcheck_oim(seed), gradcheck_triplet(seed), gradcheck_net(seed)};
}

}  // namespace udg
