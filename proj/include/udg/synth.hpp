#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "udg/core.hpp"
#include "udg/graph.hpp"

namespace udg {

// Generator knobs for the synthetic cloth-changing benchmark. Head vectors
// cluster per identity while body vectors cluster per clothing prototype;
// clothing_confusion is the probability that an (identity, clothing) pair
// reuses another identity's body prototype, which is what makes raw body
// similarity unreliable.
struct ScenarioConfig {
  int n_identities = 100;
  int clothes_per_identity = 3;
  int samples_per_clothing = 10;
  int body_dim = 64;
  int head_dim = 32;
  double body_noise_sigma = 0.15;
  double head_noise_sigma = 0.15;
  double clothing_confusion = 0.3;
  double head_missing_rate = 0.3;
  double train_fraction = 0.6;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Scenario {
  EmbeddingSet train;
  EmbeddingSet query;
  EmbeddingSet gallery;
};

// Deterministic in the seed. Identities split disjointly between train and
// test; per test identity one sample of each clothing becomes a query, the
// rest go to the gallery, so every query keeps at least two same-clothing
// and two cloth-changed positives.
Scenario generate_scenario(const ScenarioConfig& cfg);

// Fraction of graph edges whose endpoints share an identity label, over the
// edges with both endpoints labeled.
double neighbor_purity(const KnnGraph& g,
                       const std::vector<std::optional<int>>& labels);

// Convenience: the label column of a set as the optional vector the graph
// and GCN code consume.
std::vector<std::optional<int>> labels_of(const EmbeddingSet& set);

}  // namespace udg
