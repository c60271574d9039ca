#include "udg/synth.hpp"

#include <string>

#include "udg/rng.hpp"

namespace udg {

void ScenarioConfig::validate() const {
  if (n_identities < 1 || clothes_per_identity < 1 ||
      samples_per_clothing < 1 || body_dim < 1 || head_dim < 1) {
    throw ConfigError("scenario: all counts must be >= 1");
  }
  if (body_noise_sigma < 0.0 || head_noise_sigma < 0.0) {
    throw ConfigError("scenario: noise sigmas must be >= 0");
  }
  if (clothing_confusion < 0.0 || clothing_confusion > 1.0 ||
      head_missing_rate < 0.0 || head_missing_rate > 1.0) {
    throw ConfigError("scenario: rates must lie in [0,1]");
  }
  if (train_fraction <= 0.0 || train_fraction >= 1.0) {
    throw ConfigError("scenario: train_fraction must lie in (0,1)");
  }
  // One query per (identity, clothing): the gallery keeps
  // samples_per_clothing - 1 same-clothing positives and
  // (clothes - 1) * (samples_per_clothing - 1) cloth-changed positives.
  if (samples_per_clothing < 3) {
    throw ConfigError(
        "scenario: need samples_per_clothing >= 3 for two same-clothing "
        "gallery positives per query");
  }
  if ((clothes_per_identity - 1) * (samples_per_clothing - 1) < 2) {
    throw ConfigError(
        "scenario: need (clothes-1)*(samples-1) >= 2 for two cloth-changed "
        "gallery positives per query");
  }
}

namespace {

std::vector<double> random_unit(Rng& rng, int dim) {
  auto v = rng.normal_vector(static_cast<std::size_t>(dim));
  l2_normalize_inplace(v);
  return v;
}

std::vector<double> noisy_sample(Rng& rng, const std::vector<double>& proto,
                                 double sigma) {
  if (sigma == 0.0) return proto;  // prototype is already unit
  std::vector<double> v(proto.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = proto[i] + sigma * rng.normal();
  }
  l2_normalize_inplace(v);
  return v;
}

}  // namespace

Scenario generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  const int n_train =
      std::max(1, static_cast<int>(cfg.n_identities * cfg.train_fraction));
  if (n_train >= cfg.n_identities) {
    throw ConfigError("scenario: split leaves no test identities");
  }

  // Identity head prototypes.
  std::vector<std::vector<double>> head_protos;
  head_protos.reserve(cfg.n_identities);
  for (int i = 0; i < cfg.n_identities; ++i) {
    head_protos.push_back(random_unit(rng, cfg.head_dim));
  }

  // Body prototypes per (identity, clothing); with probability
  // clothing_confusion a slot reuses an existing prototype of another
  // identity, sharing its clothing id.
  struct BodyProto {
    std::vector<double> vec;
    int identity;
    int clothing_gid;
  };
  std::vector<BodyProto> pool;
  std::vector<std::vector<int>> proto_of(cfg.n_identities,
                                         std::vector<int>(cfg.clothes_per_identity));
  int next_gid = 0;
  for (int i = 0; i < cfg.n_identities; ++i) {
    for (int c = 0; c < cfg.clothes_per_identity; ++c) {
      const double u = rng.next_double();
      std::vector<int> foreign;
      if (u < cfg.clothing_confusion) {
        for (std::size_t p = 0; p < pool.size(); ++p) {
          if (pool[p].identity != i) foreign.push_back(static_cast<int>(p));
        }
      }
      if (!foreign.empty()) {
        proto_of[i][c] =
            foreign[rng.next_below(foreign.size())];
      } else {
        pool.push_back({random_unit(rng, cfg.body_dim), i, next_gid++});
        proto_of[i][c] = static_cast<int>(pool.size()) - 1;
      }
    }
  }

  Scenario out;
  out.train = EmbeddingSet(cfg.body_dim, cfg.head_dim);
  out.query = EmbeddingSet(cfg.body_dim, cfg.head_dim);
  out.gallery = EmbeddingSet(cfg.body_dim, cfg.head_dim);

  std::uint64_t next_id = 0;
  for (int i = 0; i < cfg.n_identities; ++i) {
    const bool is_train = i < n_train;
    for (int c = 0; c < cfg.clothes_per_identity; ++c) {
      const BodyProto& proto = pool[proto_of[i][c]];
      for (int s = 0; s < cfg.samples_per_clothing; ++s) {
        EmbeddingRecord rec;
        rec.record_id = next_id;
        rec.frame_id = next_id;  // one frame per synthetic sample
        ++next_id;
        rec.label = i;
        rec.clothing_id = proto.clothing_gid;
        rec.score = 1.0;
        rec.body = noisy_sample(rng, proto.vec, cfg.body_noise_sigma);
        auto head = noisy_sample(rng, head_protos[i], cfg.head_noise_sigma);
        if (rng.next_double() >= cfg.head_missing_rate) {
          rec.head = std::move(head);
        }
        if (is_train) {
          out.train.add(std::move(rec));
        } else if (s == 0) {
          out.query.add(std::move(rec));
        } else {
          out.gallery.add(std::move(rec));
        }
      }
    }
  }
  return out;
}

double neighbor_purity(const KnnGraph& g,
                       const std::vector<std::optional<int>>& labels) {
  if (static_cast<int>(labels.size()) != g.n_nodes) {
    throw DimensionError("neighbor_purity: label count != node count");
  }
  std::size_t total = 0, pure = 0;
  for (int i = 0; i < g.n_nodes; ++i) {
    if (!labels[i]) continue;
    for (int j : g.adj[i]) {
      if (!labels[j]) continue;
      ++total;
      if (*labels[i] == *labels[j]) ++pure;
    }
  }
  if (total == 0) {
    throw DegenerateGraphError("neighbor_purity: no labeled edges");
  }
  return static_cast<double>(pure) / static_cast<double>(total);
}

std::vector<std::optional<int>> labels_of(const EmbeddingSet& set) {
  std::vector<std::optional<int>> labels;
  labels.reserve(set.size());
  for (const auto& rec : set.records()) labels.push_back(rec.label);
  return labels;
}

}  // namespace udg
