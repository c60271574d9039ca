#pragma once

// Test-only helpers: independent oracles (exhaustive k-NN search, brute-force
// retrieval metrics), a Jacobi eigensolver for spectrum checks, and small
// builders. Everything here deliberately avoids the library's own
// implementation paths so the comparisons stay meaningful.

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "udg/core.hpp"
#include "udg/eval.hpp"
#include "udg/graph.hpp"
#include "udg/matrix.hpp"
#include "udg/rng.hpp"

namespace udg::test {

inline EmbeddingSet make_set(const std::vector<std::vector<double>>& bodies,
                             std::size_t head_dim = 0) {
  EmbeddingSet set(bodies.empty() ? 0 : bodies.front().size(), head_dim);
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    EmbeddingRecord rec;
    rec.record_id = i;
    rec.frame_id = i;
    rec.body = bodies[i];
    set.add(std::move(rec));
  }
  return set;
}

// Exhaustive k-NN: every pairwise distance, full sort per node, ties to the
// lower index. Distances use the same naive ascending-index formulas as the
// library so exact edge-set equality is well defined.
inline std::vector<std::pair<int, int>> knn_oracle(const EmbeddingSet& set,
                                                   Channel channel, int k,
                                                   Metric metric) {
  const int n = static_cast<int>(set.size());
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    if (!set.has_channel(i, channel)) continue;
    const auto& vi = set.channel_vector(i, channel);
    std::vector<std::pair<double, int>> cands;
    for (int j = 0; j < n; ++j) {
      if (j == i || !set.has_channel(j, channel)) continue;
      const auto& vj = set.channel_vector(j, channel);
      double d = 0.0;
      if (metric == Metric::Euclidean) {
        for (std::size_t t = 0; t < vi.size(); ++t) {
          const double diff = vi[t] - vj[t];
          d += diff * diff;
        }
        d = std::sqrt(d);
      } else {
        double dot = 0.0, ni = 0.0, nj = 0.0;
        for (std::size_t t = 0; t < vi.size(); ++t) {
          dot += vi[t] * vj[t];
          ni += vi[t] * vi[t];
          nj += vj[t] * vj[t];
        }
        d = 1.0 - dot / (std::sqrt(ni) * std::sqrt(nj));
      }
      cands.emplace_back(d, j);
    }
    std::sort(cands.begin(), cands.end());
    const std::size_t take =
        std::min<std::size_t>(static_cast<std::size_t>(k), cands.size());
    std::vector<int> nbrs;
    for (std::size_t t = 0; t < take; ++t) nbrs.push_back(cands[t].second);
    std::sort(nbrs.begin(), nbrs.end());
    for (int j : nbrs) edges.emplace_back(i, j);
  }
  return edges;
}

// Brute-force average precision: recount the prefix at every rank.
inline double retrieval_ap_oracle(const std::vector<std::uint8_t>& flags) {
  std::size_t total_pos = 0;
  for (auto f : flags) total_pos += f;
  double sum = 0.0;
  for (std::size_t r = 0; r < flags.size(); ++r) {
    if (!flags[r]) continue;
    std::size_t hits = 0;
    for (std::size_t t = 0; t <= r; ++t) hits += flags[t];
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return sum / static_cast<double>(total_pos);
}

struct MapCmcOracle {
  double map = 0.0;
  std::vector<double> rank_at;
  std::size_t excluded = 0;
};

inline MapCmcOracle map_cmc_oracle(
    const std::vector<std::vector<std::uint8_t>>& all_flags,
    const std::vector<int>& ks) {
  MapCmcOracle out;
  out.rank_at.assign(ks.size(), 0.0);
  std::size_t valid = 0;
  for (const auto& flags : all_flags) {
    std::size_t total_pos = 0;
    for (auto f : flags) total_pos += f;
    if (total_pos == 0) {
      ++out.excluded;
      continue;
    }
    ++valid;
    out.map += retrieval_ap_oracle(flags);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      bool hit = false;
      for (int r = 0; r < ks[i] && r < static_cast<int>(flags.size()); ++r) {
        if (flags[r]) hit = true;
      }
      if (hit) out.rank_at[i] += 1.0;
    }
  }
  out.map /= static_cast<double>(valid);
  for (auto& x : out.rank_at) x /= static_cast<double>(valid);
  return out;
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> jacobi_eigenvalues(Matrix a) {
  const std::size_t n = a.rows();
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    }
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a(p, i), aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

// Random embedding set with unit-norm bodies and (optionally) heads on a
// subset of records.
inline EmbeddingSet random_set(std::size_t n, std::size_t body_dim,
                               std::size_t head_dim, double head_rate,
                               std::uint64_t seed) {
  EmbeddingSet set(body_dim, head_dim);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    EmbeddingRecord rec;
    rec.record_id = i;
    rec.frame_id = i;
    rec.body = rng.normal_vector(body_dim);
    l2_normalize_inplace(rec.body);
    rec.label = static_cast<int>(rng.next_below(5));
    if (head_dim > 0 && rng.next_double() < head_rate) {
      auto head = rng.normal_vector(head_dim);
      l2_normalize_inplace(head);
      rec.head = std::move(head);
    }
    set.add(std::move(rec));
  }
  return set;
}

}  // namespace udg::test
