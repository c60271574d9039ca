#include "udg/core.hpp"

#include <cmath>

namespace udg {

std::string to_string(Channel c) {
  return c == Channel::Body ? "body" : "head";
}

void EmbeddingSet::add(EmbeddingRecord rec) {
  if (rec.body.size() != body_dim_) {
    throw DimensionError("record " + std::to_string(rec.record_id) +
                         ": body dimension " + std::to_string(rec.body.size()) +
                         " != set body_dim " + std::to_string(body_dim_));
  }
  if (rec.head && rec.head->size() != head_dim_) {
    throw DimensionError("record " + std::to_string(rec.record_id) +
                         ": head dimension " + std::to_string(rec.head->size()) +
                         " != set head_dim " + std::to_string(head_dim_));
  }
  if (id_to_index_.count(rec.record_id)) {
    throw DataError("duplicate record id " + std::to_string(rec.record_id));
  }
  if (rec.label && *rec.label < 0) {
    throw LabelError("record " + std::to_string(rec.record_id) +
                     ": negative label");
  }
  if (rec.box && !rec.box->valid()) {
    throw BoxError("record " + std::to_string(rec.record_id) +
                   ": degenerate box");
  }
  if (!(rec.score >= 0.0 && rec.score <= 1.0)) {
    throw DataError("record " + std::to_string(rec.record_id) +
                    ": score outside [0,1]");
  }
  for (double x : rec.body) {
    if (!std::isfinite(x)) {
      throw DataError("record " + std::to_string(rec.record_id) +
                      ": non-finite body component");
    }
  }
  if (rec.head) {
    for (double x : *rec.head) {
      if (!std::isfinite(x)) {
        throw DataError("record " + std::to_string(rec.record_id) +
                        ": non-finite head component");
      }
    }
  }
  id_to_index_[rec.record_id] = records_.size();
  records_.push_back(std::move(rec));
}

bool EmbeddingSet::has_channel(std::size_t i, Channel c) const {
  return c == Channel::Body || records_[i].head.has_value();
}

const std::vector<double>& EmbeddingSet::channel_vector(std::size_t i,
                                                        Channel c) const {
  if (c == Channel::Body) return records_[i].body;
  if (!records_[i].head) {
    throw DataError("record " + std::to_string(records_[i].record_id) +
                    " has no head vector");
  }
  return *records_[i].head;
}

std::optional<std::size_t> EmbeddingSet::index_of(
    std::uint64_t record_id) const {
  auto it = id_to_index_.find(record_id);
  if (it == id_to_index_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingSet::normalize_all() {
  for (auto& rec : records_) {
    l2_normalize_inplace(rec.body);
    if (rec.head) l2_normalize_inplace(*rec.head);
  }
}

EmbeddingSet EmbeddingSet::concat(const EmbeddingSet& other) const {
  if (body_dim_ != other.body_dim_ || head_dim_ != other.head_dim_) {
    throw DimensionError("concat: dimension mismatch between sets");
  }
  EmbeddingSet out(body_dim_, head_dim_);
  for (const auto& r : records_) out.add(r);
  for (const auto& r : other.records_) out.add(r);
  return out;
}

bool SimilarityMatrix::any_missing() const {
  for (auto m : missing) {
    if (m) return true;
  }
  return false;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> l2_normalize(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  l2_normalize_inplace(out);
  return out;
}

void l2_normalize_inplace(std::span<double> v) {
  const double n = norm(v);
  if (n == 0.0) {
    throw NormalizationError("cannot normalize an all-zero vector");
  }
  for (auto& x : v) x /= n;
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine_sim: dimension mismatch");
  }
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) {
    throw NormalizationError("cosine_sim: zero vector");
  }
  return dot(a, b) / (na * nb);
}

SimilarityMatrix pairwise_similarity(const EmbeddingSet& queries,
                                     const EmbeddingSet& gallery,
                                     Channel channel) {
  if (queries.empty() || gallery.empty()) {
    throw EmptySetError("pairwise_similarity: empty query or gallery set");
  }
  const std::size_t dim = channel == Channel::Body ? queries.body_dim()
                                                   : queries.head_dim();
  const std::size_t gdim = channel == Channel::Body ? gallery.body_dim()
                                                    : gallery.head_dim();
  if (dim != gdim) {
    throw DimensionError("pairwise_similarity: channel dimension mismatch");
  }

  SimilarityMatrix sim;
  sim.values = Matrix(queries.size(), gallery.size());
  sim.missing.assign(queries.size() * gallery.size(), 0);
  sim.row_ids.reserve(queries.size());
  sim.col_ids.reserve(gallery.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    sim.row_ids.push_back(queries[i].record_id);
  }
  for (std::size_t j = 0; j < gallery.size(); ++j) {
    sim.col_ids.push_back(gallery[j].record_id);
  }

  for (std::size_t i = 0; i < queries.size(); ++i) {
    const bool qi = queries.has_channel(i, channel);
    for (std::size_t j = 0; j < gallery.size(); ++j) {
      if (!qi || !gallery.has_channel(j, channel)) {
        sim.missing[i * gallery.size() + j] = 1;
        continue;
      }
      sim.values(i, j) = cosine_sim(queries.channel_vector(i, channel),
                                    gallery.channel_vector(j, channel));
    }
  }
  return sim;
}

SimilarityMatrix pairwise_similarity(const Matrix& query_rows,
                                     const Matrix& gallery_rows,
                                     std::vector<std::uint64_t> row_ids,
                                     std::vector<std::uint64_t> col_ids) {
  if (query_rows.rows() == 0 || gallery_rows.rows() == 0) {
    throw EmptySetError("pairwise_similarity: empty feature matrix");
  }
  if (query_rows.cols() != gallery_rows.cols()) {
    throw DimensionError("pairwise_similarity: feature dimension mismatch");
  }
  if (row_ids.size() != query_rows.rows() ||
      col_ids.size() != gallery_rows.rows()) {
    throw DimensionError("pairwise_similarity: id list length mismatch");
  }
  SimilarityMatrix sim;
  sim.row_ids = std::move(row_ids);
  sim.col_ids = std::move(col_ids);
  sim.values = Matrix(query_rows.rows(), gallery_rows.rows());
  sim.missing.assign(query_rows.rows() * gallery_rows.rows(), 0);
  const std::size_t d = query_rows.cols();
  for (std::size_t i = 0; i < query_rows.rows(); ++i) {
    const std::span<const double> q(query_rows.row(i), d);
    for (std::size_t j = 0; j < gallery_rows.rows(); ++j) {
      sim.values(i, j) =
          cosine_sim(q, std::span<const double>(gallery_rows.row(j), d));
    }
  }
  return sim;
}

}  // namespace udg
