#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "udg/errors.hpp"
#include "udg/matrix.hpp"

namespace udg {

// Which feature vector of a record an operation works on.
enum class Channel { Body, Head };

std::string to_string(Channel c);

// Axis-aligned pixel rectangle, x1 < x2 and y1 < y2.
struct Box {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
  bool valid() const { return x1 < x2 && y1 < y2; }
  double area() const { return (x2 - x1) * (y2 - y1); }
};

// One detected person. The head vector is genuinely optional: a record with
// no head never contributes to head-channel similarities or head graphs.
struct EmbeddingRecord {
  std::uint64_t record_id = 0;
  std::uint64_t frame_id = 0;
  std::vector<double> body;
  std::optional<std::vector<double>> head;
  std::optional<int> label;
  std::optional<int> clothing_id;
  std::optional<Box> box;
  double score = 1.0;

  bool has_head() const { return head.has_value(); }
};

// Ordered collection of records. The insertion order is stable and defines
// the node indices used by every graph built over the set.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  EmbeddingSet(std::size_t body_dim, std::size_t head_dim)
      : body_dim_(body_dim), head_dim_(head_dim) {}

  // Validates dimensions, id uniqueness, score range, box and label
  // invariants, and finiteness of all components.
  void add(EmbeddingRecord rec);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::size_t body_dim() const { return body_dim_; }
  std::size_t head_dim() const { return head_dim_; }

  const EmbeddingRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<EmbeddingRecord>& records() const { return records_; }

  bool has_channel(std::size_t i, Channel c) const;
  const std::vector<double>& channel_vector(std::size_t i, Channel c) const;

  std::optional<std::size_t> index_of(std::uint64_t record_id) const;

  // L2-normalizes every body and head vector in place.
  void normalize_all();

  // New set containing this set's records followed by other's. Record ids
  // must stay unique across the union.
  EmbeddingSet concat(const EmbeddingSet& other) const;

 private:
  std::size_t body_dim_ = 0;
  std::size_t head_dim_ = 0;
  std::vector<EmbeddingRecord> records_;
  std::unordered_map<std::uint64_t, std::size_t> id_to_index_;
};

// Query-by-gallery score matrix. Entries can be marked missing (head absent
// on either side); a missing entry's value slot is meaningless and must not
// be read as a score.
struct SimilarityMatrix {
  std::vector<std::uint64_t> row_ids;
  std::vector<std::uint64_t> col_ids;
  Matrix values;
  std::vector<std::uint8_t> missing;  // row-major, 1 = missing

  std::size_t rows() const { return values.rows(); }
  std::size_t cols() const { return values.cols(); }
  bool is_missing(std::size_t r, std::size_t c) const {
    return missing[r * cols() + c] != 0;
  }
  bool any_missing() const;
};

// Unit-norm copy of v. Direction is preserved; an all-zero input cannot be
// normalized.
std::vector<double> l2_normalize(std::span<const double> v);
void l2_normalize_inplace(std::span<double> v);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

// <a,b> / (|a||b|), in [-1, 1] up to rounding.
double cosine_sim(std::span<const double> a, std::span<const double> b);

// Cosine similarity of the chosen channel between every query row and every
// gallery column. Pairs where either record lacks the channel are marked
// missing rather than scored.
SimilarityMatrix pairwise_similarity(const EmbeddingSet& queries,
                                     const EmbeddingSet& gallery,
                                     Channel channel);

// Same contract, but over raw feature rows (used for updated features that
// live in a Matrix rather than an EmbeddingSet). No entries are missing.
SimilarityMatrix pairwise_similarity(const Matrix& query_rows,
                                     const Matrix& gallery_rows,
                                     std::vector<std::uint64_t> row_ids,
                                     std::vector<std::uint64_t> col_ids);

}  // namespace udg
