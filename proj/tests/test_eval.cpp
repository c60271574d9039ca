#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "udg/eval.hpp"
#include "udg/rng.hpp"

using namespace udg;

namespace {

BoxRecord det(std::uint64_t frame, Box box, double score) {
  BoxRecord r;
  r.frame_id = frame;
  r.box = box;
  r.score = score;
  return r;
}

BoxRecord gt(std::uint64_t frame, Box box, int identity = 0) {
  BoxRecord r;
  r.frame_id = frame;
  r.box = box;
  r.identity = identity;
  return r;
}

RankedResult ranked(std::vector<std::uint8_t> flags) {
  RankedResult r;
  r.query_id = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) r.gallery_ids.push_back(i);
  r.relevant = std::move(flags);
  return r;
}

}  // namespace

TEST_CASE("iou worked values") {
  const Box a{0, 0, 10, 10};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, Box{20, 20, 30, 30}) == 0.0);
  CHECK(iou(a, Box{5, 0, 15, 10}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(iou(a, Box{5, 5, 1, 1}), BoxError);
}

TEST_CASE("match_detections greedy rules") {
  const Box b{0, 0, 10, 10};

  SUBCASE("exact hit matches") {
    auto m = match_detections({det(0, b, 0.9)}, {gt(0, b)});
    REQUIRE(m.size() == 1);
    CHECK(m[0] == 0);
  }
  SUBCASE("higher score wins a contested gt") {
    auto m = match_detections({det(0, b, 0.5), det(0, b, 0.9)}, {gt(0, b)});
    CHECK_FALSE(m[0].has_value());
    CHECK(m[1] == 0);
  }
  SUBCASE("below-threshold overlap stays unmatched") {
    // IoU = 40/160 = 0.25 < 0.5
    auto m = match_detections({det(0, Box{0, 0, 4, 10}, 0.9)},
                              {gt(0, Box{0, 0, 16, 10})});
    CHECK_FALSE(m[0].has_value());
  }
  SUBCASE("frames never cross") {
    auto m = match_detections({det(1, b, 0.9)}, {gt(0, b)});
    CHECK_FALSE(m[0].has_value());
  }
}

TEST_CASE("match_detections never double-assigns a gt") {
  Rng rng(61);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<BoxRecord> dets, gts;
    const std::size_t n_frames = 1 + rng.next_below(3);
    for (std::size_t f = 0; f < n_frames; ++f) {
      const std::size_t n_gt = 1 + rng.next_below(4);
      for (std::size_t g = 0; g < n_gt; ++g) {
        const double x = rng.uniform(0, 50), y = rng.uniform(0, 50);
        const double w = rng.uniform(5, 20), h = rng.uniform(5, 20);
        gts.push_back(gt(f, Box{x, y, x + w, y + h}));
        // A couple of detections jittered around each gt.
        for (int d = 0; d < 2; ++d) {
          const double dx = rng.uniform(-3, 3), dy = rng.uniform(-3, 3);
          dets.push_back(det(f, Box{x + dx, y + dy, x + w + dx, y + h + dy},
                             rng.next_double()));
        }
      }
    }
    auto matches = match_detections(dets, gts);
    std::vector<int> gt_hits(gts.size(), 0);
    for (const auto& m : matches) {
      if (m) gt_hits[*m] += 1;
    }
    for (int hits : gt_hits) CHECK(hits <= 1);
  }
}

TEST_CASE("detection_ap_recall worked values") {
  const Box b{0, 0, 10, 10};
  const Box b2{100, 100, 110, 110};

  SUBCASE("perfect detections") {
    auto m = detection_ap_recall({det(0, b, 1.0), det(1, b2, 1.0)},
                                 {gt(0, b), gt(1, b2)});
    CHECK(m.ap == doctest::Approx(1.0));
    CHECK(m.recall == doctest::Approx(1.0));
  }
  SUBCASE("nothing matched") {
    auto m = detection_ap_recall({det(5, b, 1.0)}, {gt(0, b), gt(1, b2)});
    CHECK(m.ap == 0.0);
    CHECK(m.recall == 0.0);
  }
  SUBCASE("three detections, flags 1,0,1 over two gts") {
    // Scores order the flags as [match, miss, match].
    auto m = detection_ap_recall(
        {det(0, b, 0.9), det(0, Box{50, 50, 60, 60}, 0.8), det(1, b2, 0.7)},
        {gt(0, b), gt(1, b2)});
    CHECK(m.recall == doctest::Approx(1.0));
    CHECK(m.ap == doctest::Approx(1.0 * 0.5 + (2.0 / 3.0) * 0.5).epsilon(1e-9));
    CHECK(m.ap == doctest::Approx(0.8333333333333333).epsilon(1e-9));
  }
  SUBCASE("no ground truth is an error") {
    CHECK_THROWS_AS(detection_ap_recall({det(0, b, 1.0)}, {}), EmptySetError);
  }
}

TEST_CASE("detection AP is invariant to monotone score rescaling") {
  Rng rng(62);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<BoxRecord> dets, gts;
    for (int g = 0; g < 5; ++g) {
      const double x = 20.0 * g;
      gts.push_back(gt(0, Box{x, 0, x + 10, 10}));
      dets.push_back(det(0, Box{x + rng.uniform(-2, 2), 0, x + 10, 10},
                         0.1 + 0.8 * rng.next_double()));
    }
    dets.push_back(det(0, Box{500, 500, 510, 510}, rng.next_double()));
    auto base = detection_ap_recall(dets, gts);
    auto rescaled = dets;
    for (auto& d : rescaled) d.score = d.score * d.score * 0.9;  // monotone
    auto after = detection_ap_recall(rescaled, gts);
    CHECK(after.ap == base.ap);
    CHECK(after.recall == base.recall);
  }
}

TEST_CASE("retrieval_ap worked values") {
  CHECK(retrieval_ap(ranked({1})) == 1.0);
  CHECK(retrieval_ap(ranked({0, 1})) == 0.5);
  CHECK(retrieval_ap(ranked({1, 0, 1})) ==
        doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK_THROWS_AS(retrieval_ap(ranked({0, 0, 0})), NoPositiveError);
}

TEST_CASE("retrieval_ap ignores negatives below the last positive") {
  // Permuting trailing negatives cannot change the score.
  CHECK(retrieval_ap(ranked({1, 0, 1, 0, 0})) ==
        retrieval_ap(ranked({1, 0, 1, 0, 0})));
  CHECK(retrieval_ap(ranked({1, 0, 1, 0, 0})) ==
        doctest::Approx(retrieval_ap(ranked({1, 0, 1}))).epsilon(1e-15));
}

TEST_CASE("map_and_cmc worked values") {
  SUBCASE("all queries hit at rank 1") {
    auto m = map_and_cmc({ranked({1, 0}), ranked({1, 1})});
    CHECK(m.map == doctest::Approx(1.0));
    CHECK(m.rank_at[0].second == doctest::Approx(1.0));
  }
  SUBCASE("mean of 1.0 and 0.5") {
    auto m = map_and_cmc({ranked({1, 0}), ranked({0, 1})});
    CHECK(m.map == doctest::Approx(0.75).epsilon(1e-15));
  }
  SUBCASE("queries without positives are excluded and counted") {
    auto m = map_and_cmc({ranked({1}), ranked({0, 0})});
    CHECK(m.map == doctest::Approx(1.0));
    CHECK(m.valid_queries == 1);
    CHECK(m.excluded_queries == 1);
  }
  SUBCASE("no valid queries at all") {
    CHECK_THROWS_AS(map_and_cmc({ranked({0})}), EmptySetError);
  }
}

TEST_CASE("rank-1 equals mAP for single-positive single-gallery queries") {
  std::vector<RankedResult> results;
  for (int q = 0; q < 7; ++q) {
    RankedResult r;
    r.query_id = q;
    r.gallery_ids = {static_cast<std::uint64_t>(q)};
    r.relevant = {1};
    results.push_back(r);
  }
  auto m = map_and_cmc(results);
  CHECK(m.map == m.rank_at[0].second);
}

TEST_CASE("map_and_cmc matches the brute-force oracle on random rankings") {
  Rng rng(63);
  std::vector<RankedResult> results;
  std::vector<std::vector<std::uint8_t>> all_flags;
  for (int q = 0; q < 40; ++q) {
    const std::size_t n = 1 + rng.next_below(20);
    std::vector<std::uint8_t> flags(n);
    for (auto& f : flags) f = rng.next_double() < 0.3 ? 1 : 0;
    RankedResult r;
    r.query_id = q;
    for (std::size_t i = 0; i < n; ++i) r.gallery_ids.push_back(i);
    r.relevant = flags;
    results.push_back(r);
    all_flags.push_back(flags);
  }
  const std::vector<int> ks = {1, 5, 10};
  auto oracle = test::map_cmc_oracle(all_flags, ks);
  auto metrics = map_and_cmc(results, ks);
  CHECK(std::abs(metrics.map - oracle.map) <= 1e-12);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    CHECK(std::abs(metrics.rank_at[i].second - oracle.rank_at[i]) <= 1e-12);
  }
  CHECK(metrics.excluded_queries == oracle.excluded);
}

TEST_CASE("assign_labels_from_gt inherits identities through matching") {
  const Box b{0, 0, 10, 10};
  const Box far_box{50, 50, 60, 60};
  auto labels = assign_labels_from_gt({det(0, b, 0.9), det(0, far_box, 0.8)},
                                      {gt(0, b, 42)});
  REQUIRE(labels.size() == 2);
  CHECK(labels[0] == 42);
  CHECK_FALSE(labels[1].has_value());
}
