#include <doctest.h>

#include <cmath>
#include <map>

#include "support.hpp"
#include "udg/synth.hpp"

using namespace udg;

namespace {

ScenarioConfig small_config(std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.n_identities = 10;
  cfg.clothes_per_identity = 2;
  cfg.samples_per_clothing = 4;
  cfg.body_dim = 12;
  cfg.head_dim = 6;
  cfg.seed = seed;
  return cfg;
}

bool sets_equal(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& ra = a[i];
    const auto& rb = b[i];
    if (ra.record_id != rb.record_id || ra.frame_id != rb.frame_id ||
        ra.label != rb.label || ra.clothing_id != rb.clothing_id ||
        ra.body != rb.body || ra.head != rb.head) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("zero noise reproduces prototypes exactly") {
  ScenarioConfig cfg = small_config(3);
  cfg.body_noise_sigma = 0.0;
  cfg.head_noise_sigma = 0.0;
  cfg.clothing_confusion = 0.0;
  cfg.head_missing_rate = 0.0;
  auto scenario = generate_scenario(cfg);

  // All samples of one (identity, clothing) pair are byte-identical and all
  // heads of an identity agree.
  std::map<std::pair<int, int>, std::vector<double>> body_proto;
  std::map<int, std::vector<double>> head_proto;
  for (const EmbeddingSet* set :
       {&scenario.train, &scenario.query, &scenario.gallery}) {
    for (const auto& rec : set->records()) {
      REQUIRE(rec.label.has_value());
      REQUIRE(rec.clothing_id.has_value());
      REQUIRE(rec.head.has_value());
      const auto key = std::make_pair(*rec.label, *rec.clothing_id);
      auto [it, fresh] = body_proto.emplace(key, rec.body);
      if (!fresh) CHECK(it->second == rec.body);
      auto [hit, hfresh] = head_proto.emplace(*rec.label, *rec.head);
      if (!hfresh) CHECK(hit->second == *rec.head);
    }
  }
}

TEST_CASE("same seed generates byte-identical scenarios") {
  auto a = generate_scenario(small_config(17));
  auto b = generate_scenario(small_config(17));
  CHECK(sets_equal(a.train, b.train));
  CHECK(sets_equal(a.query, b.query));
  CHECK(sets_equal(a.gallery, b.gallery));

  auto c = generate_scenario(small_config(18));
  CHECK_FALSE(sets_equal(a.train, c.train));
}

TEST_CASE("generated vectors are unit-norm within 1e-9") {
  auto scenario = generate_scenario(small_config(5));
  for (const EmbeddingSet* set :
       {&scenario.train, &scenario.query, &scenario.gallery}) {
    for (const auto& rec : set->records()) {
      CHECK(std::abs(norm(rec.body) - 1.0) <= 1e-9);
      if (rec.head) CHECK(std::abs(norm(*rec.head) - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("identities split disjointly and positives are guaranteed") {
  auto scenario = generate_scenario(small_config(6));
  std::map<int, int> train_ids, test_ids;
  for (const auto& rec : scenario.train.records()) ++train_ids[*rec.label];
  for (const auto& rec : scenario.query.records()) ++test_ids[*rec.label];
  for (const auto& rec : scenario.gallery.records()) ++test_ids[*rec.label];
  for (const auto& [id, count] : train_ids) CHECK(test_ids.count(id) == 0);

  // Per query: at least 2 same-clothing and 2 cloth-changed gallery
  // positives.
  for (const auto& q : scenario.query.records()) {
    int same = 0, changed = 0;
    for (const auto& g : scenario.gallery.records()) {
      if (*g.label != *q.label) continue;
      if (*g.clothing_id == *q.clothing_id) {
        ++same;
      } else {
        ++changed;
      }
    }
    CHECK(same >= 2);
    CHECK(changed >= 2);
  }
}

TEST_CASE("infeasible configs are rejected") {
  ScenarioConfig cfg = small_config(1);
  SUBCASE("too few samples per clothing") {
    cfg.samples_per_clothing = 2;
    CHECK_THROWS_AS(generate_scenario(cfg), ConfigError);
  }
  SUBCASE("single clothing cannot yield cloth-changed positives") {
    cfg.clothes_per_identity = 1;
    CHECK_THROWS_AS(generate_scenario(cfg), ConfigError);
  }
  SUBCASE("bad rates") {
    cfg.clothing_confusion = 1.5;
    CHECK_THROWS_AS(generate_scenario(cfg), ConfigError);
  }
  SUBCASE("degenerate split") {
    cfg.train_fraction = 1.0;
    CHECK_THROWS_AS(generate_scenario(cfg), ConfigError);
  }
}

TEST_CASE("neighbor_purity worked values") {
  KnnGraph g;
  g.n_nodes = 4;
  g.k = 1;
  g.has_channel.assign(4, 1);

  SUBCASE("all edges intra-identity") {
    g.adj = {{1}, {0}, {3}, {2}};
    CHECK(neighbor_purity(g, {0, 0, 1, 1}) == 1.0);
  }
  SUBCASE("all edges cross-identity") {
    g.adj = {{2}, {3}, {0}, {1}};
    CHECK(neighbor_purity(g, {0, 0, 1, 1}) == 0.0);
  }
  SUBCASE("two of three edges intra") {
    g.adj = {{1}, {0}, {0}, {}};
    CHECK(neighbor_purity(g, {0, 0, 1, 1}) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("no labeled edges") {
    g.adj = {{1}, {0}, {}, {}};
    CHECK_THROWS_AS(
        neighbor_purity(g, {std::nullopt, std::nullopt, 1, 1}),
        DegenerateGraphError);
  }
}

TEST_CASE("head graph is purer than body graph on the default scenario") {
  ScenarioConfig cfg;  // stock defaults
  cfg.seed = 1;
  auto scenario = generate_scenario(cfg);
  auto pooled = scenario.query.concat(scenario.gallery);
  auto body_g = build_knn_graph(pooled, Channel::Body, 5,
                                Metric::OneMinusCosine);
  auto head_g = build_knn_graph(pooled, Channel::Head, 5,
                                Metric::OneMinusCosine);
  const auto labels = labels_of(pooled);
  const double body_purity = neighbor_purity(body_g, labels);
  const double head_purity = neighbor_purity(head_g, labels);
  CHECK(head_purity > body_purity);
}

TEST_CASE("low noise without confusion keeps both graphs pure") {
  ScenarioConfig cfg;
  cfg.body_noise_sigma = 0.05;
  cfg.head_noise_sigma = 0.05;
  cfg.clothing_confusion = 0.0;
  cfg.head_missing_rate = 0.0;
  cfg.seed = 2;
  auto scenario = generate_scenario(cfg);
  auto pooled = scenario.query.concat(scenario.gallery);
  const auto labels = labels_of(pooled);
  const double body_purity = neighbor_purity(
      build_knn_graph(pooled, Channel::Body, 5, Metric::OneMinusCosine),
      labels);
  const double head_purity = neighbor_purity(
      build_knn_graph(pooled, Channel::Head, 5, Metric::OneMinusCosine),
      labels);
  CHECK(body_purity >= 0.95);
  CHECK(head_purity >= 0.95);
}

TEST_CASE("raising clothing confusion does not raise body purity") {
  auto mean_body_purity = [](double confusion) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      ScenarioConfig cfg;
      cfg.n_identities = 30;
      cfg.clothing_confusion = confusion;
      cfg.seed = 100 + seed;
      auto scenario = generate_scenario(cfg);
      auto pooled = scenario.query.concat(scenario.gallery);
      total += neighbor_purity(
          build_knn_graph(pooled, Channel::Body, 5, Metric::OneMinusCosine),
          labels_of(pooled));
    }
    return total / 5.0;
  };
  const double at_zero = mean_body_purity(0.0);
  const double at_quarter = mean_body_purity(0.25);
  const double at_half = mean_body_purity(0.5);
  CHECK(at_quarter <= at_zero + 1e-12);
  CHECK(at_half <= at_quarter + 1e-12);
}
