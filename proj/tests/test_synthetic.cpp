#include "concept_forge/pipeline.hpp"
#include "concept_forge/synthetic.hpp"

#include "helpers.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace concept_forge;

TEST_CASE("SplitMix64 reference stream") {
  // First outputs for seed 1234567 from the published reference implementation.
  SplitMix64 r(1234567);
  CHECK(r.next() == 6457827717110365317ULL);
  CHECK(r.next() == 3203168211198807973ULL);
  CHECK(r.next() == 9817491932198370423ULL);
}

TEST_CASE("SplitMix64 uniform and normal moments") {
  SplitMix64 r(9);
  double su = 0.0, sn = 0.0, sn2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK_UNARY(u >= 0.0);
    CHECK_UNARY(u < 1.0);
    su += u;
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) <= 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("noiseless concept rows are positive multiples of their direction") {
  auto spec = test::poly_spec(60, 0.0);
  spec.sigma_background = 0.0;
  const auto data = generate(spec);
  CHECK(data.store.rows() == 400);
  CHECK(data.store.layer_name() == "synthetic");
  int counts[2] = {0, 0};
  for (Index i = 0; i < data.store.rows(); ++i) {
    const int t = data.truth[static_cast<std::size_t>(i)];
    CHECK(truth_label_of(data.store.image_id(i)) == t);
    const auto row = data.store.data().row(i);
    if (t < 0) {
      CHECK(row.isZero());
      continue;
    }
    ++counts[t];
    const double a = row.dot(data.directions[static_cast<std::size_t>(t)].transpose());
    CHECK_UNARY(a >= 0.75 - 1e-12);
    CHECK_UNARY(a < 1.25);
    CHECK((row.transpose() - a * data.directions[static_cast<std::size_t>(t)]).norm() <= 1e-12);
  }
  CHECK(counts[0] == 60);
  CHECK(counts[1] == 60);
}

TEST_CASE("generation is deterministic per seed") {
  const auto a = generate(test::poly_spec(61, 0.1));
  const auto b = generate(test::poly_spec(61, 0.1));
  const auto c = generate(test::poly_spec(62, 0.1));
  CHECK(a.store.data() == b.store.data());
  CHECK(a.truth == b.truth);
  CHECK_FALSE(a.store.data() == c.store.data());
}

TEST_CASE("ids") {
  CHECK(truth_label_of("c1_00007") == 1);
  CHECK(truth_label_of("bg_00003") == -1);
  CHECK(truth_label_of("img_3") == -1);
  CHECK(truth_label_of("c_1") == -1);
}

TEST_CASE("invalid specs") {
  auto spec = test::poly_spec(63);
  SUBCASE("M too small") { spec.M = 100; }
  SUBCASE("non-unit direction") { spec.concepts[0].direction *= 2.0; }
  SUBCASE("concepts too similar") { spec.concepts[1].direction = spec.concepts[0].direction; }
  SUBCASE("negative loading") { spec.concepts[0].direction = -spec.concepts[0].direction; }
  SUBCASE("negative sigma") { spec.concepts[0].sigma = -1; }
  SUBCASE("no concepts") { spec.concepts.clear(); }
  CHECK_THROWS_AS(generate(spec), InputError);
}

TEST_CASE("planted directions") {
  const auto dirs = plant_directions(32, {{0, 0.5}, {0, 0.4}, {3, 0.9}}, 7);
  REQUIRE(dirs.size() == 3);
  for (const auto& g : dirs) CHECK(g.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dirs[0](0) == doctest::Approx(0.5));
  CHECK(dirs[2](3) == doctest::Approx(0.9));
  CHECK(dirs[0].dot(dirs[1]) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(std::abs(dirs[0].dot(dirs[2])) <= 1e-12);
  CHECK_THROWS_AS(plant_directions(3, {{0, 0.5}, {1, 0.5}, {2, 0.5}}, 1), InputError);
  CHECK_THROWS_AS(plant_directions(8, {{0, 0.0}}, 1), InputError);
}

TEST_CASE("synthspec JSON") {
  const auto j = nlohmann::json::parse(R"({"d":8,"M":50,"seed":5,"sigma_background":0.1,
    "concepts":[{"neuron":1,"count":10,"sigma":0.05,"loading":0.6},
                {"neuron":2,"count":10,"sigma":0.05,"direction":[0,0,1,0,0,0,0,0]}]})");
  const auto spec = synthetic_spec_from_json(j);
  CHECK(spec.d == 8);
  CHECK(spec.concepts[0].direction(1) == doctest::Approx(0.6));
  CHECK(spec.concepts[1].direction(2) == 1.0);
  CHECK_THROWS_AS(synthetic_spec_from_json(nlohmann::json::parse(R"({"d":8})")), InputError);
}

TEST_CASE("score_recovery") {
  const std::vector<Vector> truth{Vector::Unit(3, 0), Vector::Unit(3, 1)};
  SUBCASE("identity") {
    const auto s = score_recovery(truth, truth);
    CHECK(s.mean_cosine == 1.0);
    CHECK(s.matches == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}});
  }
  SUBCASE("swapped and sign-flipped") {
    const auto s = score_recovery({truth[1], -truth[0]}, truth);
    CHECK(s.matches == std::vector<std::pair<int, int>>{{0, 1}, {1, 0}});
    CHECK(s.mean_cosine == 1.0);
  }
  SUBCASE("extra found vector stays unmatched") {
    const auto s = score_recovery({truth[0], truth[1], Vector::Unit(3, 2)}, truth);
    CHECK(s.matches.size() == 2);
  }
  SUBCASE("empty") { CHECK_THROWS_AS(score_recovery(std::vector<Vector>{}, truth), InputError); }
}

TEST_CASE("hungarian_max matches brute force") {
  std::mt19937_64 rng(64);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 1 + static_cast<std::size_t>(trial % 4), cols = rows + static_cast<std::size_t>(trial % 3);
    const auto s = oracle::random_points(rng, rows, cols, 0.0, 1.0);
    const auto match = hungarian_max(test::to_matrix(s));
    double total = 0.0;
    std::set<int> used;
    for (std::size_t r = 0; r < rows; ++r) {
      REQUIRE(match[r] >= 0);
      CHECK(used.insert(match[r]).second);
      total += s[r][static_cast<std::size_t>(match[r])];
    }
    CHECK(total == doctest::Approx(oracle::best_assignment(s)).epsilon(1e-12));
  }
  Matrix tall(3, 2);
  tall << 1, 0, 0, 1, 5, 5;
  const auto m = hungarian_max(tall);
  CHECK(std::count(m.begin(), m.end(), -1) == 1);
}

TEST_CASE("noiseless pipeline recovers planted directions exactly") {
  auto spec = test::poly_spec(65, 0.0, 64, 600);
  spec.sigma_background = 0.05;
  const auto data = generate(spec);
  const auto d = discover_concepts(data.store, 0, {100, 3.0, 1.5, 5});
  REQUIRE(d.concepts.size() == 2);
  const auto s = score_recovery(d.concepts, data);
  for (double c : s.cosines) CHECK(c >= 0.999);
  CHECK(s.overall_precision == 1.0);
}

TEST_CASE("recovery degrades as concept noise grows") {
  double prev = 1.0 + 1e-9;
  for (double sigma : {0.02, 0.1, 0.2}) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto data = generate(test::poly_spec(100 + seed, sigma, 64, 600));
      const auto d = discover_concepts(data.store, 0, {100, 3.0, 1.5, 5});
      total += d.concepts.empty() ? 0.0 : score_recovery(d.concepts, data).mean_cosine;
    }
    const double mean = total / 10;
    MESSAGE("sigma " << sigma << " mean cosine " << mean);
    CHECK(mean <= prev);
    prev = mean;
  }
}
