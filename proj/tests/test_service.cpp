#include "concept_forge/report.hpp"
#include "concept_forge/service.hpp"
#include "concept_forge/synthetic.hpp"

#include "helpers.hpp"

#include <httplib.h>
#include <doctest.h>

#include <atomic>
#include <fstream>
#include <thread>

using namespace concept_forge;

namespace {

using Query = std::multimap<std::string, std::string>;

std::shared_ptr<const ActivationStore> poly_store(std::uint64_t seed = 70) {
  return std::make_shared<const ActivationStore>(generate(test::poly_spec(seed)).store);
}

ServiceConfig config(const std::filesystem::path& cache = {}) {
  ServiceConfig c;
  c.defaults = {100, 3.0, 1.5, 5};
  c.cache_dir = cache;
  return c;
}

}  // namespace

TEST_CASE("concepts endpoint") {
  ConceptService svc(poly_store(), config());
  SUBCASE("default threshold finds two concepts") {
    const auto r = svc.concepts("0", {});
    REQUIRE(r.status == 200);
    const auto j = nlohmann::json::parse(r.body);
    CHECK(j["schema"] == kReportSchema);
    CHECK(j["neuron"] == 0);
    CHECK(j["concepts"].size() == 2);
  }
  SUBCASE("huge threshold gives one concept") {
    const auto j = nlohmann::json::parse(svc.concepts("0", {{"dmax", "1e9"}}).body);
    CHECK(j["concepts"].size() == 1);
    CHECK(j["params"]["d_max"] == 1e9);
  }
  SUBCASE("tau may be inf") {
    const auto j = nlohmann::json::parse(svc.concepts("0", {{"tau", "inf"}}).body);
    CHECK(j["params"]["tau"] == "inf");
  }
  SUBCASE("repeat requests are byte-identical") {
    const Query q{{"N", "80"}, {"k", "5"}};
    CHECK(svc.concepts("0", q).body == svc.concepts("0", q).body);
  }
  SUBCASE("unknown neuron") {
    CHECK(svc.concepts("16", {}).status == 404);
    CHECK(svc.concepts("abc", {}).status == 404);
    CHECK(svc.concepts("-1", {}).status == 404);
  }
  SUBCASE("invalid parameters name their field") {
    const std::vector<std::pair<Query, std::string>> cases{
        {{{"dmax", "-1"}}, "dmax"}, {{{"dmax", "x"}}, "dmax"}, {{{"tau", "0"}}, "tau"},
        {{{"N", "1"}}, "N"},       {{{"N", "401"}}, "N"},    {{{"min_cluster_size", "0"}}, "min_cluster_size"},
        {{{"k", "-2"}}, "k"}};
    for (const auto& [q, field] : cases) {
      const auto r = svc.concepts("0", q);
      CHECK(r.status == 400);
      const auto j = nlohmann::json::parse(r.body);
      CHECK(j["field"] == field);
      CHECK(j["schema"] == kReportSchema);
      CHECK(j["error"].is_string());
    }
  }
}

TEST_CASE("report body matches a direct pipeline run") {
  const auto store = poly_store(71);
  ConceptService svc(store, config());
  const DiscoveryParams p{100, 3.0, 1.5, 5};
  const auto direct = serialize_report(neuron_report(*store, discover_concepts(*store, 0, p), kDefaultTopK));
  CHECK(svc.report("0").body == direct);
  CHECK(svc.concepts("0", {}).body == direct);
}

TEST_CASE("concurrent requests return the same bytes as sequential ones") {
  const auto store = poly_store(72);
  ConceptService sequential(store, config());
  std::vector<std::string> expected;
  for (int n = 0; n < 4; ++n) expected.push_back(sequential.concepts(std::to_string(n), {}).body);

  ConceptService shared(store, config());
  std::vector<std::thread> threads;
  std::vector<std::string> got(16);
  for (int t = 0; t < 16; ++t)
    threads.emplace_back([&, t] { got[static_cast<std::size_t>(t)] = shared.concepts(std::to_string(t % 4), {}).body; });
  for (auto& th : threads) th.join();
  for (int t = 0; t < 16; ++t) CHECK(got[static_cast<std::size_t>(t)] == expected[static_cast<std::size_t>(t % 4)]);
}

TEST_CASE("OnceCache computes once per key and retries failures") {
  OnceCache<int, int> cache;
  std::atomic<int> calls{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&] { CHECK(cache.get(1, [&] { ++calls; std::this_thread::sleep_for(std::chrono::milliseconds(20)); return 7; }) == 7); });
  for (auto& th : threads) th.join();
  CHECK(calls == 1);
  CHECK_THROWS(cache.get(2, []() -> int { throw std::runtime_error("boom"); }));
  CHECK(cache.get(2, [] { return 3; }) == 3);
}

TEST_CASE("disk cache is reused across service instances") {
  const auto dir = test::scratch_dir("service_cache");
  const auto store = poly_store(73);
  std::string first;
  {
    ConceptService svc(store, config(dir));
    first = svc.report("1").body;
  }
  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) files += e.is_regular_file();
  CHECK(files == 1);
  ConceptService again(store, config(dir));
  CHECK(again.report("1").body == first);
}

TEST_CASE("default cache dir honours the environment") {
  ::unsetenv("CONCEPT_FORGE_CACHE");
  CHECK(default_cache_dir("/data/store") == std::filesystem::path("/data/store/.concept_forge_cache"));
  ::setenv("CONCEPT_FORGE_CACHE", "/tmp/cf_cache", 1);
  CHECK(default_cache_dir("/data/store") == std::filesystem::path("/tmp/cf_cache"));
  ::unsetenv("CONCEPT_FORGE_CACHE");
}

TEST_CASE("neurons and dendrogram endpoints") {
  ConceptService svc(poly_store(74), config());
  const auto list = nlohmann::json::parse(svc.neurons().body);
  CHECK(list["dim"] == 16);
  REQUIRE(list["neurons"].size() == 16);
  CHECK(list["neurons"][0]["polysemantic"] == true);
  CHECK(list["neurons"][0]["surviving"] == 2);

  const auto r = svc.dendrogram("0", {{"N", "50"}});
  REQUIRE(r.status == 200);
  const auto j = nlohmann::json::parse(r.body);
  CHECK(j["ids"].size() == 50);
  CHECK(j["dendrogram"]["leaves"] == 50);
  CHECK(dendrogram_from_json(j["dendrogram"]).merges.size() == 49);
  CHECK(svc.dendrogram("0", {{"N", "0"}}).status == 400);
  CHECK(svc.dendrogram("99", {}).status == 404);
}

TEST_CASE("thumbnails") {
  const auto dir = test::scratch_dir("service_thumbs");
  std::filesystem::create_directories(dir / "thumbs");
  std::ofstream(dir / "thumbs" / "a.png", std::ios::binary) << "PNGDATA";
  Manifest m;
  m.layer_name = "t";
  m.images = {{"a", "thumbs/a.png", std::nullopt}, {"b", std::nullopt, std::nullopt},
              {"c", "../outside.png", std::nullopt}, {"d", "thumbs/missing.jpg", std::nullopt}};
  auto store = std::make_shared<const ActivationStore>(RowMatrix::Ones(4, 2), m);
  ServiceConfig c = config();
  c.defaults.top_n = 4;
  c.store_dir = dir;
  ConceptService svc(store, c);
  const auto a = svc.thumb("a");
  CHECK(a.status == 200);
  CHECK(a.body == "PNGDATA");
  CHECK(a.content_type == "image/png");
  CHECK(svc.thumb("b").status == 404);
  CHECK(svc.thumb("c").status == 404);
  CHECK(svc.thumb("d").status == 404);
  CHECK(svc.thumb("zzz").status == 404);
}

TEST_CASE("HTTP server round trip") {
  const auto store = poly_store(75);
  ConceptService svc(store, config());
  httplib::Server server;
  svc.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread loop([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  const auto res = client.Get("/api/neuron/0/concepts?dmax=3&N=100");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type") == "application/json");
  CHECK(res->body == svc.report_body(0, {100, 3.0, 1.5, 5}, kDefaultTopK));

  const auto bad = client.Get("/api/neuron/0/concepts?tau=-3");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(nlohmann::json::parse(bad->body)["field"] == "tau");
  const auto missing = client.Get("/api/neuron/77/concepts");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  const auto list = client.Get("/api/neurons");
  REQUIRE(list);
  CHECK(list->status == 200);
  const auto rep = client.Get("/api/report/0");
  REQUIRE(rep);
  CHECK(rep->body == svc.report("0").body);

  server.stop();
  loop.join();
}

TEST_CASE("report layout") {
  const auto data = generate(test::poly_spec(76));
  const auto d = discover_concepts(data.store, 0, {100, 3.0, 1.5, 5});
  const auto j = neuron_report(data.store, d, 7);
  const auto text = serialize_report(j);
  CHECK(text.back() == '\n');
  CHECK(nlohmann::json::parse(text) == j);
  CHECK(j["layer_name"] == "synthetic");
  CHECK(j["params"]["top_k"] == 7);
  CHECK(j["selection"]["ids"].size() == 100);
  CHECK(j["selection"]["ids"][0] == data.store.image_id(d.prepared->selection.rows[0]));
  CHECK(j["dendrogram"]["merges"].size() == 99);
  CHECK(j["clusters"]["labels"].size() == 100);
  CHECK(j["clusters"]["surviving"] == 2);
  REQUIRE(j["concepts"].size() == 2);
  for (const auto& c : j["concepts"]) {
    CHECK(c["vector"].size() == 16);
    CHECK(c["members"].size() == c["member_count"].get<std::size_t>());
    CHECK(c["metrics"]["cosine_concept"].size() == c["members"].size());
    CHECK(c["metrics"]["mean_cosine_concept"].get<double>() > c["metrics"]["mean_cosine_neuron"].get<double>());
  }
  const auto& ds = j["distance_summary"];
  CHECK(ds["full"].size() == 100);
  CHECK(ds["retained"].size() == ds["retained_ids"].size());
  CHECK(ds["mean_inter"].get<double>() > ds["mean_intra"].get<double>());
  CHECK(j["pca"]["coords"].size() == ds["retained_ids"].size());
  REQUIRE(j["top_projecting"].size() == 2);
  CHECK(j["top_projecting"][0]["ids"].size() == 7);
}
