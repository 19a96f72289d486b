// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "fixture.hpp"
#include "prefguide/checkpoint.hpp"
#include "prefguide/cli.hpp"
#include "prefguide/service.hpp"

using namespace prefguide;
using nlohmann::json;
using prefguide::testing::make_vocab;
using prefguide::testing::random_classifier;
using prefguide::testing::small_world;
using prefguide::testing::temp_dir;

namespace {

std::shared_ptr<const Engine> small_engine() {
  static const auto engine = [] {
    const auto& w = small_world();
    return std::make_shared<const Engine>(Checkpoint{w.vocab, w.lm, w.clf, make_provenance(w.cfg)});
  }();
  return engine;
}

std::array<std::vector<std::string>, 2> subsets() {
  const auto& w = small_world();
  std::array<std::vector<std::string>, 2> s;
  for (std::size_t i = 0; i < 60; ++i) s[i % 2].push_back(w.corpus.eval.examples[i].prompt);
  return s;
}

const Service& service() {
  static const Service svc(small_engine(), small_world().cfg, subsets());
  return svc;
}

// Model whose base distribution gives zero mass to unseen tokens, so any
// guided step takes log 0.
std::shared_ptr<const Engine> broken_engine() {
  const Vocab v = make_vocab({"a", "b", "c"});
  const std::vector<TokenIdSeq> seqs = {{kBos, 4, kSep, 5, kEos}};
  NgramLM lm(v.size(), NgramConfig{1, 0.0, {1.0}}, seqs);
  return std::make_shared<const Engine>(
      Checkpoint{v, std::move(lm), random_classifier(v.size(), 3), Provenance{}});
}

}  // namespace

TEST_CASE("health and dimensions") {
  const auto h = service().health();
  CHECK(h.status == 200);
  CHECK(json::parse(h.body) == json{{"status", "ok"}, {"format_version", kCheckpointFormatVersion}});

  const auto d = service().dimensions();
  CHECK(d.status == 200);
  const auto dims = json::parse(d.body).at("dims");
  REQUIRE(dims.size() == 6);
  CHECK(dims[0].at("symbol") == "simple");
  for (const auto& dim : dims) {
    CHECK(dim.size() == 4);
    CHECK((dim.at("polarity") == "+" || dim.at("polarity") == "-"));
  }
  CHECK(dims[2].at("symbol") == "concise");
  CHECK(dims[5].at("symbol") == "harsh");
  CHECK(dims[4].at("pair_id") == dims[5].at("pair_id"));
}

TEST_CASE("generate without preferences matches the library and the CLI") {
  const auto r = service().generate(R"({"prompt":"the old bridge","seed":9})");
  REQUIRE(r.status == 200);
  const auto doc = json::parse(r.body);
  DecodeConfig cfg = small_world().cfg.decode;
  cfg.seed = 9;
  const auto expected = small_engine()->generate("the old bridge", {}, cfg);
  CHECK(doc.at("text") == expected.text);
  CHECK(doc.at("tokens").size() == expected.tokens.size());
  CHECK(doc.at("stop_reason") == std::string(stop_reason_name(expected.stop_reason)));
  CHECK_FALSE(doc.contains("trace"));

  const auto dir = temp_dir("service_cli");
  const auto& w = small_world();
  save_checkpoint(dir / "m.ckpt", w.lm, w.clf, w.vocab, make_provenance(w.cfg));
  std::ostringstream out, err;
  const int code = run_cli({"generate", "--checkpoint", (dir / "m.ckpt").string(), "--prompt",
                            "the old bridge", "--seed", "9"},
                           out, err);
  CHECK(code == kExitOk);
  CHECK(out.str() == doc.at("text").get<std::string>() + "\n");
}

TEST_CASE("trace lists the top candidates of every step") {
  const auto r = service().generate(
      R"({"prompt":"a calm lake","preferences":[{"dim":"verbose","alpha":0.8},{"dim":"playful","alpha":0.5}],"seed":4,"trace":true,"max_tokens":12})");
  REQUIRE(r.status == 200);
  const auto doc = json::parse(r.body);
  const auto& trace = doc.at("trace");
  REQUIRE(trace.size() == doc.at("tokens").size());

  DecodeConfig cfg = small_world().cfg.decode;
  cfg.seed = 4;
  cfg.max_tokens = 12;
  cfg.trace = true;
  const auto lib = small_engine()->generate(
      "a calm lake", PreferenceRequest{{{"verbose", 0.8}, {"playful", 0.5}}}, cfg);
  const auto& vocab = small_engine()->vocab();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& step = trace[i];
    CHECK(step.at("position") == i);
    CHECK(step.at("chosen") == doc.at("tokens")[i]);
    const auto& top = step.at("top");
    CHECK(top.size() == kTraceTopN);
    for (std::size_t j = 0; j < top.size(); ++j) {
      if (j > 0) CHECK(top[j - 1].at("combined_p").get<double>() >= top[j].at("combined_p").get<double>());
      const auto id = *vocab.find(top[j].at("token").get<std::string>());
      const auto& s = lib.steps[i];
      CHECK(top[j].at("combined_p").get<double>() == s.combined_dist[id]);
      CHECK(top[j].at("base_p").get<double>() == s.base_dist[id]);
      // class_dims are in registry order: verbose (3) before playful (4).
      CHECK(top[j].at("class_p").at("verbose").get<double>() == s.class_columns[0][id]);
      CHECK(top[j].at("class_p").at("playful").get<double>() == s.class_columns[1][id]);
    }
  }
}

TEST_CASE("identical requests give identical bytes") {
  const std::string body =
      R"({"prompt":"morning fog","preferences":[{"dim":"concise","alpha":0.8}],"seed":1,"trace":true})";
  CHECK(service().generate(body).body == service().generate(body).body);
}

TEST_CASE("error statuses") {
  const auto unknown = service().generate(
      R"({"prompt":"x","preferences":[{"dim":"formal","alpha":1}]})");
  CHECK(unknown.status == 422);
  CHECK(json::parse(unknown.body).at("dim") == "formal");

  for (const std::string bad :
       {"not json", "[1,2]", "{}", R"({"prompt":3})",
        R"({"prompt":"x","preferences":{"dim":"concise"}})",
        R"({"prompt":"x","preferences":[{"dim":"concise"}]})",
        R"({"prompt":"x","preferences":[{"dim":"concise","alpha":-1}]})",
        R"({"prompt":"x","preferences":[{"dim":"concise","alpha":1},{"dim":"verbose","alpha":1}]})",
        R"({"prompt":"x","max_tokens":0})", R"({"prompt":"x","max_tokens":-3})",
        R"({"prompt":"x","seed":"abc"})", R"({"prompt":"x","strategy":"beam"})",
        R"({"prompt":"x","temperature":"hot"})", R"({"prompt":"x","top_k":0,"strategy":"top_k"})"}) {
    const auto r = service().generate(bad);
    CHECK_MESSAGE(r.status == 400, bad);
    CHECK(json::parse(r.body).contains("error"));
  }

  const Service broken(broken_engine(), RunConfig{}, subsets());
  const auto r = broken.generate(R"({"prompt":"a","preferences":[{"dim":"simple","alpha":1}]})");
  CHECK(r.status == 500);
  const auto doc = json::parse(r.body);
  CHECK(doc.at("error") == "internal error");
  CHECK(doc.at("id").get<std::string>().size() == 9);
  CHECK(broken.generate(R"({"prompt":"a","preferences":[{"dim":"simple","alpha":1}]})").body != r.body);
}

TEST_CASE("sweep endpoint") {
  const auto r = service().sweep(
      R"({"preferences":[{"dim":"verbose","alpha":0}],"grid":[0.3,0.8],"max_tokens":10,"seed":2})");
  REQUIRE(r.status == 200);
  const auto doc = json::parse(r.body);
  CHECK(doc.at("rows").size() == 2);
  CHECK(doc.contains("selected"));

  const auto tuples = service().sweep(
      R"({"preferences":[{"dim":"verbose","alpha":0},{"dim":"harsh","alpha":0}],"grid":[[0.5,0.8]],"max_tokens":8})");
  REQUIRE(tuples.status == 200);
  CHECK(json::parse(tuples.body).at("rows").size() == 1);

  CHECK(service().sweep(R"({"preferences":[]})").status == 400);
  CHECK(service().sweep(R"({"preferences":[{"dim":"verbose","alpha":0}],"grid":[[0.5,0.8]]})").status == 400);
  CHECK(service().sweep(R"({"preferences":[{"dim":"verbose","alpha":0}],"subsets":[["a"]]})").status == 400);
  CHECK(service().sweep(R"({"preferences":[{"dim":"verbose","alpha":0}],"grid":[0.5],"subsets":[["a"],["b"]]})").status == 400);
  CHECK(service().sweep(R"({"preferences":[{"dim":"formal","alpha":0}]})").status == 422);
}

TEST_CASE("HTTP round trip through a live server") {
  httplib::Server server;
  service().install(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  const auto health = client.Get("/v1/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("Content-Type").find("application/json") != std::string::npos);

  const std::string body = R"({"prompt":"the old bridge","seed":9})";
  const auto gen = client.Post("/v1/generate", body, "application/json");
  REQUIRE(gen);
  CHECK(gen->status == 200);
  CHECK(gen->body == service().generate(body).body);

  const auto bad = client.Post("/v1/generate", "{", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  const auto missing = client.Get("/v1/nothing");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  server.stop();
  t.join();
}
