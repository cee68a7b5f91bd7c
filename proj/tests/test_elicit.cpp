#include <atomic>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "mobandit/elicit.hpp"
#include "mobandit/harness.hpp"
#include "support/testing.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that collides with Eigen.
#include "httplib.h"

using namespace mobandit;
using namespace mobandit::elicit;
using nlohmann::json;

namespace {

const json kLinearPref = {{"type", "linear"}, {"weights", {0.4, 0.6}}};

json env_json(bool bernoulli = false) {
  return bernoulli ? to_json(EnvironmentSpec::multi_bernoulli(table1_actions()))
                   : to_json(EnvironmentSpec::mvn(table1_actions(), table1_covariance()));
}

json human_request(std::uint64_t horizon = 5, std::uint64_t seed = 1) {
  return {{"env", env_json()}, {"mode", "human"}, {"horizon", horizon}, {"seed", seed}};
}

json oracle_request(std::uint64_t horizon, std::uint64_t seed, json pref = kLinearPref, bool bernoulli = false) {
  return {{"env", env_json(bernoulli)}, {"mode", "scripted_oracle"}, {"preference", pref}, {"horizon", horizon},
          {"seed", seed}};
}

int status_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    return e.status();
  }
  return 0;
}

void check_same_posterior(const PosteriorState& a, const PosteriorState& b) {
  REQUIRE(a.n_actions() == b.n_actions());
  for (std::size_t k = 0; k < a.n_actions(); ++k) {
    CHECK(a.stats(k).count == b.stats(k).count);
    CHECK(a.stats(k).sum == b.stats(k).sum);
    CHECK(a.stats(k).outer == b.stats(k).outer);
  }
}

std::filesystem::path fresh_store(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove(p);
  return p;
}

}  // namespace

TEST_CASE("session creation validates the request") {
  SessionManager m;
  CHECK_FALSE(m.create_session(human_request()).empty());
  CHECK(status_of([&] { m.create_session(human_request(0)); }) == 400);
  CHECK(status_of([&] { m.create_session({{"mode", "human"}, {"horizon", 3}, {"seed", 1}}); }) == 400);
  CHECK(status_of([&] {
          auto r = human_request();
          r["mode"] = "scripted_oracle";
          m.create_session(r);
        }) == 400);
  CHECK(status_of([&] {
          auto r = human_request();
          r["mode"] = "robot";
          m.create_session(r);
        }) == 400);
  CHECK(status_of([&] { m.create_session(json::array()); }) == 400);
  auto no_seed = human_request();
  no_seed.erase("seed");
  const auto id = m.create_session(no_seed);
  CHECK(m.snapshot(id).request.contains("seed"));
  CHECK(m.session_ids().size() == 2);
}

TEST_CASE("first presentation is the prior sample and is stable until a choice") {
  SessionManager m;
  const auto id = m.create_session(human_request(5, 17));
  const auto first = m.next_options(id);
  CHECK(first["episode"] == 1);
  CHECK(first["options"].size() == 10);
  CHECK(m.next_options(id) == first);
  const auto prior = sample_thetas(PosteriorState(10, 2), DrawKey{17, 0, 1});
  for (std::size_t a = 0; a < 10; ++a) {
    CHECK(first["options"][a]["theta"].get<std::vector<double>>() == prior[a].values());
    CHECK(first["options"][a]["action"] == "a" + std::to_string(a + 1));
  }
}

TEST_CASE("front_only keeps exactly the non-dominated samples") {
  SessionManager m;
  const auto id = m.create_session(human_request(5, 3));
  const auto all = m.next_options(id);
  const auto front = m.next_options(id, true);
  std::vector<ObjectiveVector> thetas;
  for (const auto& o : all["options"]) thetas.emplace_back(o["theta"].get<std::vector<double>>());
  const auto expect = testing::oracle_front(thetas);
  REQUIRE(front["options"].size() == expect.size());
  for (std::size_t k = 0; k < expect.size(); ++k) {
    CHECK(front["options"][k]["index"] == expect[k]);
    CHECK(front["options"][k]["dominated"] == false);
  }
  for (const auto& o : all["options"]) {
    const bool on = std::find(expect.begin(), expect.end(), o["index"].get<std::size_t>()) != expect.end();
    CHECK(o["dominated"] == !on);
  }
}

TEST_CASE("choices advance the session and errors leave it unchanged") {
  SessionManager m;
  const auto id = m.create_session(human_request(3, 4));
  CHECK(status_of([&] { m.submit_choice(id, {{"index", 0}}); }) == 409);
  m.next_options(id);
  CHECK(status_of([&] { m.submit_choice(id, {{"index", 10}}); }) == 400);
  CHECK(status_of([&] { m.submit_choice(id, {{"index", -1}}); }) == 400);
  CHECK(status_of([&] { m.submit_choice(id, json::object()); }) == 400);
  CHECK(status_of([&] { m.submit_choice(id, {{"index", 1}, {"episode", 2}}); }) == 409);
  CHECK(m.snapshot(id).episode() == 0);
  CHECK(m.snapshot(id).pending.has_value());

  const auto r1 = m.submit_choice(id, {{"index", 2}, {"episode", 1}});
  CHECK(r1["episode"] == 1);
  CHECK(r1["action"] == "a3");
  CHECK(r1["status"] == "active");
  CHECK_FALSE(r1.contains("cum_regret"));
  CHECK(m.snapshot(id).posterior.count(2) == 1);

  // A duplicate submission returns the recorded result without replaying.
  CHECK(m.submit_choice(id, {{"index", 2}, {"episode", 1}}) == r1);
  CHECK(status_of([&] { m.submit_choice(id, {{"index", 4}, {"episode", 1}}); }) == 409);
  CHECK(m.snapshot(id).episode() == 1);

  m.next_options(id);
  m.submit_choice(id, {{"index", 0}});
  m.next_options(id);
  const auto last = m.submit_choice(id, {{"index", 0}});
  CHECK(last["status"] == "finished");
  CHECK(last["summary"]["episodes"] == 3);
  CHECK(status_of([&] { m.next_options(id); }) == 409);
  CHECK(status_of([&] { m.submit_choice(id, {{"index", 0}}); }) == 409);
  CHECK(m.history(id)["history"].size() == 3);
  CHECK(status_of([&] { m.history("nope"); }) == 404);
}

TEST_CASE("regret is reported when a reference preference is configured") {
  SessionManager m;
  auto r = human_request(2, 5);
  r["reference_preference"] = kLinearPref;
  const auto id = m.create_session(r);
  m.next_options(id);
  const auto res = m.submit_choice(id, {{"index", 0}});
  CHECK(res["cum_regret"].get<double>() == doctest::Approx(0.172));
  m.next_options(id);
  const auto fin = m.submit_choice(id, {{"index", 8}});
  CHECK(fin["summary"]["cum_regret"].get<double>() == doctest::Approx(0.172));
}

TEST_CASE("scripted-oracle sessions reproduce harness MVN-TS trajectories") {
  const PolicyConfig mvn{PolicyKind::MvnThompson, 0, "mvn_ts"};
  struct Case {
    json pref;
    bool bernoulli;
  };
  const std::vector<Case> cases = {
      {kLinearPref, false},
      {{{"type", "epsilon_constraint"}, {"target", 2}, {"epsilons", {{"1", 0.5}}}}, true},
      {{{"type", "chebyshev"}, {"weights", {0.4, 0.6}}}, false},
  };
  for (const auto& c : cases) {
    for (std::uint64_t seed : {0ull, 1ull, 12345ull, 0xFFFFFFFFFFFFull}) {
      SessionManager m;
      const auto request = oracle_request(300, seed, c.pref, c.bernoulli);
      const auto id = m.create_session(request);
      const auto summary = m.run_oracle(id);
      CHECK(summary["episodes"] == 300);
      const auto s = m.snapshot(id);
      const auto env = environment_from_json(request["env"]);
      const auto pref = preference_from_json(c.pref, 2);
      const auto traj = run_trajectory(mvn, env, pref, 300, seed, 0);
      for (std::size_t t = 0; t < 300; ++t) {
        REQUIRE(s.history[t].choice == traj.rows[t].action);
        REQUIRE(s.history[t].observation == traj.rows[t].observation);
      }
      CHECK(s.cum_regret == doctest::Approx(traj.final_regret()));
    }
  }
}

TEST_CASE("step-wise oracle choices match autorun") {
  SessionManager m;
  const auto a = m.create_session(oracle_request(40, 9));
  const auto b = m.create_session(oracle_request(40, 9));
  m.run_oracle(a);
  for (int t = 0; t < 40; ++t) {
    m.next_options(b);
    m.submit_choice(b, json::object());
  }
  check_same_posterior(m.snapshot(a).posterior, m.snapshot(b).posterior);
  CHECK(status_of([&] { m.run_oracle(m.create_session(human_request())); }) == 409);
}

TEST_CASE("a transcript replays to the identical posterior") {
  SessionManager m;
  const auto id = m.create_session(human_request(25, 31));
  testing::Gen g(61);
  for (int t = 0; t < 25; ++t) {
    m.next_options(id);
    m.submit_choice(id, {{"index", g.index(10)}});
  }
  const auto transcript = m.history(id);
  CHECK(transcript["history"].size() == 25);
  CHECK(transcript["history"][0]["posterior_means"].size() == 10);

  const auto replay = m.create_session(human_request(25, 31));
  for (const auto& e : transcript["history"]) {
    const auto opts = m.next_options(replay);
    for (std::size_t a = 0; a < 10; ++a) CHECK(opts["options"][a]["theta"] == e["options"][a]["theta"]);
    const auto res = m.submit_choice(replay, {{"index", e["choice"]}});
    CHECK(res["observation"] == e["observation"]);
  }
  check_same_posterior(m.snapshot(id).posterior, m.snapshot(replay).posterior);
}

TEST_CASE("sessions survive a restart with identical state") {
  const auto store = fresh_store("mobandit_sessions_roundtrip.jsonl");
  std::string human, oracle;
  json pending;
  {
    SessionManager m(store);
    human = m.create_session(human_request(20, 41));
    oracle = m.create_session(oracle_request(30, 42));
    for (int t = 0; t < 7; ++t) {
      m.next_options(human);
      m.submit_choice(human, {{"index", (t * 3) % 10}});
    }
    pending = m.next_options(human);
    m.run_oracle(oracle);
  }
  SessionManager restarted(store);
  CHECK(restarted.session_ids().size() == 2);
  const auto h = restarted.snapshot(human);
  CHECK(h.episode() == 7);
  CHECK(restarted.next_options(human) == pending);
  const auto o = restarted.snapshot(oracle);
  CHECK(o.finished());

  SessionManager reference;
  const auto ref = reference.create_session(human_request(20, 41));
  for (int t = 0; t < 7; ++t) {
    reference.next_options(ref);
    reference.submit_choice(ref, {{"index", (t * 3) % 10}});
  }
  check_same_posterior(h.posterior, reference.snapshot(ref).posterior);
  CHECK(h.history.size() == reference.snapshot(ref).history.size());
  for (std::size_t t = 0; t < h.history.size(); ++t) {
    CHECK(h.history[t].observation == reference.snapshot(ref).history[t].observation);
    CHECK(h.history[t].posterior_means == reference.snapshot(ref).history[t].posterior_means);
  }
}

TEST_CASE("a torn final record is ignored on restart") {
  const auto store = fresh_store("mobandit_sessions_torn.jsonl");
  std::string id;
  {
    SessionManager m(store);
    id = m.create_session(human_request(5, 43));
    m.next_options(id);
    m.submit_choice(id, {{"index", 1}});
  }
  {
    std::ofstream out(store, std::ios::app);
    out << R"({"op":"choice","id":")" << id;
  }
  SessionManager restarted(store);
  CHECK(restarted.snapshot(id).episode() == 1);
}

TEST_CASE("concurrent sessions are independent and deterministic") {
  SessionManager m;
  std::vector<std::string> ids;
  for (int k = 0; k < 8; ++k) ids.push_back(m.create_session(oracle_request(60, 100 + k % 2)));
  std::vector<std::thread> pool;
  std::atomic<int> errors{0};
  for (int w = 0; w < 4; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int t = 0; t < 60; ++t) {
          for (std::size_t k = w; k < ids.size(); k += 4) {
            m.next_options(ids[k]);
            m.submit_choice(ids[k], json::object());
            m.history(ids[k]);
          }
        }
      } catch (...) {
        ++errors;
      }
    });
  }
  for (auto& t : pool) t.join();
  CHECK(errors == 0);
  for (std::size_t k = 2; k < ids.size(); ++k) {
    check_same_posterior(m.snapshot(ids[k]).posterior, m.snapshot(ids[k % 2]).posterior);
  }
}

TEST_CASE("HTTP API on a live port") {
  SessionManager manager;
  httplib::Server server;
  register_routes(server, manager);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  auto health = client.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

  auto req = human_request(2, 51);
  req["reference_preference"] = kLinearPref;
  auto created = client.Post("/sessions", req.dump(), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const auto id = json::parse(created->body)["id"].get<std::string>();

  auto opts = client.Get("/sessions/" + id + "/options");
  REQUIRE(opts);
  CHECK(opts->status == 200);
  const auto payload = json::parse(opts->body);
  CHECK(payload["episode"] == 1);
  CHECK(payload["options"].size() == 10);
  auto front = client.Get("/sessions/" + id + "/options?front_only=true");
  REQUIRE(front);
  CHECK(json::parse(front->body)["options"].size() <= 10);

  auto bad = client.Post("/sessions/" + id + "/choice", R"({"index": 99})", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body)["code"] == "bad_request");

  auto chosen = client.Post("/sessions/" + id + "/choice", R"({"index": 8, "episode": 1})", "application/json");
  REQUIRE(chosen);
  CHECK(chosen->status == 200);
  const auto result = json::parse(chosen->body);
  CHECK(result["observation"].size() == 2);
  CHECK(result["cum_regret"] == 0.0);
  auto again = client.Post("/sessions/" + id + "/choice", R"({"index": 8, "episode": 1})", "application/json");
  REQUIRE(again);
  CHECK(json::parse(again->body) == result);

  client.Get("/sessions/" + id + "/options");
  client.Post("/sessions/" + id + "/choice", R"({"index": 0})", "application/json");
  auto done = client.Get("/sessions/" + id + "/options");
  REQUIRE(done);
  CHECK(done->status == 409);
  CHECK(json::parse(done->body)["code"] == "conflict");

  auto hist = client.Get("/sessions/" + id + "/history");
  REQUIRE(hist);
  CHECK(json::parse(hist->body)["history"].size() == 2);

  auto missing = client.Get("/sessions/doesnotexist/history");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body)["code"] == "not_found");

  auto invalid = client.Post("/sessions", "{not json", "application/json");
  REQUIRE(invalid);
  CHECK(invalid->status == 400);

  auto oracle = client.Post("/sessions", oracle_request(25, 52).dump(), "application/json");
  REQUIRE(oracle);
  const auto oid = json::parse(oracle->body)["id"].get<std::string>();
  auto ran = client.Post("/sessions/" + oid + "/autorun", "", "application/json");
  REQUIRE(ran);
  CHECK(json::parse(ran->body)["episodes"] == 25);

  server.stop();
  worker.join();
}

TEST_CASE("golden dominance fixtures are current and agree with compare") {
  std::ifstream in(std::string(MOBANDIT_TEST_DATA) + "/fixtures/dominance_golden.json");
  REQUIRE(in);
  const json golden = json::parse(in);
  CHECK(dominance_fixtures(golden["request"], golden["payloads"].size()) == golden);
  for (const auto& p : golden["payloads"]) {
    std::vector<ObjectiveVector> thetas;
    for (const auto& o : p["options"]) thetas.emplace_back(o["theta"].get<std::vector<double>>());
    for (std::size_t a = 0; a < thetas.size(); ++a) {
      bool dominated = false;
      for (std::size_t b = 0; b < thetas.size(); ++b) {
        CHECK(p["relations"][a][b] == to_string(compare(thetas[a], thetas[b])));
        dominated = dominated || testing::oracle_dominates(thetas[b], thetas[a]);
      }
      CHECK(p["options"][a]["dominated"] == dominated);
    }
  }
}
