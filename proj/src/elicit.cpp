#include "mobandit/elicit.hpp"

#include <fstream>
#include <random>

#include "httplib.h"
#include "mobandit/rng.hpp"

namespace mobandit::elicit {

namespace {

using nlohmann::json;

ServiceError bad_request(const std::string& message) { return ServiceError(400, "bad_request", message); }
ServiceError not_found(const std::string& message) { return ServiceError(404, "not_found", message); }
ServiceError conflict(const std::string& message) { return ServiceError(409, "conflict", message); }

std::string hex32(std::uint32_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(8, '0');
  for (int i = 7; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
  return out;
}

json vector_json(const ObjectiveVector& x) { return x.values(); }

std::optional<std::uint64_t> read_episode(const json& body) {
  if (!body.contains("episode") || body["episode"].is_null()) return std::nullopt;
  if (!body["episode"].is_number_unsigned() && !body["episode"].is_number_integer()) {
    throw bad_request("'episode' must be an integer");
  }
  const auto t = body["episode"].get<std::int64_t>();
  if (t < 1) throw bad_request("'episode' must be >= 1");
  return static_cast<std::uint64_t>(t);
}

json choice_response(const Session& s, const HistoryEntry& e) {
  json out = {{"episode", e.episode},
              {"action", s.environment.actions()[e.choice].name},
              {"index", e.choice},
              {"observation", vector_json(e.observation)},
              {"status", e.episode >= s.horizon ? "finished" : "active"}};
  if (e.cum_regret) out["cum_regret"] = *e.cum_regret;
  if (e.episode >= s.horizon) {
    json summary = {{"episodes", s.history.size()}};
    if (e.cum_regret) summary["cum_regret"] = *e.cum_regret;
    out["summary"] = summary;
  }
  return out;
}

}  // namespace

Session make_session(const std::string& id, const json& request) {
  if (!request.is_object()) throw bad_request("request body must be a JSON object");
  try {
    EnvironmentSpec env = environment_from_json(request.at("env"));
    const auto mode = request.value("mode", std::string("human"));
    if (mode != "human" && mode != "scripted_oracle") throw bad_request("mode must be 'human' or 'scripted_oracle'");
    if (!request.contains("horizon") || !request["horizon"].is_number_integer()) {
      throw bad_request("'horizon' must be an integer");
    }
    const auto horizon = request["horizon"].get<std::int64_t>();
    if (horizon < 1) throw bad_request("horizon must be >= 1");
    if (horizon > std::int64_t{0xFFFFFFFF}) throw bad_request("horizon too large");
    if (!request.contains("seed") || !request["seed"].is_number_unsigned()) {
      throw bad_request("'seed' must be a nonnegative integer");
    }

    std::optional<PreferenceSpec> oracle;
    if (mode == "scripted_oracle") {
      if (!request.contains("preference")) throw bad_request("scripted_oracle mode needs a 'preference'");
      oracle = preference_from_json(request["preference"], env.dimension());
    }
    std::optional<PreferenceSpec> reference;
    if (request.contains("reference_preference")) {
      reference = preference_from_json(request["reference_preference"], env.dimension());
    } else {
      reference = oracle;
    }
    std::optional<GapTable> gaps;
    if (reference) gaps = gap_table(*reference, env.actions());

    const std::size_t n = env.actions().size();
    const std::size_t d = env.dimension();
    return Session{id,
                   request,
                   std::move(env),
                   std::move(oracle),
                   std::move(reference),
                   std::move(gaps),
                   static_cast<std::uint64_t>(horizon),
                   request["seed"].get<std::uint64_t>(),
                   PosteriorState(n, d),
                   std::nullopt,
                   {},
                   0.0};
  } catch (const ConfigError& e) {
    throw bad_request(e.what());
  } catch (const json::exception& e) {
    throw bad_request(std::string("invalid session request: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw bad_request(e.what());
  } catch (const std::domain_error& e) {
    throw bad_request(e.what());
  }
}

const std::vector<ObjectiveVector>& present(Session& s) {
  if (s.finished()) throw conflict("session is finished");
  if (!s.pending) s.pending = sample_thetas(s.posterior, s.draw_key(s.episode() + 1));
  return *s.pending;
}

std::size_t oracle_choice(const Session& s) {
  if (!s.oracle) throw conflict("session has no scripted oracle");
  if (!s.pending) throw conflict("no pending presentation");
  return choose_preferred(*s.pending, *s.oracle, s.draw_key(s.episode() + 1)).action;
}

const HistoryEntry& apply_choice(Session& s, std::size_t index) {
  if (s.finished()) throw conflict("session is finished");
  if (!s.pending) throw conflict("no pending presentation");
  if (index >= s.environment.actions().size()) throw bad_request("choice index out of range");

  const std::uint64_t t = s.episode() + 1;
  Observation obs = sample_outcome(s.environment, index, s.noise_stream(), t);
  s.posterior.update(index, obs.values);

  HistoryEntry e;
  e.episode = t;
  e.options = std::move(*s.pending);
  s.pending.reset();
  e.choice = index;
  e.observation = std::move(obs.values);
  for (std::size_t a = 0; a < s.posterior.n_actions(); ++a) {
    const Eigen::VectorXd m = posterior_params(s.posterior, a).mean;
    e.posterior_means.emplace_back(std::vector<double>(m.data(), m.data() + m.size()));
  }
  if (s.gaps) {
    s.cum_regret += s.gaps->gaps[index];
    e.cum_regret = s.cum_regret;
  }
  s.history.push_back(std::move(e));
  return s.history.back();
}

json options_json(const Session& s, bool front_only) {
  if (!s.pending) throw conflict("no pending presentation");
  const auto& thetas = *s.pending;
  const auto front = pareto_front(thetas);
  std::vector<bool> on_front(thetas.size(), false);
  for (auto i : front) on_front[i] = true;
  json options = json::array();
  for (std::size_t a = 0; a < thetas.size(); ++a) {
    if (front_only && !on_front[a]) continue;
    options.push_back({{"action", s.environment.actions()[a].name},
                       {"index", a},
                       {"theta", vector_json(thetas[a])},
                       {"dominated", !on_front[a]}});
  }
  return {{"episode", s.episode() + 1}, {"options", options}};
}

json entry_json(const Session& s, const HistoryEntry& e) {
  json options = json::array();
  for (std::size_t a = 0; a < e.options.size(); ++a) {
    options.push_back({{"action", s.environment.actions()[a].name}, {"index", a}, {"theta", vector_json(e.options[a])}});
  }
  json means = json::array();
  for (const auto& m : e.posterior_means) means.push_back(vector_json(m));
  json out = {{"episode", e.episode},
              {"options", options},
              {"choice", e.choice},
              {"action", s.environment.actions()[e.choice].name},
              {"observation", vector_json(e.observation)},
              {"posterior_means", means}};
  if (e.cum_regret) out["cum_regret"] = *e.cum_regret;
  return out;
}

json history_json(const Session& s) {
  json entries = json::array();
  for (const auto& e : s.history) entries.push_back(entry_json(s, e));
  json out = {{"id", s.id},
              {"mode", s.scripted() ? "scripted_oracle" : "human"},
              {"horizon", s.horizon},
              {"seed", s.seed},
              {"episode", s.episode()},
              {"status", s.finished() ? "finished" : "active"},
              {"actions", to_json(s.environment.actions())},
              {"history", entries}};
  if (s.gaps) out["cum_regret"] = s.cum_regret;
  return out;
}

json dominance_fixtures(const json& request, std::size_t rounds) {
  Session s = make_session("fixture", request);
  json payloads = json::array();
  for (std::size_t k = 0; k < rounds && !s.finished(); ++k) {
    const auto& thetas = present(s);
    json relations = json::array();
    for (const auto& x : thetas) {
      json row = json::array();
      for (const auto& y : thetas) row.push_back(to_string(compare(x, y)));
      relations.push_back(row);
    }
    json payload = options_json(s, false);
    payload["relations"] = relations;
    payloads.push_back(payload);
    apply_choice(s, s.scripted() ? oracle_choice(s) : k % thetas.size());
  }
  return {{"request", request}, {"payloads", payloads}};
}

SessionStore::SessionStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream touch(path_, std::ios::app);
  if (!touch) throw std::runtime_error("cannot open session store '" + path_.string() + "'");
}

void SessionStore::append(const json& record) {
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  out << record.dump() << '\n';
  out.flush();
  if (!out) throw std::runtime_error("failed to append to session store '" + path_.string() + "'");
}

std::vector<json> SessionStore::load() const {
  std::ifstream in(path_, std::ios::binary);
  std::vector<json> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json record = json::parse(line, nullptr, false);
    // A torn final write leaves one unparseable trailing line.
    if (record.is_discarded()) {
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw std::runtime_error("corrupt record in session store '" + path_.string() + "'");
    }
    records.push_back(std::move(record));
  }
  return records;
}

SessionManager::SessionManager(std::optional<std::filesystem::path> store_path) {
  std::random_device rd;
  id_nonce_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  if (store_path) {
    store_ = std::make_unique<SessionStore>(*store_path);
    restore(store_->load());
  }
}

void SessionManager::restore(const std::vector<json>& records) {
  for (const auto& r : records) {
    const auto op = r.at("op").get<std::string>();
    const auto id = r.at("id").get<std::string>();
    if (op == "create") {
      sessions_[id] = std::make_shared<Entry>(make_session(id, r.at("request")));
    } else if (op == "choice") {
      auto it = sessions_.find(id);
      if (it == sessions_.end()) throw std::runtime_error("session store references unknown session " + id);
      Session& s = it->second->session;
      present(s);
      apply_choice(s, r.at("index").get<std::size_t>());
    } else {
      throw std::runtime_error("unknown session store op '" + op + "'");
    }
  }
}

std::string SessionManager::new_id() {
  const std::uint64_t c = id_counter_++;
  const auto block = rng::philox4x32({static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32), 0x1d, 0},
                                     {static_cast<std::uint32_t>(id_nonce_), static_cast<std::uint32_t>(id_nonce_ >> 32)});
  return hex32(block[0]) + hex32(block[1]) + hex32(block[2]) + hex32(block[3]);
}

std::shared_ptr<SessionManager::Entry> SessionManager::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw not_found("unknown session '" + id + "'");
  return it->second;
}

std::string SessionManager::create_session(const json& request) {
  json stored = request;
  if (stored.is_object() && !stored.contains("seed")) {
    std::random_device rd;
    stored["seed"] = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  std::unique_lock lock(sessions_mutex_);
  std::string id = new_id();
  while (sessions_.count(id)) id = new_id();
  auto entry = std::make_shared<Entry>(make_session(id, stored));
  if (store_) store_->append({{"op", "create"}, {"id", id}, {"request", stored}});
  sessions_.emplace(id, std::move(entry));
  return id;
}

json SessionManager::next_options(const std::string& id, bool front_only) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  present(entry->session);
  return options_json(entry->session, front_only);
}

json SessionManager::submit_choice(const std::string& id, const json& body) {
  if (!body.is_object()) throw bad_request("request body must be a JSON object");
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  Session& s = entry->session;

  const auto episode = read_episode(body);
  std::optional<std::size_t> index;
  if (body.contains("index") && !body["index"].is_null()) {
    if (!body["index"].is_number_integer()) throw bad_request("'index' must be an integer");
    const auto k = body["index"].get<std::int64_t>();
    if (k < 0) throw bad_request("choice index out of range");
    index = static_cast<std::size_t>(k);
  }

  // A retried submission for an already-played episode returns the recorded result.
  if (episode && *episode <= s.episode()) {
    const HistoryEntry& e = s.history[*episode - 1];
    if (index && *index != e.choice) throw conflict("episode " + std::to_string(*episode) + " was already decided");
    return choice_response(s, e);
  }
  if (s.finished()) throw conflict("session is finished");
  if (episode && *episode != s.episode() + 1) throw conflict("episode does not match the pending presentation");
  if (!s.pending) throw conflict("no pending presentation; request options first");

  if (s.scripted()) {
    const std::size_t pick = oracle_choice(s);
    if (index && *index != pick) throw conflict("scripted-oracle sessions choose their own option");
    index = pick;
  }
  if (!index) throw bad_request("'index' is required");
  if (*index >= s.environment.actions().size()) throw bad_request("choice index out of range");

  if (store_) store_->append({{"op", "choice"}, {"id", id}, {"index", *index}});
  return choice_response(s, apply_choice(s, *index));
}

json SessionManager::history(const std::string& id) const {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  return history_json(entry->session);
}

json SessionManager::run_oracle(const std::string& id) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  Session& s = entry->session;
  if (!s.scripted()) throw conflict("only scripted-oracle sessions can autorun");
  while (!s.finished()) {
    present(s);
    const std::size_t pick = oracle_choice(s);
    if (store_) store_->append({{"op", "choice"}, {"id", id}, {"index", pick}});
    apply_choice(s, pick);
  }
  json summary = {{"episodes", s.history.size()}, {"status", "finished"}};
  if (s.gaps) summary["cum_regret"] = s.cum_regret;
  return summary;
}

Session SessionManager::snapshot(const std::string& id) const {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  return entry->session;
}

std::vector<std::string> SessionManager::session_ids() const {
  std::shared_lock lock(sessions_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : sessions_) ids.push_back(id);
  return ids;
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ServiceError& e) {
      send_json(res, e.status(), {{"code", e.code()}, {"message", e.what()}});
    } catch (const json::exception& e) {
      send_json(res, 400, {{"code", "bad_request"}, {"message", e.what()}});
    } catch (const std::exception& e) {
      send_json(res, 500, {{"code", "internal"}, {"message", e.what()}});
    }
  };
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded()) throw bad_request("request body is not valid JSON");
  return body;
}

bool query_flag(const httplib::Request& req, const std::string& name) {
  if (!req.has_param(name)) return false;
  const auto v = req.get_param_value(name);
  if (v == "true" || v == "1" || v.empty()) return true;
  if (v == "false" || v == "0") return false;
  throw bad_request("'" + name + "' must be true or false");
}

}  // namespace

void register_routes(httplib::Server& server, SessionManager& manager) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Get("/healthz", guarded([](const httplib::Request&, httplib::Response& res) {
               send_json(res, 200, {{"status", "ok"}});
             }));
  server.Post("/sessions", guarded([&manager](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 201, {{"id", manager.create_session(parse_body(req))}});
              }));
  server.Get("/sessions/:id/options", guarded([&manager](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, manager.next_options(req.path_params.at("id"), query_flag(req, "front_only")));
             }));
  server.Post("/sessions/:id/choice", guarded([&manager](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, manager.submit_choice(req.path_params.at("id"), parse_body(req)));
              }));
  server.Post("/sessions/:id/autorun", guarded([&manager](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, manager.run_oracle(req.path_params.at("id")));
              }));
  server.Get("/sessions/:id/history", guarded([&manager](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, manager.history(req.path_params.at("id")));
             }));
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      send_json(res, res.status, {{"code", res.status == 404 ? "not_found" : "error"}, {"message", "no such route"}});
    }
  });
}

}  // namespace mobandit::elicit
