#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "mobandit/environments.hpp"
#include "mobandit/policies.hpp"
#include "mobandit/preferences.hpp"

namespace httplib {
class Server;
}

namespace mobandit::elicit {

/// Error surfaced to clients as {"code": ..., "message": ...}.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}

  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

struct HistoryEntry {
  std::uint64_t episode = 0;
  std::vector<ObjectiveVector> options;  // theta_a(t) presented
  std::size_t choice = 0;
  ObjectiveVector observation;
  std::vector<ObjectiveVector> posterior_means;  // after the update
  std::optional<double> cum_regret;
};

/// One elicitation session. The episode counter is history.size(); the
/// presentation for episode t is drawn from the session's own posterior.
struct Session {
  std::string id;
  nlohmann::json request;
  EnvironmentSpec environment;
  std::optional<PreferenceSpec> oracle;     // scripted-oracle mode when set
  std::optional<PreferenceSpec> reference;  // enables regret reporting
  std::optional<GapTable> gaps;
  std::uint64_t horizon = 1;
  std::uint64_t seed = 0;
  PosteriorState posterior;
  std::optional<std::vector<ObjectiveVector>> pending;
  std::vector<HistoryEntry> history;
  double cum_regret = 0.0;

  bool scripted() const { return oracle.has_value(); }
  std::uint64_t episode() const { return history.size(); }
  bool finished() const { return history.size() >= horizon; }
  DrawKey draw_key(std::uint64_t t) const { return DrawKey{seed, 0, t}; }
  NoiseStream noise_stream() const { return NoiseStream{seed, 0}; }
};

/// Builds a session from a create request; throws ServiceError(400) on
/// invalid input. The request must carry a seed.
Session make_session(const std::string& id, const nlohmann::json& request);

/// Samples (or returns the stored) presentation for the next episode.
const std::vector<ObjectiveVector>& present(Session& s);

/// The scripted oracle's pick among the pending presentation.
std::size_t oracle_choice(const Session& s);

/// Plays `index` against the pending presentation and records the episode.
/// Validates before mutating.
const HistoryEntry& apply_choice(Session& s, std::size_t index);

nlohmann::json options_json(const Session& s, bool front_only);
nlohmann::json entry_json(const Session& s, const HistoryEntry& e);
nlohmann::json history_json(const Session& s);

/// Golden fixtures for clients: the option payloads of a `rounds`-episode
/// scripted session, each with the pairwise core.compare relation matrix.
nlohmann::json dominance_fixtures(const nlohmann::json& request, std::size_t rounds);

/// Append-only JSON-lines log of session events; replayed on start-up.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path path);

  void append(const nlohmann::json& record);
  std::vector<nlohmann::json> load() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

class SessionManager {
 public:
  /// Without a store path sessions live in memory only.
  explicit SessionManager(std::optional<std::filesystem::path> store_path = std::nullopt);

  /// Body: {"env": {...}, "mode": "human"|"scripted_oracle", "preference": {...},
  ///        "reference_preference": {...}, "horizon": n, "seed": s}
  std::string create_session(const nlohmann::json& request);

  /// {"episode": t, "options": [{"action", "index", "theta", "dominated"}]}
  nlohmann::json next_options(const std::string& id, bool front_only = false);

  /// Body: {"index": k, "episode": t}. "index" may be omitted for scripted
  /// oracles; "episode" makes retries idempotent.
  nlohmann::json submit_choice(const std::string& id, const nlohmann::json& body);

  nlohmann::json history(const std::string& id) const;

  /// Scripted-oracle sessions only: play the remaining episodes.
  nlohmann::json run_oracle(const std::string& id);

  /// Copy of a session's state, for inspection.
  Session snapshot(const std::string& id) const;
  std::vector<std::string> session_ids() const;

 private:
  struct Entry {
    explicit Entry(Session s) : session(std::move(s)) {}
    mutable std::mutex mutex;
    Session session;
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  std::string new_id();
  void install(const std::string& id, const nlohmann::json& request);
  void restore(const std::vector<nlohmann::json>& records);

  std::unique_ptr<SessionStore> store_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t id_nonce_;
  std::uint64_t id_counter_ = 0;
};

/// Installs the HTTP+JSON routes on `server`.
void register_routes(httplib::Server& server, SessionManager& manager);

}  // namespace mobandit::elicit
