// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "factrie/engine.hpp"
#include "factrie/pipeline.hpp"

namespace httplib {
class Server;
}

namespace factrie::cli {

/// Scores cross process boundaries as JSON arrays in which -inf is null.
nlohmann::json logits_to_json(std::span<const float> logits);
std::vector<float> logits_from_json(const nlohmann::json& j);

/**
 * Engine sessions served over HTTP on a local socket, for hosts that cannot
 * load the C library. All bodies are JSON.
 *
 *   GET    /info                  vocab_size, fingerprint, eos, trigger, max_new_tokens
 *   POST   /encode  {text}        {ids}
 *   POST   /decode  {ids}         {text}
 *   POST   /sessions              {id}
 *   POST   /sessions/{id}/fork    {k}        {ids}
 *   DELETE /sessions/{id}
 *   POST   /sessions/{id}/mask    {logits}   {logits, mode}
 *   POST   /sessions/{id}/allowed            {allowed: [[token, leaves]...]}
 *   POST   /sessions/{id}/step    {token}    {mode, budget}
 *   GET    /sessions/{id}/report             session report
 *
 * Failures answer 404 for unknown sessions and 400 otherwise, with body
 * {"error": message, "code": error name}.
 */
class SessionServer {
 public:
  SessionServer(OpenedIndex index, EngineConfig cfg = {});
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  /// Binds without serving yet; port 0 picks a free port. Returns the port or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Requires a successful bind().
  bool serve();
  void stop();

  std::size_t session_count() const;

 private:
  void routes();

  OpenedIndex index_;
  std::shared_ptr<ConstraintEngine> engine_;
  std::unique_ptr<httplib::Server> server_;
  mutable std::mutex mu_;
  std::map<std::uint64_t, DecodingSession> sessions_;
  std::uint64_t next_id_ = 1;
};

struct GoldenOptions {
  std::size_t count = 1000;
  std::uint64_t seed = 1;
  /// Share of fixtures taken in Normal mode, in percent.
  unsigned normal_percent = 10;
  /// Share of Constrained fixtures replayed after one complete fact, in percent.
  unsigned consumed_percent = 25;
};

/**
 * Writes masking fixtures as JSON lines:
 *   {"mode", "steps", "prefix", "logits", "masked", "allowed"}
 * Replaying `steps` on a fresh session with the default trigger reaches the
 * fixture's state; `prefix` is the fact cursor at that point. `masked` is
 * the engine's output for `logits` (null for -inf) and `allowed` lists
 * [token, leaves] pairs. Returns the number of lines written.
 */
std::size_t export_golden(const OpenedIndex& index, const GoldenOptions& opts, const std::filesystem::path& out);

}  // namespace factrie::cli
