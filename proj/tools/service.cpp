// SPDX-License-Identifier: Apache-2.0

#include "service.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <httplib.h>

#include "factrie/error.hpp"

namespace factrie::cli {

nlohmann::json logits_to_json(std::span<const float> logits) {
  auto j = nlohmann::json::array();
  for (float v : logits) {
    if (std::isinf(v) && v < 0) {
      j.push_back(nullptr);
    } else {
      j.push_back(v);
    }
  }
  return j;
}

std::vector<float> logits_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::InputError, "logits must be an array");
  std::vector<float> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (v.is_null()) {
      out.push_back(kMasked);
    } else if (v.is_number()) {
      out.push_back(v.get<float>());
    } else {
      throw Error(ErrorCode::InputError, "logits must be numbers or null");
    }
  }
  return out;
}

namespace {

nlohmann::json allowed_json(const ConstraintEngine& engine, const DecodingSession& s) {
  auto j = nlohmann::json::array();
  for (auto [token, leaves] : engine.allowed(s)) j.push_back({token, leaves});
  return j;
}

std::string_view mode_name(Mode m) { return m == Mode::Normal ? "normal" : "constrained"; }

struct UnknownSession {};

void reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

/// Runs a handler, turning failures into JSON error replies.
template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const UnknownSession&) {
      reply(res, 404, {{"error", "unknown session"}, {"code", "NotFound"}});
    } catch (const Error& e) {
      reply(res, 400, {{"error", e.what()}, {"code", std::string(to_string(e.code()))}});
    } catch (const nlohmann::json::exception& e) {
      reply(res, 400, {{"error", e.what()}, {"code", "InputError"}});
    }
  };
}

nlohmann::json body_of(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  return nlohmann::json::parse(req.body);
}

std::uint64_t id_of(const httplib::Request& req) { return std::stoull(req.matches[1].str()); }

}  // namespace

SessionServer::SessionServer(OpenedIndex index, EngineConfig cfg)
    : index_(std::move(index)),
      engine_(std::make_shared<ConstraintEngine>(index_.reader, index_.tokenizer, std::move(cfg))),
      server_(std::make_unique<httplib::Server>()) {
  routes();
}

SessionServer::~SessionServer() { stop(); }

int SessionServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

bool SessionServer::serve() { return server_->listen_after_bind(); }

void SessionServer::stop() {
  if (server_) server_->stop();
}

std::size_t SessionServer::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

void SessionServer::routes() {
  auto& svr = *server_;
  const auto& engine = *engine_;
  const auto& tok = *index_.tokenizer;

  // Copies a session out, runs `f` on it and stores it back under the lock,
  // so engine work runs unlocked.
  auto with_session = [this](std::uint64_t id, auto f) {
    DecodingSession s;
    {
      std::lock_guard lock(mu_);
      auto it = sessions_.find(id);
      if (it == sessions_.end()) throw UnknownSession{};
      s = it->second;
    }
    return f(s);
  };
  auto store = [this](std::uint64_t id, DecodingSession s) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw UnknownSession{};
    it->second = std::move(s);
  };

  svr.Get("/info", guarded([&engine, &tok](const httplib::Request&, httplib::Response& res) {
            reply(res, 200,
                  {{"vocab_size", tok.vocab_size()},
                   {"fingerprint", tok.fingerprint()},
                   {"eos", Tokenizer::kEos},
                   {"trigger", engine.config().trigger},
                   {"max_new_tokens", engine.config().max_new_tokens}});
          }));

  svr.Post("/encode", guarded([&tok](const httplib::Request& req, httplib::Response& res) {
             reply(res, 200, {{"ids", tok.encode(body_of(req).at("text").get<std::string>())}});
           }));

  svr.Post("/decode", guarded([&tok](const httplib::Request& req, httplib::Response& res) {
             auto ids = body_of(req).at("ids").get<TokenSequence>();
             for (TokenId id : ids) {
               if (id >= tok.vocab_size()) throw Error(ErrorCode::InputError, "token id outside the vocabulary");
             }
             reply(res, 200, {{"text", tok.decode(ids)}});
           }));

  svr.Post("/sessions", guarded([this, &engine](const httplib::Request&, httplib::Response& res) {
             auto s = engine.create_session();
             std::lock_guard lock(mu_);
             std::uint64_t id = next_id_++;
             sessions_.emplace(id, std::move(s));
             reply(res, 201, {{"id", id}});
           }));

  svr.Post(R"(/sessions/(\d+)/fork)", guarded([this, &engine, with_session](const httplib::Request& req,
                                                                           httplib::Response& res) {
             auto k = body_of(req).value("k", std::size_t{1});
             auto forks = with_session(id_of(req), [&](DecodingSession& s) { return engine.fork_beams(s, k); });
             std::vector<std::uint64_t> ids;
             std::lock_guard lock(mu_);
             for (auto& f : forks) {
               ids.push_back(next_id_);
               sessions_.emplace(next_id_++, std::move(f));
             }
             reply(res, 201, {{"ids", ids}});
           }));

  svr.Delete(R"(/sessions/(\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
               std::lock_guard lock(mu_);
               if (sessions_.erase(id_of(req)) == 0) throw UnknownSession{};
               reply(res, 200, {{"deleted", true}});
             }));

  svr.Post(R"(/sessions/(\d+)/mask)", guarded([&engine, with_session](const httplib::Request& req,
                                                                     httplib::Response& res) {
             auto logits = logits_from_json(body_of(req).at("logits"));
             with_session(id_of(req), [&](DecodingSession& s) {
               engine.mask_in_place(s, logits);
               reply(res, 200, {{"logits", logits_to_json(logits)}, {"mode", mode_name(s.mode())}});
               return 0;
             });
           }));

  svr.Post(R"(/sessions/(\d+)/allowed)", guarded([&engine, with_session](const httplib::Request& req,
                                                                        httplib::Response& res) {
             with_session(id_of(req), [&](DecodingSession& s) {
               reply(res, 200, {{"allowed", allowed_json(engine, s)}, {"mode", mode_name(s.mode())}});
               return 0;
             });
           }));

  svr.Post(R"(/sessions/(\d+)/step)", guarded([&engine, with_session, store](const httplib::Request& req,
                                                                            httplib::Response& res) {
             auto token = body_of(req).at("token").get<TokenId>();
             auto id = id_of(req);
             with_session(id, [&](DecodingSession& s) {
               engine.step(s, token);
               reply(res, 200, {{"mode", mode_name(s.mode())}, {"budget", s.budget()}});
               store(id, s);
               return 0;
             });
           }));

  svr.Get(R"(/sessions/(\d+)/report)", guarded([with_session](const httplib::Request& req,
                                                              httplib::Response& res) {
            with_session(id_of(req), [&](DecodingSession& s) {
              reply(res, 200, nlohmann::json(s.report()));
              return 0;
            });
          }));
}

std::size_t export_golden(const OpenedIndex& index, const GoldenOptions& opts, const std::filesystem::path& out) {
  ConstraintEngine engine(index.reader, index.tokenizer);
  const auto& tok = *index.tokenizer;
  const auto& source = *index.reader;
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<float> score(0.0f, 4.0f);
  std::uniform_int_distribution<unsigned> percent(0, 99);

  std::ofstream file(out, std::ios::trunc);
  if (!file) throw Error(ErrorCode::InputError, "cannot write " + out.string());

  const TokenSequence trigger = tok.encode(engine.config().trigger);
  const TokenSequence newline = tok.encode("\n");

  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  // Random descent from the root; stops above a leaf unless `complete`.
  auto walk = [&](bool complete) {
    TokenSequence path;
    auto node = source.root();
    std::size_t stop_after = complete ? SIZE_MAX : pick(12);
    while (!node->is_leaf()) {
      auto tokens = node->child_tokens();
      TokenId t = tokens[pick(tokens.size())];
      auto next = source.child(node, t);
      if (!complete && (next->is_leaf() || path.size() >= stop_after)) break;
      path.push_back(t);
      node = std::move(next);
    }
    return path;
  };

  std::size_t written = 0;
  std::vector<float> logits(tok.vocab_size());
  for (std::size_t i = 0; written < opts.count && i < 20 * opts.count; ++i) {
    bool normal = percent(rng) < opts.normal_percent;
    TokenSequence steps;
    TokenSequence prefix;
    if (normal) {
      steps = tok.encode("Question: fixture " + std::to_string(i) + "\n");
    } else {
      if (percent(rng) < opts.consumed_percent) {
        steps = trigger;
        auto fact = walk(true);
        steps.insert(steps.end(), fact.begin(), fact.end());
        steps.insert(steps.end(), newline.begin(), newline.end());
      }
      steps.insert(steps.end(), trigger.begin(), trigger.end());
      prefix = walk(false);
      steps.insert(steps.end(), prefix.begin(), prefix.end());
    }

    // The replay can dead-end when the fact consumed first was the only one
    // below the drawn prefix; such draws are skipped.
    auto s = engine.create_session();
    try {
      for (TokenId t : steps) engine.step(s, t);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::IllegalToken) throw;
      continue;
    }
    auto allowed = engine.allowed(s);
    if (!normal && allowed.empty()) continue;

    for (auto& v : logits) v = score(rng);
    auto masked = engine.mask_logits(s, logits);
    auto allowed_j = nlohmann::json::array();
    for (auto [token, leaves] : allowed) allowed_j.push_back({token, leaves});
    nlohmann::json line = {{"mode", mode_name(s.mode())},
                           {"steps", steps},
                           {"prefix", s.cursor()},
                           {"logits", logits_to_json(logits)},
                           {"masked", logits_to_json(masked)},
                           {"allowed", allowed_j}};
    file << line.dump() << '\n';
    ++written;
  }
  if (!file) throw Error(ErrorCode::InputError, "failed writing " + out.string());
  return written;
}

}  // namespace factrie::cli
