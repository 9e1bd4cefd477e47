// SPDX-License-Identifier: Apache-2.0

#include "factrie/factrie_c.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include <json.hpp>

#include "factrie/engine.hpp"
#include "factrie/error.hpp"
#include "factrie/orchestrator.hpp"
#include "factrie/pipeline.hpp"

struct factrie_engine {
  factrie::OpenedIndex index;
  std::shared_ptr<factrie::ConstraintEngine> engine;
};

struct factrie_session {
  std::shared_ptr<factrie::ConstraintEngine> engine;
  factrie::DecodingSession session;
};

namespace {

using factrie::Error;
using factrie::ErrorCode;

static_assert(FACTRIE_E_INPUT == static_cast<int>(ErrorCode::InputError) + 1);
static_assert(FACTRIE_E_UNSUPPORTED_VERSION == static_cast<int>(ErrorCode::UnsupportedVersion) + 1);

thread_local std::string last_error;

int fail(int code, const char* what) {
  last_error = what;
  return code;
}

/// Runs `fn`, translating exceptions into a status code and the thread's last error.
template <class Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return FACTRIE_OK;
  } catch (const Error& e) {
    return fail(static_cast<int>(e.code()) + 1, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(FACTRIE_E_INPUT, e.what());
  } catch (const std::exception& e) {
    return fail(FACTRIE_E_UNKNOWN, e.what());
  } catch (...) {
    return fail(FACTRIE_E_UNKNOWN, "unknown failure");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) throw Error(ErrorCode::InputError, std::string(what) + " must not be null");
}

nlohmann::json parse_object(const char* text) {
  if (!text || !*text) return nlohmann::json::object();
  auto j = nlohmann::json::parse(text);
  if (!j.is_object()) throw Error(ErrorCode::InputError, "configuration must be a JSON object");
  return j;
}

}  // namespace

extern "C" {

const char* factrie_last_error(void) { return last_error.c_str(); }

const char* factrie_error_name(int code) {
  if (code == FACTRIE_OK) return "OK";
  if (code >= FACTRIE_E_INPUT && code <= FACTRIE_E_UNSUPPORTED_VERSION) {
    return factrie::to_string(static_cast<ErrorCode>(code - 1)).data();
  }
  return "Unknown";
}

void factrie_string_free(char* s) { std::free(s); }

factrie_engine* factrie_engine_open(const char* index_path, const char* config_json) {
  std::unique_ptr<factrie_engine> out;
  guarded([&] {
    require(index_path, "index_path");
    auto cfg_json = parse_object(config_json);
    auto e = std::make_unique<factrie_engine>();
    e->index = factrie::open_index(index_path);
    factrie::EngineConfig cfg;
    cfg.trigger = cfg_json.value("trigger", cfg.trigger);
    cfg.max_new_tokens = cfg_json.value("max_new_tokens", cfg.max_new_tokens);
    if (cfg_json.contains("preamble")) cfg.preamble = e->index.tokenizer->encode(cfg_json["preamble"].get<std::string>());
    e->engine = std::make_shared<factrie::ConstraintEngine>(e->index.reader, e->index.tokenizer, cfg);
    out = std::move(e);
  });
  return out.release();
}

void factrie_engine_close(factrie_engine* engine) { delete engine; }

size_t factrie_vocab_size(const factrie_engine* engine) { return engine ? engine->index.tokenizer->vocab_size() : 0; }

const char* factrie_fingerprint(const factrie_engine* engine) {
  return engine ? engine->index.tokenizer->fingerprint().c_str() : "";
}

uint32_t factrie_eos_token(void) { return factrie::Tokenizer::kEos; }

int factrie_encode(const factrie_engine* engine, const char* text, uint32_t* ids, size_t capacity, size_t* count) {
  return guarded([&] {
    require(engine, "engine");
    require(text, "text");
    require(count, "count");
    auto seq = engine->index.tokenizer->encode(text);
    *count = seq.size();
    if (capacity > 0) require(ids, "ids");
    std::memcpy(ids, seq.data(), std::min(capacity, seq.size()) * sizeof(uint32_t));
  });
}

char* factrie_decode(const factrie_engine* engine, const uint32_t* ids, size_t count) {
  char* out = nullptr;
  guarded([&] {
    require(engine, "engine");
    if (count > 0) require(ids, "ids");
    for (size_t i = 0; i < count; ++i) {
      if (ids[i] >= engine->index.tokenizer->vocab_size()) {
        throw Error(ErrorCode::InputError, "token " + std::to_string(ids[i]) + " outside the vocabulary");
      }
    }
    out = dup_string(engine->index.tokenizer->decode(factrie::TokenSpan(ids, count)));
  });
  return out;
}

factrie_session* factrie_session_create(const factrie_engine* engine) {
  factrie_session* out = nullptr;
  guarded([&] {
    require(engine, "engine");
    out = new factrie_session{engine->engine, engine->engine->create_session()};
  });
  return out;
}

factrie_session* factrie_session_fork(const factrie_session* session) {
  factrie_session* out = nullptr;
  guarded([&] {
    require(session, "session");
    out = new factrie_session{session->engine, session->session};
  });
  return out;
}

void factrie_session_free(factrie_session* session) { delete session; }

int factrie_session_is_constrained(const factrie_session* session) {
  return session && session->session.mode() == factrie::Mode::Constrained ? 1 : 0;
}

size_t factrie_session_budget(const factrie_session* session) { return session ? session->session.budget() : 0; }

int factrie_session_mask(const factrie_session* session, float* logits, size_t count) {
  return guarded([&] {
    require(session, "session");
    if (count > 0) require(logits, "logits");
    session->engine->mask_in_place(session->session, std::span<float>(logits, count));
  });
}

int factrie_session_allowed(const factrie_session* session, uint32_t* tokens, uint64_t* leaves, size_t capacity,
                            size_t* count) {
  return guarded([&] {
    require(session, "session");
    require(count, "count");
    auto allow = session->engine->allowed(session->session);
    *count = allow.size();
    for (size_t i = 0; i < std::min(capacity, allow.size()); ++i) {
      if (tokens) tokens[i] = allow[i].first;
      if (leaves) leaves[i] = allow[i].second;
    }
  });
}

int factrie_session_step(factrie_session* session, uint32_t token) {
  return guarded([&] {
    require(session, "session");
    session->engine->step(session->session, token);
  });
}

char* factrie_session_report_json(const factrie_session* session) {
  char* out = nullptr;
  guarded([&] {
    require(session, "session");
    out = dup_string(nlohmann::json(session->session.report()).dump());
  });
  return out;
}

char* factrie_run_question(const factrie_engine* engine, const char* question, const char* prompt_json,
                           factrie_logits_fn fn, void* user) {
  char* out = nullptr;
  guarded([&] {
    require(engine, "engine");
    require(question, "question");
    require(reinterpret_cast<const void*>(fn), "fn");
    auto j = parse_object(prompt_json);
    factrie::PromptConfig cfg;
    if (j.contains("few_shot_path")) {
      cfg.few_shot = factrie::load_few_shot(j["few_shot_path"].get<std::string>());
    } else {
      cfg.few_shot = j.value("few_shot", std::vector<std::string>{});
    }
    cfg.system_prompt = j.value("system_prompt", cfg.system_prompt);
    cfg.beams = j.value("beams", cfg.beams);
    cfg.max_new_tokens = j.value("max_new_tokens", cfg.max_new_tokens);
    cfg.trigger = j.value("trigger", engine->engine->config().trigger);
    cfg.relation_addendum = j.value("relation_addendum", false);
    cfg.preamble = engine->engine->config().preamble;

    const auto& tok = engine->index.tokenizer;
    factrie::CallbackModel model(tok->vocab_size(), tok->fingerprint(),
                                 [&](factrie::TokenSpan ctx, std::vector<float>& logits) {
                                   if (fn(user, ctx.data(), ctx.size(), logits.data(), logits.size()) != 0) {
                                     throw Error(ErrorCode::EngineError, "host model callback failed");
                                   }
                                 });
    auto t = factrie::run_question(question, model, engine->index.reader, tok, cfg);
    out = dup_string(nlohmann::json(t).dump());
  });
  return out;
}

}  // extern "C"
