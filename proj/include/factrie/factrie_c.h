/* SPDX-License-Identifier: Apache-2.0 */

/*
 * C interface to the constraint engine, for hosts running the model in
 * another runtime (e.g. a Python sampling loop through ctypes or cffi).
 *
 * Functions returning int return FACTRIE_OK or one of the error codes below;
 * functions returning pointers return NULL on failure. In both cases
 * factrie_last_error() describes the failure of the last call on this thread.
 * Strings returned as char* are owned by the caller and must be released with
 * factrie_string_free.
 */

#ifndef FACTRIE_C_H
#define FACTRIE_C_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#pragma GCC visibility push(default)
#endif

enum {
  FACTRIE_OK = 0,
  FACTRIE_E_INPUT = 1,
  FACTRIE_E_MISSING_LABEL = 2,
  FACTRIE_E_UNRESOLVABLE_LABEL = 3,
  FACTRIE_E_MISSING_GOLD = 4,
  FACTRIE_E_TOKENIZER_MISMATCH = 5,
  FACTRIE_E_PREFIX_CONFLICT = 6,
  FACTRIE_E_UNKNOWN_PREFIX = 7,
  FACTRIE_E_ALREADY_CONSUMED = 8,
  FACTRIE_E_EXHAUSTED_BRANCH = 9,
  FACTRIE_E_ILLEGAL_TOKEN = 10,
  FACTRIE_E_ENGINE = 11,
  FACTRIE_E_BACKEND_WRITE = 12,
  FACTRIE_E_BACKEND_READ = 13,
  FACTRIE_E_SERIALIZATION = 14,
  FACTRIE_E_NOT_FOUND = 15,
  FACTRIE_E_CORRUPT_RECORD = 16,
  FACTRIE_E_UNSUPPORTED_VERSION = 17,
  FACTRIE_E_UNKNOWN = 99
};

typedef struct factrie_engine factrie_engine;
typedef struct factrie_session factrie_session;

/* Writes `vocab_size` scores for the next token after `context` into `logits`.
 * Returns 0 on success; anything else aborts the run with FACTRIE_E_ENGINE. */
typedef int (*factrie_logits_fn)(void* user, const uint32_t* context, size_t context_len, float* logits,
                                 size_t vocab_size);

const char* factrie_last_error(void);
const char* factrie_error_name(int code);
void factrie_string_free(char* s);

/* Opens an index and its vocabulary sidecar. `config_json` may be NULL or an
 * object with optional keys "trigger", "max_new_tokens", "preamble" (text). */
factrie_engine* factrie_engine_open(const char* index_path, const char* config_json);
void factrie_engine_close(factrie_engine* engine);

size_t factrie_vocab_size(const factrie_engine* engine);
/* Borrowed pointer, valid until the engine is closed. */
const char* factrie_fingerprint(const factrie_engine* engine);
uint32_t factrie_eos_token(void);

/* Tokenizes `text`. Writes at most `capacity` ids and always stores the full
 * count in `*count`, so a call with capacity 0 sizes the buffer. */
int factrie_encode(const factrie_engine* engine, const char* text, uint32_t* ids, size_t capacity, size_t* count);
char* factrie_decode(const factrie_engine* engine, const uint32_t* ids, size_t count);

factrie_session* factrie_session_create(const factrie_engine* engine);
factrie_session* factrie_session_fork(const factrie_session* session);
void factrie_session_free(factrie_session* session);

int factrie_session_is_constrained(const factrie_session* session);
size_t factrie_session_budget(const factrie_session* session);

/* Sets disallowed entries of `logits` to -infinity in place. Identity in
 * Normal mode. `count` must equal the vocabulary size. */
int factrie_session_mask(const factrie_session* session, float* logits, size_t count);
/* Allowed next tokens and their remaining leaf counts; sizing as in factrie_encode. */
int factrie_session_allowed(const factrie_session* session, uint32_t* tokens, uint64_t* leaves, size_t capacity,
                            size_t* count);
int factrie_session_step(factrie_session* session, uint32_t token);
/* {"facts":[{"text","start","end"}], "exhaustion":[...], "transitions", "tokens"} */
char* factrie_session_report_json(const factrie_session* session);

/* Runs one question end to end with the host model behind `fn`. `prompt_json`
 * is an object with "few_shot" (two strings) or "few_shot_path", and optional
 * "system_prompt", "beams", "max_new_tokens", "trigger", "relation_addendum".
 * Returns the transcript as JSON. */
char* factrie_run_question(const factrie_engine* engine, const char* question, const char* prompt_json,
                           factrie_logits_fn fn, void* user);

#if defined(__GNUC__)
#pragma GCC visibility pop
#endif

#ifdef __cplusplus
}
#endif

#endif
