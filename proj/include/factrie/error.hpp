// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace factrie {

enum class ErrorCode {
  // input / data problems
  InputError,
  MissingLabel,
  UnresolvableLabel,
  MissingGold,
  TokenizerMismatch,
  // trie and engine
  PrefixConflict,
  UnknownPrefix,
  AlreadyConsumed,
  ExhaustedBranch,
  IllegalToken,
  EngineError,
  // storage
  BackendWrite,
  BackendRead,
  SerializationFailure,
  NotFound,
  CorruptRecord,
  UnsupportedVersion,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Process exit code for an error category: 2 input, 3 index corruption, 4 engine.
int exit_code_for(ErrorCode code) noexcept;

}  // namespace factrie
