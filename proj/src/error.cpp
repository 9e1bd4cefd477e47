// SPDX-License-Identifier: Apache-2.0

#include "factrie/error.hpp"

namespace factrie {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InputError: return "InputError";
    case ErrorCode::MissingLabel: return "MissingLabel";
    case ErrorCode::UnresolvableLabel: return "UnresolvableLabel";
    case ErrorCode::MissingGold: return "MissingGold";
    case ErrorCode::TokenizerMismatch: return "TokenizerMismatch";
    case ErrorCode::PrefixConflict: return "PrefixConflict";
    case ErrorCode::UnknownPrefix: return "UnknownPrefix";
    case ErrorCode::AlreadyConsumed: return "AlreadyConsumed";
    case ErrorCode::ExhaustedBranch: return "ExhaustedBranch";
    case ErrorCode::IllegalToken: return "IllegalToken";
    case ErrorCode::EngineError: return "EngineError";
    case ErrorCode::BackendWrite: return "BackendWrite";
    case ErrorCode::BackendRead: return "BackendRead";
    case ErrorCode::SerializationFailure: return "SerializationFailure";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::CorruptRecord: return "CorruptRecord";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InputError:
    case ErrorCode::MissingLabel:
    case ErrorCode::UnresolvableLabel:
    case ErrorCode::MissingGold:
    case ErrorCode::TokenizerMismatch:
    case ErrorCode::UnknownPrefix:
    case ErrorCode::NotFound:
      return 2;
    case ErrorCode::BackendRead:
    case ErrorCode::BackendWrite:
    case ErrorCode::SerializationFailure:
    case ErrorCode::CorruptRecord:
    case ErrorCode::UnsupportedVersion:
      return 3;
    case ErrorCode::PrefixConflict:
    case ErrorCode::AlreadyConsumed:
    case ErrorCode::ExhaustedBranch:
    case ErrorCode::IllegalToken:
    case ErrorCode::EngineError:
      return 4;
  }
  return 4;
}

}  // namespace factrie
