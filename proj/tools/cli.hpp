// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "factrie/engine.hpp"
#include "factrie/tokenizer.hpp"

namespace factrie::cli {

/// Runs one command line (without the program name) and returns the exit
/// code: 0 success, 2 input error, 3 index corruption, 4 engine error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// A query prefix resolved against the index by its text.
struct PrefixResolution {
  /// Token path of the deepest node the text reaches exactly.
  std::optional<TokenSequence> tokens;
  /// Text left over inside the next piece; rows are filtered by it.
  std::string partial;
  /// Longest leading part of the text that spells a valid prefix.
  std::string nearest;
};

/// Matches `text` (a fact prefix, leading space optional) against the pieces
/// along tree paths, so the result does not depend on how the text alone
/// would tokenize.
PrefixResolution resolve_text_prefix(const FactSource& source, const Tokenizer& tokenizer, std::string_view text);

}  // namespace factrie::cli
