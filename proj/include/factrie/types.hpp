// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace factrie {

using TokenId = std::uint32_t;
using TokenSequence = std::vector<TokenId>;
using TokenSpan = std::span<const TokenId>;

std::string format_tokens(TokenSpan tokens);

}  // namespace factrie
