// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace factrie {

/// Seeded generator of knowledge-graph-like triples. Facts per subject follow
/// a heavy-tailed law, so most subjects have exactly one fact.
struct SynthConfig {
  std::uint64_t seed = 1;
  /// Triples that survive filtering; a few extra non-English literals are added.
  std::size_t facts = 1000;
  std::size_t predicates = 60;
  std::size_t words = 3000;
  /// Tail exponent of the facts-per-subject law; larger means more singletons.
  double tail = 1.5;
  std::size_t max_per_subject = 200;
};

struct SynthKB {
  std::vector<std::string> triple_lines;
  std::vector<std::string> label_lines;
};

SynthKB make_synthetic_kb(const SynthConfig& cfg);
void write_synthetic_kb(const SynthConfig& cfg, const std::filesystem::path& triples,
                        const std::filesystem::path& labels);
/// Verbalized, filtered and deduplicated fact texts of the same KB, sorted.
std::vector<std::string> synthetic_fact_texts(const SynthConfig& cfg);

}  // namespace factrie
