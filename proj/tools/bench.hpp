// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "factrie/pipeline.hpp"

namespace factrie::cli {

struct BenchOptions {
  std::size_t tokens = 4000;
  /// Artificial forward-pass delay of the scripted model.
  double delay_ms = 75.0;
  /// Constrained tokens generated (without delay) before measuring.
  std::size_t warmup = 64;
  std::uint64_t seed = 1;
  std::size_t window = 10;
};

struct BenchRow {
  double unconstrained_ms = 0;
  double constrained_ms = 0;
  double engine_ms = 0;  // mask + step inside the constrained token
  double unconstrained_avg_ms = 0;  // moving averages over the window
  double constrained_avg_ms = 0;
};

struct BenchResult {
  BenchOptions options;
  std::vector<BenchRow> rows;
  double unconstrained_total_s = 0;
  double constrained_total_s = 0;
  /// constrained / unconstrained; absent when nothing was generated.
  std::optional<double> ratio;
  double engine_p50_ms = 0;
  double engine_p99_ms = 0;
  double engine_max_ms = 0;
  std::size_t facts = 0;

  std::optional<double> overhead() const {
    if (!ratio) return std::nullopt;
    return *ratio - 1.0;
  }
};

/// Generates exactly `tokens` tokens twice with the same scripted model, once
/// unconstrained and once through the engine, one run after the other. The
/// script keeps issuing Fact commands so the constrained run walks the index
/// all along; end-of-sequence is suppressed in both runs.
BenchResult run_bench(const OpenedIndex& index, const BenchOptions& opts);

nlohmann::json to_json(const BenchResult& r, bool with_rows = true);
void write_table(std::ostream& out, const BenchResult& r);

}  // namespace factrie::cli
