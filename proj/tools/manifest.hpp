// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace factrie::cli {

/// Record of one command run: enough to rerun it and to check its inputs.
/// Written next to the primary output as "<output>.manifest.json".
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv);

  void config(const std::string& key, nlohmann::json value) { config_[key] = std::move(value); }
  /// Hashes the file content (FNV-1a 64) and records its size.
  void input(const std::filesystem::path& path);
  void output(const std::filesystem::path& path);
  void stat(const std::string& key, nlohmann::json value) { stats_[key] = std::move(value); }

  nlohmann::json to_json() const;
  /// Writes "<primary>.manifest.json" and returns its path.
  std::filesystem::path write(const std::filesystem::path& primary) const;

 private:
  std::string command_;
  std::vector<std::string> argv_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::array();
  nlohmann::json outputs_ = nlohmann::json::array();
  nlohmann::json stats_ = nlohmann::json::object();
  std::chrono::steady_clock::time_point start_;
  std::string started_at_;
};

std::string hash_file(const std::filesystem::path& path);
std::filesystem::path manifest_path_for(const std::filesystem::path& primary);

}  // namespace factrie::cli
