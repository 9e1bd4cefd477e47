// SPDX-License-Identifier: Apache-2.0

#include "manifest.hpp"

#include <ctime>
#include <fstream>

#include "factrie/error.hpp"
#include "factrie/tokenizer.hpp"

#ifndef FACTRIE_VERSION
#define FACTRIE_VERSION "0.0.0"
#endif

namespace factrie::cli {

std::string hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InputError, "cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h = fnv1a64(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())), h);
  }
  return "fnv1a64:" + hex64(h);
}

std::filesystem::path manifest_path_for(const std::filesystem::path& primary) {
  auto p = primary;
  p += ".manifest.json";
  return p;
}

RunManifest::RunManifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)), start_(std::chrono::steady_clock::now()) {
  std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  started_at_ = buf;
}

void RunManifest::input(const std::filesystem::path& path) {
  inputs_.push_back({{"path", path.string()},
                     {"bytes", std::filesystem::file_size(path)},
                     {"hash", hash_file(path)}});
}

void RunManifest::output(const std::filesystem::path& path) {
  nlohmann::json o = {{"path", path.string()}};
  if (std::filesystem::is_regular_file(path)) {
    o["bytes"] = std::filesystem::file_size(path);
    o["hash"] = hash_file(path);
  }
  outputs_.push_back(std::move(o));
}

nlohmann::json RunManifest::to_json() const {
  double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  return {{"tool", "factrie"},
          {"version", FACTRIE_VERSION},
          {"command", command_},
          {"argv", argv_},
          {"config", config_},
          {"inputs", inputs_},
          {"outputs", outputs_},
          {"timing", {{"started_at", started_at_}, {"elapsed_seconds", elapsed}}},
          {"stats", stats_}};
}

std::filesystem::path RunManifest::write(const std::filesystem::path& primary) const {
  auto path = manifest_path_for(primary);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::InputError, "cannot write " + path.string());
  out << to_json().dump(2) << '\n';
  return path;
}

}  // namespace factrie::cli
