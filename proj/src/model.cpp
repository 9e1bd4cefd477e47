// SPDX-License-Identifier: Apache-2.0

#include "factrie/model.hpp"

#include <chrono>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "factrie/error.hpp"

namespace factrie {

namespace {

constexpr std::size_t kContextWindow = 1024;

std::uint64_t mix(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Script Script::parse(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InputError, std::string("script is not valid JSON: ") + e.what());
  }
  Script s;
  try {
    for (const auto& r : j.at("rules")) s.rules.push_back({r.at("after").get<std::string>(), r.at("then").get<std::string>()});
    s.top = j.value("top", s.top);
    s.step = j.value("step", s.step);
    s.floor = j.value("floor", s.floor);
    s.noise = j.value("noise", s.noise);
    s.delay_ms = j.value("delay_ms", s.delay_ms);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InputError, std::string("malformed script: ") + e.what());
  }
  for (const auto& r : s.rules) {
    if (r.then.empty()) throw Error(ErrorCode::InputError, "script rule with empty continuation");
  }
  if (s.step <= 0 || s.noise < 0) throw Error(ErrorCode::InputError, "script step must be positive and noise non-negative");
  return s;
}

Script Script::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InputError, "cannot read script " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

ScriptedModel::ScriptedModel(std::shared_ptr<const Tokenizer> tokenizer, Script script)
    : tokenizer_(std::move(tokenizer)), script_(std::move(script)) {}

std::optional<std::string> ScriptedModel::pending_text(TokenSpan context) const {
  TokenSpan tail = context.size() > kContextWindow ? context.subspan(context.size() - kContextWindow) : context;
  std::string text = tokenizer_->decode(tail);
  const ScriptRule* best = nullptr;
  std::size_t best_end = 0;
  std::size_t best_rest = 0;
  for (const auto& rule : script_.rules) {
    std::size_t pos = rule.after.empty() ? 0 : text.rfind(rule.after);
    if (pos == std::string::npos) continue;
    std::size_t end = pos + rule.after.size();
    std::string_view rest(text.data() + end, text.size() - end);
    if (rest.size() >= rule.then.size() || !rule.then.starts_with(rest)) continue;
    if (!best || end > best_end || (end == best_end && rule.after.size() > best->after.size())) {
      best = &rule;
      best_end = end;
      best_rest = rest.size();
    }
  }
  if (!best) return std::nullopt;
  return best->then.substr(best_rest);
}

void ScriptedModel::next_logits(TokenSpan context, std::vector<float>& out) const {
  if (script_.delay_ms > 0) {
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(script_.delay_ms));
  }
  std::uint64_t seed = context.size();
  for (std::size_t i = context.size() > 16 ? context.size() - 16 : 0; i < context.size(); ++i) {
    seed = mix(seed ^ context[i]);
  }
  out.resize(tokenizer_->vocab_size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    double u = static_cast<double>(mix(seed ^ (t * 0x100000001b3ULL)) >> 11) * 0x1.0p-53;
    out[t] = script_.floor + static_cast<float>(u) * script_.noise;
  }
  auto pending = pending_text(context);
  if (!pending) {
    out[Tokenizer::kEos] = script_.top;
    return;
  }
  std::vector<TokenId> prefs;
  tokenizer_->prefix_pieces(*pending, prefs);
  for (std::size_t i = 0; i < prefs.size(); ++i) out[prefs[i]] = script_.top - static_cast<float>(i) * script_.step;
}

void CallbackModel::next_logits(TokenSpan context, std::vector<float>& out) const {
  out.assign(vocab_, 0.0f);
  fn_(context, out);
  if (out.size() != vocab_) throw Error(ErrorCode::EngineError, "host model returned a wrong-sized logits vector");
}

HttpModel::HttpModel(std::string base_url, std::string path, std::size_t vocab_size, std::string fingerprint)
    : base_url_(std::move(base_url)), path_(std::move(path)), vocab_(vocab_size), fingerprint_(std::move(fingerprint)) {}

HttpModel::~HttpModel() = default;

void HttpModel::next_logits(TokenSpan context, std::vector<float>& out) const {
  httplib::Client client(base_url_);
  client.set_read_timeout(60, 0);
  nlohmann::json body = {{"context", std::vector<TokenId>(context.begin(), context.end())}};
  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) throw Error(ErrorCode::EngineError, "model server unreachable at " + base_url_);
  if (res->status != 200) throw Error(ErrorCode::EngineError, "model server answered HTTP " + std::to_string(res->status));
  try {
    auto j = nlohmann::json::parse(res->body);
    out.clear();
    for (const auto& v : j.at("logits")) out.push_back(v.is_null() ? -std::numeric_limits<float>::infinity() : v.get<float>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::EngineError, std::string("bad model server reply: ") + e.what());
  }
  if (out.size() != vocab_) throw Error(ErrorCode::EngineError, "model server returned a wrong-sized logits vector");
}

}  // namespace factrie
