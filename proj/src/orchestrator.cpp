// SPDX-License-Identifier: Apache-2.0

#include "factrie/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "factrie/error.hpp"

namespace factrie {

const std::string& default_system_prompt() {
  static const std::string text =
      "You answer questions with the help of a knowledge graph. Work step by step and write down "
      "your reasoning before you answer.\n"
      "Whenever you need information, write \"Fact:\" followed by a fact of the form "
      "<subject> <predicate> <object> . on the same line. After \"Fact:\" you can only write facts "
      "that exist in the knowledge graph, so use the command to check what you believe.\n"
      "Write one fact per line and do not repeat facts.\n"
      "When the collected facts are enough, write the final answer on its own line starting with "
      "\"Answer:\".\n"
      "If the facts you find do not help, stop and write: I don't know.";
  return text;
}

const std::string& relation_addendum() {
  static const std::string text =
      "Look up each relation of the question separately, one Fact command per relation.";
  return text;
}

void PromptConfig::validate() const {
  if (few_shot.size() != 2) {
    throw Error(ErrorCode::InputError, "expected exactly 2 worked examples, got " + std::to_string(few_shot.size()));
  }
  if (beams < 1) throw Error(ErrorCode::InputError, "beams must be at least 1");
  if (max_new_tokens < 1) throw Error(ErrorCode::InputError, "max_new_tokens must be at least 1");
  if (sampling) throw Error(ErrorCode::InputError, "sampling is not supported");
  if (trigger.empty()) throw Error(ErrorCode::InputError, "trigger must not be empty");
}

std::string PromptConfig::render(std::string_view question) const {
  std::string out = system_prompt;
  if (relation_addendum) out += "\n" + factrie::relation_addendum();
  out += "\n\n";
  for (const auto& ex : few_shot) {
    out += ex;
    if (!out.ends_with('\n')) out += '\n';
    out += '\n';
  }
  out += "Question: ";
  out += question;
  out += '\n';
  return out;
}

std::vector<std::string> load_few_shot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InputError, "cannot read examples " + path.string());
  std::vector<std::string> out(1);
  std::string line;
  while (std::getline(in, line)) {
    if (line == "===") {
      out.emplace_back();
    } else {
      out.back() += line + "\n";
    }
  }
  for (auto& ex : out) {
    while (!ex.empty() && (ex.back() == '\n' || ex.front() == '\n')) {
      if (ex.back() == '\n') ex.pop_back();
      else ex.erase(0, 1);
    }
  }
  std::erase_if(out, [](const std::string& s) { return s.empty(); });
  return out;
}

std::string_view to_string(Terminal t) noexcept {
  switch (t) {
    case Terminal::Answered: return "Answered";
    case Terminal::IDontKnow: return "IDontKnow";
    case Terminal::BudgetExhausted: return "BudgetExhausted";
  }
  return "IDontKnow";
}

namespace {

Terminal parse_terminal(std::string_view s) {
  if (s == "Answered") return Terminal::Answered;
  if (s == "IDontKnow") return Terminal::IDontKnow;
  if (s == "BudgetExhausted") return Terminal::BudgetExhausted;
  throw Error(ErrorCode::InputError, "unknown terminal state '" + std::string(s) + "'");
}

std::string_view trim_left(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

/// The text of the last answer line. A line at the very end counts only when
/// `open_end_complete` (generation stopped on its own rather than the budget).
std::optional<std::string> last_answer(std::string_view text, bool open_end_complete) {
  std::optional<std::string> found;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    bool terminated = nl != std::string_view::npos;
    std::string_view line = text.substr(start, terminated ? nl - start : std::string_view::npos);
    line = trim_left(line);
    if (line.starts_with(kAnswerPrefix) && (terminated || open_end_complete)) {
      found = normalize_answer(line.substr(kAnswerPrefix.size()));
    }
    if (!terminated) break;
    start = nl + 1;
  }
  return found;
}

bool stop_reached(std::string_view text) {
  if (text.ends_with(kRefusal)) return true;
  if (!text.ends_with('\n')) return false;
  std::string_view body = text.substr(0, text.size() - 1);
  std::size_t nl = body.rfind('\n');
  std::string_view line = nl == std::string_view::npos ? body : body.substr(nl + 1);
  return trim_left(line).starts_with(kAnswerPrefix);
}

Terminal classify(std::string_view text, bool budget_hit) {
  if (text.find(kRefusal) != std::string_view::npos) return Terminal::IDontKnow;
  if (last_answer(text, !budget_hit)) return Terminal::Answered;
  if (budget_hit) return Terminal::BudgetExhausted;
  // The model ended the sequence without ever committing to an answer.
  return Terminal::IDontKnow;
}

void log_softmax(std::vector<float>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (float x : v) mx = std::max(mx, static_cast<double>(x));
  if (!std::isfinite(mx)) throw Error(ErrorCode::EngineError, "model produced no finite score");
  double sum = 0;
  for (float x : v) sum += std::exp(static_cast<double>(x) - mx);
  double lse = mx + std::log(sum);
  for (float& x : v) x = static_cast<float>(static_cast<double>(x) - lse);
}

struct Hypothesis {
  TokenSequence context;
  std::string text;
  DecodingSession session;
  double score = 0;
  std::size_t generated = 0;
  bool stopped = false;  // ended by EOS or a stop line rather than the budget

  double normalized() const { return score / static_cast<double>(std::max<std::size_t>(1, generated)); }
};

Transcript finish(std::string_view question, const Hypothesis& h, bool budget_hit) {
  Transcript t;
  t.question = question;
  t.text = h.text;
  t.facts = h.session.report().facts;
  t.exhaustion = h.session.report().exhaustion;
  t.transitions = h.session.report().transitions;
  t.new_tokens = h.session.report().tokens;
  t.terminal = classify(h.text, budget_hit);
  return t;
}

Transcript greedy(std::string_view question, const LanguageModel& model, const ConstraintEngine& engine,
                  Hypothesis h, std::size_t max_new) {
  std::vector<float> logits;
  while (true) {
    if (h.generated == max_new) return finish(question, h, true);
    model.next_logits(h.context, logits);
    log_softmax(logits);
    engine.mask_in_place(h.session, logits);
    auto best = static_cast<TokenId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (best == Tokenizer::kEos && h.session.mode() == Mode::Normal) return finish(question, h, false);
    engine.step(h.session, best);
    h.context.push_back(best);
    h.text += engine.tokenizer().piece(best);
    ++h.generated;
    if (h.session.mode() == Mode::Normal && stop_reached(h.text)) return finish(question, h, false);
  }
}

struct Candidate {
  double score;
  std::size_t beam;
  TokenId token;
};

Transcript beam_search(std::string_view question, const LanguageModel& model, const ConstraintEngine& engine,
                       Hypothesis start, std::size_t k, std::size_t max_new) {
  std::vector<Hypothesis> live;
  live.push_back(std::move(start));
  std::vector<Hypothesis> finished;  // sorted best first, at most k
  auto add_finished = [&](Hypothesis h) {
    auto pos = std::find_if(finished.begin(), finished.end(),
                            [&](const Hypothesis& f) { return h.normalized() > f.normalized(); });
    finished.insert(pos, std::move(h));
    if (finished.size() > k) finished.pop_back();
  };
  std::vector<float> logits;
  std::vector<std::size_t> order;
  bool budget_hit = false;
  while (!live.empty()) {
    if (live.front().generated == max_new) {
      budget_hit = true;
      break;
    }
    std::vector<Candidate> cands;
    for (std::size_t b = 0; b < live.size(); ++b) {
      model.next_logits(live[b].context, logits);
      log_softmax(logits);
      engine.mask_in_place(live[b].session, logits);
      order.resize(logits.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::size_t take = std::min(order.size(), 2 * k);
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                        [&](std::size_t a, std::size_t c) { return logits[a] > logits[c] || (logits[a] == logits[c] && a < c); });
      for (std::size_t i = 0; i < take; ++i) {
        float lp = logits[order[i]];
        if (lp == kMasked) break;
        cands.push_back({live[b].score + lp, b, static_cast<TokenId>(order[i])});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& c) { return a.score > c.score; });

    std::vector<Hypothesis> next;
    for (std::size_t rank = 0; rank < cands.size() && next.size() < k; ++rank) {
      const Candidate& c = cands[rank];
      const Hypothesis& parent = live[c.beam];
      if (c.token == Tokenizer::kEos && parent.session.mode() == Mode::Normal) {
        if (rank < k) {
          Hypothesis h = parent;
          h.score = c.score;
          h.stopped = true;
          add_finished(std::move(h));
        }
        continue;
      }
      Hypothesis h = parent;
      engine.step(h.session, c.token);
      h.context.push_back(c.token);
      h.text += engine.tokenizer().piece(c.token);
      h.score = c.score;
      ++h.generated;
      if (h.session.mode() == Mode::Normal && stop_reached(h.text)) {
        h.stopped = true;
        add_finished(std::move(h));
      } else {
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
    if (finished.size() >= k && !live.empty()) {
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& h : live) best_live = std::max(best_live, h.normalized());
      if (best_live <= finished.back().normalized()) break;
    }
  }
  if (budget_hit) {
    for (auto& h : live) add_finished(std::move(h));
  }
  if (finished.empty()) throw Error(ErrorCode::EngineError, "beam search ended without any hypothesis");
  const Hypothesis& best = finished.front();
  return finish(question, best, !best.stopped);
}

}  // namespace

Transcript run_question(std::string_view question, const LanguageModel& model,
                        std::shared_ptr<const FactSource> source, std::shared_ptr<const Tokenizer> tokenizer,
                        const PromptConfig& cfg) {
  cfg.validate();
  if (model.fingerprint() != tokenizer->fingerprint() || model.vocab_size() != tokenizer->vocab_size()) {
    throw Error(ErrorCode::TokenizerMismatch, "model vocabulary " + model.fingerprint() + " differs from tokenizer " +
                                                  tokenizer->fingerprint());
  }
  EngineConfig ecfg;
  ecfg.trigger = cfg.trigger;
  ecfg.max_new_tokens = cfg.max_new_tokens;
  ecfg.preamble = cfg.preamble;
  ConstraintEngine engine(std::move(source), tokenizer, ecfg);

  Hypothesis start;
  start.context = tokenizer->encode(cfg.render(question));
  start.session = engine.create_session();
  if (cfg.beams == 1) return greedy(question, model, engine, std::move(start), cfg.max_new_tokens);
  return beam_search(question, model, engine, std::move(start), cfg.beams, cfg.max_new_tokens);
}

ParsedAnswer parse_answer(const Transcript& t) {
  switch (t.terminal) {
    case Terminal::IDontKnow: return {ParsedAnswer::Kind::IDontKnow, {}};
    case Terminal::BudgetExhausted: return {ParsedAnswer::Kind::NotGiven, {}};
    case Terminal::Answered: break;
  }
  auto answer = last_answer(t.text, true);
  if (!answer || answer->empty()) return {ParsedAnswer::Kind::NotGiven, {}};
  return {ParsedAnswer::Kind::Answer, *answer};
}

void to_json(nlohmann::json& j, const Transcript& t) {
  j = nlohmann::json::object();
  j["id"] = t.id;
  j["question"] = t.question;
  j["text"] = t.text;
  auto& facts = j["facts"] = nlohmann::json::array();
  for (const auto& f : t.facts) facts.push_back({{"text", f.text}, {"start", f.start}, {"end", f.end}});
  auto& ex = j["exhaustion"] = nlohmann::json::array();
  for (const auto& e : t.exhaustion) ex.push_back({{"position", e.position}, {"reason", e.reason}});
  j["transitions"] = t.transitions;
  j["new_tokens"] = t.new_tokens;
  j["terminal"] = std::string(to_string(t.terminal));
}

void from_json(const nlohmann::json& j, Transcript& t) {
  t.id = j.value("id", "");
  t.question = j.at("question").get<std::string>();
  t.text = j.at("text").get<std::string>();
  t.facts.clear();
  for (const auto& f : j.value("facts", nlohmann::json::array())) {
    t.facts.push_back({f.at("text").get<std::string>(), f.at("start").get<std::size_t>(), f.at("end").get<std::size_t>()});
  }
  t.exhaustion.clear();
  for (const auto& e : j.value("exhaustion", nlohmann::json::array())) {
    t.exhaustion.push_back({e.at("position").get<std::size_t>(), e.at("reason").get<std::string>()});
  }
  t.transitions = j.value("transitions", std::size_t{0});
  t.new_tokens = j.value("new_tokens", std::size_t{0});
  t.terminal = parse_terminal(j.at("terminal").get<std::string>());
}

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InputError, "cannot read dataset " + path.string());
  std::vector<DatasetRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto where = path.string() + ":" + std::to_string(lineno);
    try {
      auto j = nlohmann::json::parse(line);
      DatasetRecord r;
      r.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                              : std::to_string(lineno);
      r.question = j.at("question").get<std::string>();
      r.gold.id = r.id;
      if (j.contains("gold_answers")) {
        r.gold.answers = j["gold_answers"].get<std::vector<std::string>>();
      } else if (j.contains("gold_answer")) {
        r.gold.answers.push_back(j["gold_answer"].get<std::string>());
      }
      r.gold.answer_type = parse_answer_type(j.value("answer_type", "generic"));
      r.gold.question_type = j.value("question_type", "");
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InputError, where + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
  }
  return out;
}

std::vector<Transcript> load_transcripts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InputError, "cannot read transcripts " + path.string());
  std::vector<Transcript> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<Transcript>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InputError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_transcripts(const std::filesystem::path& path, const std::vector<Transcript>& transcripts) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::InputError, "cannot write " + path.string());
  for (const auto& t : transcripts) out << nlohmann::json(t).dump() << '\n';
}

}  // namespace factrie
