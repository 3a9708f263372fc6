// CoT-output parsing and the binary task rewards: rule-verified sentiment
// reward, oracle judge for synthetic data, and the external LLM judge.
#pragma once

#include <optional>
#include <string>

#include "pallm/banks.hpp"
#include "pallm/corpus.hpp"
#include "pallm/httpchat.hpp"
#include "pallm/prompts.hpp"
#include "pallm/vocab.hpp"

namespace pallm {

struct JudgeVerdict {
  std::string explanation;
  std::string decision;  // lowercase sentiment word, or uppercase YES/NO
  bool valid = false;
  std::string raw;
};

enum class RewardSource { rule, oracle, external };

inline const char* to_string(RewardSource s) {
  switch (s) {
    case RewardSource::rule: return "rule";
    case RewardSource::oracle: return "oracle";
    case RewardSource::external: return "external";
  }
  return "?";
}

struct RewardRecord {
  std::string rollout_id;
  TaskTag task = TaskTag::cls_cot;
  int reward = -1;  // always exactly -1 or +1
  RewardSource source = RewardSource::rule;
  JudgeVerdict verdict;

  json to_json() const {
    return json{{"rollout_id", rollout_id},
                {"task", pallm::to_string(task)},
                {"reward", reward},
                {"source", pallm::to_string(source)},
                {"verdict",
                 json{{"explanation", verdict.explanation},
                      {"decision", verdict.decision},
                      {"valid", verdict.valid}}}};
  }
};

enum class DecisionKind { sentiment, yes_no };

namespace detail {

// Strip whitespace, matched quotes/brackets and trailing periods around a
// decision word.
inline std::string normalize_decision_text(std::string s) {
  s = trim(s);
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    char f = s.front(), b = s.back();
    if ((f == '"' && b == '"') || (f == '\'' && b == '\'') || (f == '[' && b == ']') ||
        (f == '(' && b == ')')) {
      if (s.size() < 2) break;
      s = trim(s.substr(1, s.size() - 2));
      changed = true;
      continue;
    }
    if (b == '.' || b == '!' || b == ',') {
      s.pop_back();
      s = trim(s);
      changed = true;
    }
  }
  return s;
}

// Find the first balanced {...} region (string- and escape-aware) starting
// at or after `from` that parses as a JSON object.
inline std::optional<json> extract_json_object(const std::string& text) {
  for (size_t start = 0; start < text.size(); ++start) {
    if (text[start] != '{') continue;
    int depth = 0;
    bool in_str = false, esc = false;
    for (size_t i = start; i < text.size(); ++i) {
      char c = text[i];
      if (in_str) {
        if (esc) esc = false;
        else if (c == '\\') esc = true;
        else if (c == '"') in_str = false;
        continue;
      }
      if (c == '"') in_str = true;
      else if (c == '{') ++depth;
      else if (c == '}') {
        if (--depth == 0) {
          try {
            json j = json::parse(text.substr(start, i - start + 1));
            if (j.is_object()) return j;
          } catch (const json::exception&) {
          }
          break;  // balanced but unparseable: try the next opening brace
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Parse a CoT-formatted completion (or judge reply). Tolerates surrounding
// prose, code fences and doubled braces; keys are matched case-insensitively.
// Never throws: any failure yields valid=false.
inline JudgeVerdict parse_cot_output(const std::string& raw_text, DecisionKind kind) {
  JudgeVerdict v;
  v.raw = raw_text;
  auto obj = detail::extract_json_object(raw_text);
  if (!obj) return v;
  std::optional<std::string> explanation, judgement;
  for (auto it = obj->begin(); it != obj->end(); ++it) {
    std::string key = to_lower(it.key());
    if (!it.value().is_string()) continue;
    if (key == "explanation" && !explanation) explanation = it.value().get<std::string>();
    if (key == "judgement" && !judgement) judgement = it.value().get<std::string>();
  }
  if (!judgement) return v;
  v.explanation = explanation.value_or("");
  std::string d = detail::normalize_decision_text(*judgement);
  if (kind == DecisionKind::sentiment) {
    std::string low = to_lower(d);
    if (low == "positive" || low == "neutral" || low == "negative") {
      v.decision = low;
      v.valid = true;
    }
  } else {
    std::string up;
    for (char c : d) up += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (up == "YES" || up == "NO") {
      v.decision = up;
      v.valid = true;
    }
  }
  return v;
}

inline JudgeVerdict parse_cot_output(const std::string& raw_text, TaskTag task) {
  return parse_cot_output(raw_text, task == TaskTag::cls_cot ? DecisionKind::sentiment
                                                             : DecisionKind::yes_no);
}

// Response portion of a reasoning completion: text after the last <resp>
// marker, or the whole completion when the marker is absent. Control-token
// literals are removed either way.
inline std::string strip_reasoning(const std::string& completion_text) {
  std::string body = completion_text;
  auto pos = body.rfind("<resp>");
  if (pos != std::string::npos) body = body.substr(pos + 6);
  for (const char* ctrl : {"<eos>", "<sep>", "<ans>", "<resp>", "<pmask>"}) {
    for (auto p = body.find(ctrl); p != std::string::npos; p = body.find(ctrl))
      body.erase(p, std::string(ctrl).size());
  }
  return trim(body);
}

// Rule-based sentiment reward: +1 iff the parse is valid and the decision
// equals the gold label; everything else (including format failure) is -1.
inline RewardRecord reward_cls(const JudgeVerdict& verdict, Sentiment gold,
                               const std::string& rollout_id = "") {
  RewardRecord r;
  r.rollout_id = rollout_id;
  r.task = TaskTag::cls_cot;
  r.source = RewardSource::rule;
  r.verdict = verdict;
  r.reward = (verdict.valid && verdict.decision == to_string(gold)) ? 1 : -1;
  return r;
}

// Deterministic stand-in for the LLM judge on synthetic data: classify the
// response via the template-bank marker lexicon and check compatibility with
// the gold sentiment.
inline JudgeVerdict oracle_judge(const std::string& response_text, const Utterance& u) {
  if (u.dataset != DatasetId::synthetic)
    throw NotSynthetic("oracle judge only applies to synthetic utterances (got " +
                       std::string(to_string(u.dataset)) + ")");
  JudgeVerdict v;
  v.raw = response_text;
  v.valid = true;
  auto cls = classify_response(response_text);
  if (!cls) {
    v.decision = "NO";
    v.explanation = "response matches no known response class";
    return v;
  }
  bool ok = class_compatible(*cls, u.sentiment);
  v.decision = ok ? "YES" : "NO";
  v.explanation = std::string("response class ") + to_string(*cls) +
                  (ok ? " matches " : " mismatches ") + "gold sentiment " +
                  to_string(u.sentiment);
  return v;
}

// External judge: render the appropriateness rubric verbatim, send one
// chat-completion request, parse the YES/NO verdict. Transport failures
// propagate as ExternalUnavailable; unparseable replies return valid=false.
inline JudgeVerdict llm_judge(const std::string& response_text, const std::string& transcript,
                              const std::string& tone, ChatClient& client) {
  json messages = json::array({json{{"role", "system"}, {"content", judge_system_prompt()}},
                               json{{"role", "user"},
                                    {"content", render_judge_user(tone, transcript,
                                                                  response_text)}}});
  std::string reply = client.complete(messages);
  return parse_cot_output(reply, DecisionKind::yes_no);
}

// Appropriateness reward: YES -> +1, NO or invalid -> -1.
inline RewardRecord reward_gen(const JudgeVerdict& verdict, RewardSource source,
                               const std::string& rollout_id = "") {
  RewardRecord r;
  r.rollout_id = rollout_id;
  r.task = TaskTag::gen_reason;
  r.source = source;
  r.verdict = verdict;
  r.reward = (verdict.valid && verdict.decision == "YES") ? 1 : -1;
  return r;
}

}  // namespace pallm
