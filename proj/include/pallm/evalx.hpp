// Evaluation harness: sentiment accuracy with tone binning, judge-based
// appropriateness, judge agreement, and the multi-variant comparison report.
#pragma once

#include <algorithm>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pallm/grpo.hpp"
#include "pallm/policy.hpp"
#include "pallm/rewards.hpp"

namespace pallm {

// Map a predicted word to a sentiment bin: sentiment words pass through,
// tone words go through the dataset's tone table, anything else is invalid.
inline std::optional<Sentiment> bin_prediction(const std::string& predicted_word,
                                               DatasetId dataset) {
  std::string w = to_lower(trim(predicted_word));
  if (w == "positive") return Sentiment::positive;
  if (w == "neutral") return Sentiment::neutral;
  if (w == "negative") return Sentiment::negative;
  try {
    return map_tone_to_sentiment(w, dataset);
  } catch (const Error&) {
    return std::nullopt;
  }
}

inline double sentiment_accuracy(const std::vector<std::optional<Sentiment>>& predictions,
                                 const std::vector<Sentiment>& golds) {
  if (predictions.size() != golds.size())
    throw LengthMismatch("sentiment_accuracy: " + std::to_string(predictions.size()) +
                         " predictions vs " + std::to_string(golds.size()) + " golds");
  if (predictions.empty()) throw EmptyList("sentiment_accuracy: no examples");
  size_t hits = 0;
  for (size_t i = 0; i < golds.size(); ++i)
    if (predictions[i] && *predictions[i] == golds[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(golds.size());
}

inline double appropriateness_rate(const std::vector<JudgeVerdict>& verdicts) {
  if (verdicts.empty()) throw EmptyList("appropriateness_rate: no verdicts");
  size_t yes = 0;
  for (const auto& v : verdicts)
    if (v.valid && v.decision == "YES") ++yes;
  return static_cast<double>(yes) / static_cast<double>(verdicts.size());
}

inline double judge_agreement(const std::vector<bool>& a, const std::vector<bool>& b) {
  if (a.size() != b.size())
    throw LengthMismatch("judge_agreement: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  if (a.empty()) throw EmptyList("judge_agreement: no examples");
  size_t same = 0;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] == b[i]) ++same;
  return static_cast<double>(same) / static_cast<double>(a.size());
}

// --- checkpoint evaluation ---------------------------------------------------

enum class EvalStage { sft, rl };

inline const char* to_string(EvalStage s) { return s == EvalStage::sft ? "sft" : "rl"; }

// Greedy (argmax) decoding: the temperature->0 limit of the sampler.
template <typename T>
std::vector<int> greedy_decode(const Policy<T>& policy, const std::vector<int>& prompt,
                               int max_new_tokens) {
  const auto& model = policy.model();
  const int ctx = model.config().ctx;
  if (prompt.empty()) throw EmptyBatch("greedy_decode: empty prompt");
  if (static_cast<int>(prompt.size()) >= ctx)
    throw ContextOverflow("greedy_decode: prompt fills the context");
  IncState<T> st = model.new_state();
  std::vector<T> logits;
  for (int t : prompt) logits = model.inc_step(st, t);
  std::vector<int> out;
  const int budget = std::min(max_new_tokens, ctx - static_cast<int>(prompt.size()));
  for (int i = 0; i < budget; ++i) {
    int best = 0;
    for (int c = 1; c < static_cast<int>(logits.size()); ++c)
      if (logits[c] > logits[best]) best = c;
    out.push_back(best);
    if (best == vocab().eos()) break;
    if (st.n >= ctx) break;
    logits = model.inc_step(st, best);
  }
  return out;
}

struct EvalConfig {
  EvalStage stage = EvalStage::rl;
  JudgeMode judge = JudgeMode::oracle;
  double calib_lo = 0.0;
  double calib_hi = 1.0;
  int max_new_tokens = 48;
  bool mask_prosody = false;
  bool with_appropriateness = true;
};

struct EvalResult {
  std::string variant;
  std::string dataset;
  double sentiment_acc = 0;
  double appropriateness = 0;
  int n_examples = 0;
  json records = json::array();

  json to_json() const {
    return json{{"variant", variant},
                {"dataset", dataset},
                {"sentiment_accuracy", sentiment_acc},
                {"appropriateness", appropriateness},
                {"n_examples", n_examples}};
  }
};

// Single-word prediction for SFT-stage checkpoints; JSON CoT for RL-stage.
// Everything is greedy-decoded; parse failures count as wrong answers.
template <typename T>
EvalResult evaluate(const Policy<T>& policy, const Dataset& data, const EvalConfig& cfg,
                    const std::string& variant, ChatClient* client = nullptr) {
  Dataset eval = data.with_split(Split::eval);
  if (eval.utterances.empty()) throw EmptyDataset("evaluate: eval split is empty");
  EncodeOptions enc{cfg.calib_lo, cfg.calib_hi, cfg.mask_prosody};

  std::vector<std::optional<Sentiment>> preds;
  std::vector<Sentiment> golds;
  std::vector<JudgeVerdict> verdicts;
  EvalResult res;
  res.variant = variant;
  res.dataset = eval.provenance;

  for (const auto& u : eval.utterances) {
    json rec{{"utterance_id", u.id}, {"gold", to_string(u.sentiment)},
             {"cue_mode", to_string(u.cue_mode)}};
    // Sentiment prediction.
    std::optional<Sentiment> pred;
    std::string pred_word;
    if (cfg.stage == EvalStage::rl) {
      auto prompt = encode_input(u, TaskTag::cls_cot, compact_instruction(TaskTag::cls_cot), enc);
      std::string text = vocab().decode(greedy_decode(policy, prompt, cfg.max_new_tokens));
      JudgeVerdict v = parse_cot_output(text, DecisionKind::sentiment);
      if (v.valid) pred_word = v.decision;
      rec["cls_raw"] = text;
    } else {
      auto prompt = encode_input(u, TaskTag::cls_sft, compact_instruction(TaskTag::cls_sft), enc);
      std::string text = vocab().decode(greedy_decode(policy, prompt, cfg.max_new_tokens));
      pred_word = trim(strip_reasoning(text));  // removes control literals
      rec["cls_raw"] = text;
    }
    if (!pred_word.empty()) pred = bin_prediction(pred_word, u.dataset);
    preds.push_back(pred);
    golds.push_back(u.sentiment);
    rec["prediction"] = pred ? to_string(*pred) : "invalid";

    // Response appropriateness.
    if (cfg.with_appropriateness) {
      TaskTag gen_task = cfg.stage == EvalStage::rl ? TaskTag::gen_reason : TaskTag::gen_sft;
      auto prompt = encode_input(u, gen_task, compact_instruction(gen_task), enc);
      std::string text = vocab().decode(greedy_decode(policy, prompt, cfg.max_new_tokens));
      std::string response = strip_reasoning(text);
      JudgeVerdict v;
      RewardSource src = RewardSource::oracle;
      if (cfg.judge == JudgeMode::oracle) {
        v = oracle_judge(response, u);
      } else {
        if (!client) throw InvalidConfig("external judge requires a chat client");
        v = llm_judge(response, u.transcript, u.tone, *client);
        src = RewardSource::external;
      }
      verdicts.push_back(v);
      rec["response"] = response;
      rec["verdict"] = v.valid ? v.decision : "invalid";
      rec["judge_source"] = to_string(src);
    }
    res.records.push_back(std::move(rec));
  }

  res.n_examples = static_cast<int>(eval.utterances.size());
  res.sentiment_acc = sentiment_accuracy(preds, golds);
  if (cfg.with_appropriateness) res.appropriateness = appropriateness_rate(verdicts);
  return res;
}

inline Dataset filter_by_cue_mode(const Dataset& data, CueMode mode) {
  Dataset out;
  out.provenance = data.provenance;
  out.seed = data.seed;
  for (const auto& u : data.utterances)
    if (u.cue_mode == mode) out.utterances.push_back(u);
  return out;
}

// --- comparison report ---------------------------------------------------------

// Plain-text table (column maxima wrapped in asterisks) plus a JSON array
// keyed by (variant, dataset, metric). Pure function of its inputs.
struct RenderedReport {
  std::string text;
  json machine;
};

inline RenderedReport variant_report(const std::vector<EvalResult>& results,
                                     const std::string& title = "variant comparison") {
  if (results.empty()) throw EmptyList("variant_report: no results");
  struct Col {
    std::string dataset, metric;
  };
  std::vector<Col> cols;
  for (const auto& r : results) {
    bool seen = false;
    for (const auto& c : cols) seen = seen || c.dataset == r.dataset;
    if (!seen) {
      cols.push_back({r.dataset, "sentiment_accuracy"});
      cols.push_back({r.dataset, "appropriateness"});
    }
  }
  std::vector<std::string> variants;
  for (const auto& r : results) {
    bool seen = false;
    for (const auto& v : variants) seen = seen || v == r.variant;
    if (!seen) variants.push_back(r.variant);
  }
  auto value_of = [&](const std::string& variant, const Col& c) -> std::optional<double> {
    for (const auto& r : results) {
      if (r.variant != variant || r.dataset != c.dataset) continue;
      return c.metric == "sentiment_accuracy" ? r.sentiment_acc : r.appropriateness;
    }
    return std::nullopt;
  };
  std::vector<double> col_max(cols.size(), -1.0);
  for (size_t ci = 0; ci < cols.size(); ++ci)
    for (const auto& v : variants)
      if (auto val = value_of(v, cols[ci])) col_max[ci] = std::max(col_max[ci], *val);

  // Text table headers use a short dataset label (the manifest filename stem
  // when provenance is a path); the machine rows keep the full provenance.
  auto dataset_label = [](const std::string& provenance) {
    std::string s = provenance;
    if (auto pos = s.find_last_of('/'); pos != std::string::npos) s = s.substr(pos + 1);
    if (s.size() > 6 && s.rfind(".jsonl") == s.size() - 6) s = s.substr(0, s.size() - 6);
    return s.empty() ? std::string("dataset") : s;
  };
  std::vector<std::string> header(cols.size());
  std::vector<size_t> width(cols.size());
  for (size_t ci = 0; ci < cols.size(); ++ci) {
    header[ci] = dataset_label(cols[ci].dataset) + "/" +
                 (cols[ci].metric == "sentiment_accuracy" ? "acc" : "appr");
    width[ci] = std::max<size_t>(header[ci].size(), 7);  // "*0.000*"
  }
  size_t name_w = std::string("variant").size();
  for (const auto& v : variants) name_w = std::max(name_w, v.size());

  std::ostringstream os;
  os << title << "\n";
  os << std::left << std::setw(static_cast<int>(name_w)) << "variant";
  for (size_t ci = 0; ci < cols.size(); ++ci)
    os << "  " << std::setw(static_cast<int>(width[ci])) << header[ci];
  os << "\n";
  json machine = json::array();
  for (const auto& v : variants) {
    os << std::left << std::setw(static_cast<int>(name_w)) << v;
    for (size_t ci = 0; ci < cols.size(); ++ci) {
      auto val = value_of(v, cols[ci]);
      std::ostringstream cell;
      if (val) {
        bool best = *val == col_max[ci];
        cell << (best ? "*" : "") << std::fixed << std::setprecision(3) << *val
             << (best ? "*" : "");
        machine.push_back(json{{"variant", v},
                               {"dataset", cols[ci].dataset},
                               {"metric", cols[ci].metric},
                               {"value", *val},
                               {"best", best}});
      } else {
        cell << "-";
      }
      os << "  " << std::setw(static_cast<int>(width[ci])) << cell.str();
    }
    os << "\n";
  }
  // No trailing spaces: tidy lines make byte-identical re-render checks easy.
  std::string text = os.str();
  std::string tidy;
  tidy.reserve(text.size());
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) break;
    size_t last = end;
    while (last > start && text[last - 1] == ' ') --last;
    tidy.append(text, start, last - start);
    tidy.push_back('\n');
    start = end + 1;
  }
  return {tidy, machine};
}

}  // namespace pallm
