// Stage-1 supervised trainer: joint objective over sentiment classification
// and tone-conditioned response targets, L_SFT = L_cls + L_gen with equal
// weighting. Each arm also mixes in a configurable fraction of RL-format
// targets (JSON chain-of-thought for the cls arm, reasoning + <resp> +
// response for the gen arm) so the stage-2 sampler starts format-aware.
#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pallm/banks.hpp"
#include "pallm/corpus.hpp"
#include "pallm/httpchat.hpp"
#include "pallm/policy.hpp"
#include "pallm/prompts.hpp"

namespace pallm {

struct SftItem {
  std::vector<int> prompt;
  std::vector<int> target;  // non-empty; includes the trailing <eos>
  TaskTag task = TaskTag::cls_sft;
  std::string utterance_id;
};

struct SynthesizedResponse {
  std::string utterance_id;
  std::string text;
  std::string generator;  // "template" | "external"
  std::string tone;
  std::string version = kBankVersion;

  json to_json() const {
    return json{{"utterance_id", utterance_id}, {"text", text},
                {"generator", generator},       {"tone", tone},
                {"version", version}};
  }
};

// --- target/response synthesis ----------------------------------------------

inline constexpr const char* kExternalSynthSystemPrompt =
    "You write one short spoken-style assistant reply (at most one sentence) to the "
    "user's utterance. The user's vocal tone is given in brackets; match it: comfort a "
    "negative tone, celebrate a positive one, stay light and factual for neutral.";

// Deterministic template pick (the desk-scale oracle) or one external
// chat-completion call. Pure function of (transcript, tone, bank version) in
// template mode.
inline SynthesizedResponse synthesize_response(const std::string& transcript,
                                               const std::string& tone,
                                               const std::string& generator,
                                               ChatClient* client = nullptr,
                                               int max_tokens = 48) {
  Sentiment s = map_tone_to_sentiment(tone, DatasetId::synthetic);
  SynthesizedResponse out;
  out.tone = tone;
  out.generator = generator;
  if (generator == "template") {
    uint64_t key = mix_seed(hash_str(transcript), hash_str(tone), hash_str(kBankVersion));
    ResponseClass cls = target_response_class(s, key);
    out.text = pick_response(cls, mix_seed(key, hash_str("pick")));
  } else if (generator == "external") {
    if (!client) throw InvalidConfig("external response synthesis needs a chat client");
    json messages =
        json::array({json{{"role", "system"}, {"content", kExternalSynthSystemPrompt}},
                     json{{"role", "user"}, {"content", "[" + tone + "] " + transcript}}});
    out.text = trim(client->complete(messages));
    std::vector<int> toks = vocab().encode_text(out.text);
    if (static_cast<int>(toks.size()) > max_tokens - 1) {
      toks.resize(max_tokens - 1);
      out.text = vocab().decode(toks);
    }
  } else {
    throw InvalidConfig("unknown response generator: " + generator);
  }
  return out;
}

// --- item builders -----------------------------------------------------------

inline SftItem make_cls_item(const Utterance& u, const EncodeOptions& opt = {}) {
  SftItem it;
  it.task = TaskTag::cls_sft;
  it.utterance_id = u.id;
  it.prompt = encode_input(u, TaskTag::cls_sft, compact_instruction(TaskTag::cls_sft), opt);
  it.target = {vocab().sentiment_token(static_cast<int>(u.sentiment)), vocab().eos()};
  return it;
}

inline SftItem make_gen_item(const Utterance& u, const std::string& response,
                             const EncodeOptions& opt = {}) {
  SftItem it;
  it.task = TaskTag::gen_sft;
  it.utterance_id = u.id;
  it.prompt = encode_input(u, TaskTag::gen_sft, compact_instruction(TaskTag::gen_sft), opt);
  it.target = vocab().encode_text(response);
  it.target.push_back(vocab().eos());
  return it;
}

// JSON chain-of-thought target under the cls_cot tag.
inline SftItem make_cls_cot_item(const Utterance& u, const EncodeOptions& opt = {}) {
  SftItem it;
  it.task = TaskTag::cls_cot;
  it.utterance_id = u.id;
  it.prompt = encode_input(u, TaskTag::cls_cot, compact_instruction(TaskTag::cls_cot), opt);
  const Vocab& v = vocab();
  it.target.push_back(v.json_open());
  for (int t : v.encode_text(cot_explanation(u.sentiment))) it.target.push_back(t);
  it.target.push_back(v.json_mid());
  it.target.push_back(v.sentiment_token(static_cast<int>(u.sentiment)));
  it.target.push_back(v.json_close());
  it.target.push_back(v.eos());
  return it;
}

// Reasoning + <resp> + response target under the gen_reason tag.
inline SftItem make_gen_reason_item(const Utterance& u, const std::string& response,
                                    const EncodeOptions& opt = {}) {
  SftItem it;
  it.task = TaskTag::gen_reason;
  it.utterance_id = u.id;
  it.prompt =
      encode_input(u, TaskTag::gen_reason, compact_instruction(TaskTag::gen_reason), opt);
  const Vocab& v = vocab();
  for (int t : v.encode_text(cot_explanation(u.sentiment))) it.target.push_back(t);
  it.target.push_back(v.resp());
  for (int t : v.encode_text(response)) it.target.push_back(t);
  it.target.push_back(v.eos());
  return it;
}

// --- losses -------------------------------------------------------------------

// Mean over the batch of per-example token-NLL sums, computed through any
// scorer with the policy `score(prompt, target) -> logps` shape. Tests use
// fixed-logit stubs; evaluation uses Policy::score.
template <typename ScoreFn>
double batch_nll(ScoreFn&& score, const std::vector<SftItem>& batch) {
  if (batch.empty()) throw EmptyBatch("loss over empty batch");
  double total = 0;
  for (const auto& it : batch) {
    if (it.target.empty()) throw EmptyBatch("item with empty target");
    double s = 0;
    for (double lp : score(it.prompt, it.target)) s -= lp;
    total += s;
  }
  return total / static_cast<double>(batch.size());
}

template <typename ScoreFn>
double cls_loss(ScoreFn&& score, const std::vector<SftItem>& batch) {
  for (const auto& it : batch)
    if (it.task != TaskTag::cls_sft)
      throw InvalidConfig("cls_loss expects only cls_sft items");
  return batch_nll(score, batch);
}

template <typename ScoreFn>
double gen_loss(ScoreFn&& score, const std::vector<SftItem>& batch) {
  for (const auto& it : batch)
    if (it.task != TaskTag::gen_sft)
      throw InvalidConfig("gen_loss expects only gen_sft items");
  return batch_nll(score, batch);
}

// Differentiable arm loss: forward each sequence, cross-entropy on the
// target region, accumulate model gradients scaled by `weight`/batch-size.
// Returns the (unweighted) mean NLL.
template <typename T>
double arm_loss_and_grad(Policy<T>& policy, const std::vector<SftItem>& batch,
                         double weight) {
  if (batch.empty()) throw EmptyBatch("sft arm batch empty");
  auto& model = policy.model();
  const int V = model.config().vocab;
  double total = 0;
  for (const auto& it : batch) {
    if (it.target.empty()) throw EmptyBatch("item with empty target");
    std::vector<int> seq = it.prompt;
    seq.insert(seq.end(), it.target.begin(), it.target.end());
    Cache<T> cache = model.fwd(seq);
    const int np = static_cast<int>(it.prompt.size());
    const int nt = static_cast<int>(it.target.size());
    std::vector<T> dlogits(static_cast<size_t>(cache.n) * V, T(0));
    const double scale = weight / static_cast<double>(batch.size());
    for (int t = 0; t < nt; ++t) {
      const int row = np + t - 1;
      const T* lrow = &cache.logits[static_cast<size_t>(row) * V];
      std::vector<T> lp = log_softmax(lrow, V);
      const int tgt = it.target[t];
      total -= static_cast<double>(lp[tgt]);
      if (weight != 0.0) {
        T* drow = &dlogits[static_cast<size_t>(row) * V];
        for (int c = 0; c < V; ++c)
          drow[c] = static_cast<T>(std::exp(static_cast<double>(lp[c])) * scale);
        drow[tgt] -= static_cast<T>(scale);
      }
    }
    if (weight != 0.0) model.backward(cache, dlogits);
  }
  return total / static_cast<double>(batch.size());
}

// --- training loop ------------------------------------------------------------

struct SftConfig {
  int steps = 300;
  int batch_size = 4;
  AdamConfig adam{3e-3, 0.9, 0.999, 1e-8, 1.0};
  double cls_prime_frac = 0.35;  // fraction of cls-arm items in JSON CoT format
  double gen_prime_frac = 0.35;  // fraction of gen-arm items in reasoning format
  bool gen_only = false;         // Table-2 "SFT (Gen only)" ablation: cls weight 0
  std::string generator = "template";
  int max_target_tokens = 48;
  double calib_lo = 0.0;
  double calib_hi = 1.0;
  bool mask_prosody = false;  // text-only ablation: constant <pmask> per dim
  uint64_t seed = 0;
  std::string out_dir = "out/sft";

  void validate() const {
    if (steps <= 0) throw InvalidConfig("sft steps must be positive");
    if (batch_size <= 0) throw InvalidConfig("sft batch_size must be positive");
    if (cls_prime_frac < 0 || cls_prime_frac > 1 || gen_prime_frac < 0 ||
        gen_prime_frac > 1)
      throw InvalidConfig("prime fractions must lie in [0,1]");
    if (generator != "template" && generator != "external")
      throw InvalidConfig("generator must be template or external");
    if (!(calib_hi > calib_lo)) throw InvalidConfig("calibration range must be increasing");
    adam.validate();
  }

  json to_json() const {
    return json{{"steps", steps},
                {"batch_size", batch_size},
                {"adam", adam.to_json()},
                {"cls_prime_frac", cls_prime_frac},
                {"gen_prime_frac", gen_prime_frac},
                {"gen_only", gen_only},
                {"generator", generator},
                {"max_target_tokens", max_target_tokens},
                {"calib_lo", calib_lo},
                {"calib_hi", calib_hi},
                {"mask_prosody", mask_prosody},
                {"seed", seed},
                {"out_dir", out_dir}};
  }
  static SftConfig from_json(const json& j) {
    SftConfig c;
    if (j.contains("steps")) c.steps = j.at("steps").get<int>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
    if (j.contains("adam")) c.adam = AdamConfig::from_json(j.at("adam"));
    if (j.contains("cls_prime_frac")) c.cls_prime_frac = j.at("cls_prime_frac").get<double>();
    if (j.contains("gen_prime_frac")) c.gen_prime_frac = j.at("gen_prime_frac").get<double>();
    if (j.contains("gen_only")) c.gen_only = j.at("gen_only").get<bool>();
    if (j.contains("generator")) c.generator = j.at("generator").get<std::string>();
    if (j.contains("max_target_tokens"))
      c.max_target_tokens = j.at("max_target_tokens").get<int>();
    if (j.contains("calib_lo")) c.calib_lo = j.at("calib_lo").get<double>();
    if (j.contains("calib_hi")) c.calib_hi = j.at("calib_hi").get<double>();
    if (j.contains("mask_prosody")) c.mask_prosody = j.at("mask_prosody").get<bool>();
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    return c;
  }
};

// One joint step on L_SFT = cls_weight * L_cls + L_gen. Returns the three
// logged scalars; L_SFT is formed as the exact sum of the two arm losses.
template <typename T>
std::array<double, 3> sft_step(Policy<T>& policy, Adam<T>& opt,
                               const std::vector<SftItem>& cls_batch,
                               const std::vector<SftItem>& gen_batch, bool gen_only) {
  if (gen_batch.empty()) throw EmptyBatch("sft_step: empty gen batch");
  if (!gen_only && cls_batch.empty()) throw EmptyBatch("sft_step: empty cls batch");
  policy.model().zero_grads();
  double l_cls = 0.0;
  if (!gen_only) l_cls = arm_loss_and_grad(policy, cls_batch, 1.0);
  double l_gen = arm_loss_and_grad(policy, gen_batch, 1.0);
  policy.grad_step(opt);
  return {l_cls, l_gen, l_cls + l_gen};
}

// Deterministic response lookup for the gen arm, with a JSONL cache keyed by
// (utterance id, generator, bank version).
class ResponseCache {
 public:
  ResponseCache(std::string path, std::string generator)
      : path_(std::move(path)), generator_(std::move(generator)) {
    if (std::filesystem::exists(path_)) {
      for (const auto& j : read_jsonl(path_)) {
        SynthesizedResponse r;
        r.utterance_id = j.at("utterance_id").get<std::string>();
        r.text = j.at("text").get<std::string>();
        r.generator = j.at("generator").get<std::string>();
        r.tone = j.at("tone").get<std::string>();
        r.version = j.at("version").get<std::string>();
        if (r.generator == generator_ && r.version == kBankVersion)
          cache_[r.utterance_id] = std::move(r);
      }
    }
  }

  const std::string& get(const Utterance& u, ChatClient* client, int max_tokens) {
    auto it = cache_.find(u.id);
    if (it == cache_.end()) {
      SynthesizedResponse r =
          synthesize_response(u.transcript, u.tone, generator_, client, max_tokens);
      r.utterance_id = u.id;
      it = cache_.emplace(u.id, std::move(r)).first;
      dirty_ = true;
    }
    return it->second.text;
  }

  void flush() const {
    if (!dirty_) return;
    JsonlWriter w(path_);
    // std::map keeps ids sorted, so the cache file is reproducible.
    for (const auto& [id, r] : cache_) w.write(r.to_json());
  }

 private:
  std::string path_;
  std::string generator_;
  std::map<std::string, SynthesizedResponse> cache_;
  bool dirty_ = false;
};

struct SftResult {
  std::string checkpoint_path;
  std::string metrics_path;
  double final_l_cls = 0, final_l_gen = 0, final_l_sft = 0;
};

// Full stage-1 run over the train split. Batch composition per step: one cls
// batch and one gen batch of equal size (cls arm skipped entirely in
// gen_only mode so its parameters match a run with cls batches removed).
template <typename T>
SftResult run_sft(const SftConfig& cfg, const ModelConfig& mcfg, const Dataset& data,
                  ChatClient* client = nullptr) {
  cfg.validate();
  Dataset train = data.with_split(Split::train);
  if (train.utterances.empty()) throw EmptyDataset("sft: no training utterances");
  std::filesystem::create_directories(cfg.out_dir);

  Policy<T> policy(mcfg, cfg.seed);
  Adam<T> opt(policy.model().param_count(), cfg.adam);
  EncodeOptions enc{cfg.calib_lo, cfg.calib_hi, cfg.mask_prosody};
  ResponseCache responses(cfg.out_dir + "/responses.jsonl", cfg.generator);

  const auto& utts = train.utterances;
  auto draw = [&](const char* arm, int step, int k) -> const Utterance& {
    uint64_t key = mix_seed(cfg.seed, hash_str(arm), static_cast<uint64_t>(step),
                            static_cast<uint64_t>(k));
    return utts[key % utts.size()];
  };

  JsonlWriter metrics(cfg.out_dir + "/metrics.jsonl");
  std::array<double, 3> losses{0, 0, 0};
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<SftItem> cls_batch, gen_batch;
    if (!cfg.gen_only) {
      for (int k = 0; k < cfg.batch_size; ++k) {
        const Utterance& u = draw("sft-cls", step, k);
        double coin = Rng(mix_seed(cfg.seed, hash_str("cls-prime"),
                                   static_cast<uint64_t>(step), static_cast<uint64_t>(k)))
                          .u01();
        cls_batch.push_back(coin < cfg.cls_prime_frac ? make_cls_cot_item(u, enc)
                                                      : make_cls_item(u, enc));
      }
    }
    for (int k = 0; k < cfg.batch_size; ++k) {
      const Utterance& u = draw("sft-gen", step, k);
      const std::string& resp = responses.get(u, client, cfg.max_target_tokens);
      double coin = Rng(mix_seed(cfg.seed, hash_str("gen-prime"),
                                 static_cast<uint64_t>(step), static_cast<uint64_t>(k)))
                        .u01();
      gen_batch.push_back(coin < cfg.gen_prime_frac ? make_gen_reason_item(u, resp, enc)
                                                    : make_gen_item(u, resp, enc));
    }
    losses = sft_step(policy, opt, cls_batch, gen_batch, cfg.gen_only);
    metrics.write(json{{"step", step},
                       {"L_cls", losses[0]},
                       {"L_gen", losses[1]},
                       {"L_SFT", losses[2]},
                       {"lr", cfg.adam.lr}});
  }
  responses.flush();

  SftResult res;
  res.final_l_cls = losses[0];
  res.final_l_gen = losses[1];
  res.final_l_sft = losses[2];
  res.metrics_path = cfg.out_dir + "/metrics.jsonl";
  res.checkpoint_path = cfg.out_dir + "/sft_final.ckpt";
  json meta{{"stage", "sft"},
            {"variant", cfg.gen_only ? "SFT (Gen only)" : "SFT (Cls+Gen)"},
            {"config", cfg.to_json()},
            {"data_seed", data.seed},
            {"provenance", data.provenance}};
  save_checkpoint(res.checkpoint_path, policy, &opt, cfg.steps, meta);
  return res;
}

}  // namespace pallm
