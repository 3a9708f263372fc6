// Stage-2 trainer: uniform multi-task prompt sampling, K-rollout groups,
// group-relative advantages, clipped ratio objective with a KL penalty to
// the frozen stage-1 reference.
#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pallm/corpus.hpp"
#include "pallm/policy.hpp"
#include "pallm/prompts.hpp"
#include "pallm/rewards.hpp"

namespace pallm {

enum class TaskMix { cls_only, gen_only, cls_and_gen };

inline const char* to_string(TaskMix m) {
  switch (m) {
    case TaskMix::cls_only: return "cls_only";
    case TaskMix::gen_only: return "gen_only";
    case TaskMix::cls_and_gen: return "cls_and_gen";
  }
  return "?";
}

inline TaskMix task_mix_from_string(const std::string& s) {
  if (s == "cls_only") return TaskMix::cls_only;
  if (s == "gen_only") return TaskMix::gen_only;
  if (s == "cls_and_gen") return TaskMix::cls_and_gen;
  throw InvalidConfig("unknown task_mix: " + s);
}

enum class JudgeMode { oracle, external };

inline const char* to_string(JudgeMode m) {
  return m == JudgeMode::oracle ? "oracle" : "external";
}

inline JudgeMode judge_mode_from_string(const std::string& s) {
  if (s == "oracle") return JudgeMode::oracle;
  if (s == "external") return JudgeMode::external;
  throw InvalidConfig("unknown judge mode: " + s);
}

inline std::string rl_variant_name(TaskMix mix) {
  switch (mix) {
    case TaskMix::cls_only: return "PALLM (Cls only)";
    case TaskMix::gen_only: return "PALLM (Gen only)";
    case TaskMix::cls_and_gen: return "PALLM (Cls+Gen)";
  }
  return "PALLM";
}

struct RLConfig {
  int K = 4;
  double clip_eps = 0.2;
  double kl_coeff = 0.02;
  AdamConfig adam{1e-3, 0.9, 0.999, 1e-8, 1.0};
  double temperature = 1.0;
  int steps = 150;
  int groups_per_step = 4;
  int max_new_tokens = 48;
  TaskMix task_mix = TaskMix::cls_and_gen;
  JudgeMode judge = JudgeMode::oracle;
  double calib_lo = 0.0;
  double calib_hi = 1.0;
  bool mask_prosody = false;
  uint64_t seed = 0;
  int eval_every = 50;   // 0 disables periodic eval
  int save_every = 50;   // 0 disables periodic checkpoints
  std::string out_dir = "out/rl";

  void validate() const {
    if (K < 2) throw InvalidConfig("rl K must be >= 2");
    if (!(clip_eps > 0)) throw InvalidConfig("clip_eps must be > 0");
    if (kl_coeff < 0) throw InvalidConfig("kl_coeff must be >= 0");
    if (!(temperature > 0)) throw InvalidConfig("temperature must be > 0");
    if (steps <= 0) throw InvalidConfig("rl steps must be positive");
    if (groups_per_step <= 0) throw InvalidConfig("groups_per_step must be positive");
    if (max_new_tokens < 1) throw InvalidConfig("max_new_tokens must be >= 1");
    if (!(calib_hi > calib_lo)) throw InvalidConfig("calibration range must be increasing");
    adam.validate();
  }

  json to_json() const {
    return json{{"K", K},
                {"clip_eps", clip_eps},
                {"kl_coeff", kl_coeff},
                {"adam", adam.to_json()},
                {"temperature", temperature},
                {"steps", steps},
                {"groups_per_step", groups_per_step},
                {"max_new_tokens", max_new_tokens},
                {"task_mix", to_string(task_mix)},
                {"judge", to_string(judge)},
                {"calib_lo", calib_lo},
                {"calib_hi", calib_hi},
                {"mask_prosody", mask_prosody},
                {"seed", seed},
                {"eval_every", eval_every},
                {"save_every", save_every},
                {"out_dir", out_dir}};
  }
  static RLConfig from_json(const json& j) {
    RLConfig c;
    if (j.contains("K")) c.K = j.at("K").get<int>();
    if (j.contains("clip_eps")) c.clip_eps = j.at("clip_eps").get<double>();
    if (j.contains("kl_coeff")) c.kl_coeff = j.at("kl_coeff").get<double>();
    if (j.contains("adam")) c.adam = AdamConfig::from_json(j.at("adam"));
    if (j.contains("temperature")) c.temperature = j.at("temperature").get<double>();
    if (j.contains("steps")) c.steps = j.at("steps").get<int>();
    if (j.contains("groups_per_step"))
      c.groups_per_step = j.at("groups_per_step").get<int>();
    if (j.contains("max_new_tokens")) c.max_new_tokens = j.at("max_new_tokens").get<int>();
    if (j.contains("task_mix"))
      c.task_mix = task_mix_from_string(j.at("task_mix").get<std::string>());
    if (j.contains("judge")) c.judge = judge_mode_from_string(j.at("judge").get<std::string>());
    if (j.contains("calib_lo")) c.calib_lo = j.at("calib_lo").get<double>();
    if (j.contains("calib_hi")) c.calib_hi = j.at("calib_hi").get<double>();
    if (j.contains("mask_prosody")) c.mask_prosody = j.at("mask_prosody").get<bool>();
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (j.contains("eval_every")) c.eval_every = j.at("eval_every").get<int>();
    if (j.contains("save_every")) c.save_every = j.at("save_every").get<int>();
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    return c;
  }
};

struct Group {
  std::vector<int> prompt;
  TaskTag task = TaskTag::cls_cot;
  std::string utterance_id;
  std::vector<Rollout> rollouts;
  std::vector<RewardRecord> rewards;
  std::vector<double> advantages;
  std::vector<bool> valid_format;
};

// Uniform task draw per the configured mix.
inline TaskTag sample_task(const RLConfig& cfg, Rng& rng) {
  switch (cfg.task_mix) {
    case TaskMix::cls_only: return TaskTag::cls_cot;
    case TaskMix::gen_only: return TaskTag::gen_reason;
    case TaskMix::cls_and_gen:
      return rng.u01() < 0.5 ? TaskTag::cls_cot : TaskTag::gen_reason;
  }
  return TaskTag::cls_cot;
}

// a_i = (r_i - mean) / (population_std + 1e-8); all-equal groups normalize
// to exact zeros.
inline std::vector<double> compute_advantages(const std::vector<double>& rewards) {
  if (rewards.size() < 2) throw EmptyList("advantages need at least 2 rewards");
  double mean = 0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  double var = 0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(rewards.size());
  double denom = std::sqrt(var) + 1e-8;
  std::vector<double> a(rewards.size());
  for (size_t i = 0; i < rewards.size(); ++i) a[i] = (rewards[i] - mean) / denom;
  return a;
}

// K rollouts from one prompt with per-rollout sub-seeds, rewarded by the
// task's judge. Rollouts whose external judgement never arrives are dropped;
// fewer than 2 judged rollouts discards the group.
template <typename T>
Group collect_group(const Policy<T>& policy, const Utterance& u, TaskTag task,
                    const RLConfig& cfg, int step, int group_idx,
                    ChatClient* client = nullptr) {
  Group g;
  g.task = task;
  g.utterance_id = u.id;
  EncodeOptions enc{cfg.calib_lo, cfg.calib_hi, cfg.mask_prosody};
  g.prompt = encode_input(u, task, compact_instruction(task), enc);
  std::vector<double> rewards;
  for (int k = 0; k < cfg.K; ++k) {
    SamplerConfig sc;
    sc.temperature = cfg.temperature;
    sc.max_new_tokens = cfg.max_new_tokens;
    sc.seed = mix_seed(cfg.seed, hash_str("rollout"), static_cast<uint64_t>(step),
                       static_cast<uint64_t>(group_idx), static_cast<uint64_t>(k));
    Rollout r = policy.sample(g.prompt, sc);
    r.task = task;
    r.utterance_id = u.id;
    std::string rollout_id = u.id + "/s" + std::to_string(step) + "g" +
                             std::to_string(group_idx) + "k" + std::to_string(k);
    RewardRecord rec;
    bool fmt_ok = false;
    if (task == TaskTag::cls_cot) {
      JudgeVerdict v = parse_cot_output(r.text, DecisionKind::sentiment);
      fmt_ok = v.valid;
      rec = reward_cls(v, u.sentiment, rollout_id);
    } else {
      std::string response = strip_reasoning(r.text);
      fmt_ok = !response.empty();
      if (cfg.judge == JudgeMode::oracle) {
        rec = reward_gen(oracle_judge(response, u), RewardSource::oracle, rollout_id);
      } else {
        if (!client) throw InvalidConfig("external judge requires a chat client");
        try {
          rec = reward_gen(llm_judge(response, u.transcript, u.tone, *client),
                           RewardSource::external, rollout_id);
        } catch (const ExternalUnavailable&) {
          continue;  // unjudged rollout: drop it, group shrinks
        }
      }
    }
    g.rollouts.push_back(std::move(r));
    g.rewards.push_back(std::move(rec));
    g.valid_format.push_back(fmt_ok);
    rewards.push_back(static_cast<double>(g.rewards.back().reward));
  }
  if (g.rollouts.size() < 2)
    throw GroupDiscarded("group for " + u.id + " kept " +
                         std::to_string(g.rollouts.size()) + " judged rollouts");
  g.advantages = compute_advantages(rewards);
  return g;
}

// Clipped-surrogate GRPO loss with the unbiased per-token KL estimator,
// averaged over all completion tokens in the group. Gradients (scaled by
// grad_scale) accumulate into the policy when with_grad is set.
template <typename T>
double grpo_loss(Policy<T>& policy, const Policy<T>& reference, const Group& g,
                 const RLConfig& cfg, bool with_grad = false, double grad_scale = 1.0,
                 double* kl_out = nullptr) {
  if (g.rollouts.size() != g.advantages.size())
    throw ShapeMismatch("group rollouts/advantages length mismatch");
  size_t total_tokens = 0;
  for (const auto& r : g.rollouts) {
    if (r.logps.size() != r.completion_tokens.size())
      throw ShapeMismatch("rollout logps/tokens length mismatch");
    total_tokens += r.completion_tokens.size();
  }
  if (total_tokens == 0) throw ShapeMismatch("group has no completion tokens");
  const double invN = 1.0 / static_cast<double>(total_tokens);
  const int V = policy.model().config().vocab;

  double surrogate = 0, kl = 0;
  for (size_t i = 0; i < g.rollouts.size(); ++i) {
    const Rollout& r = g.rollouts[i];
    const double a = g.advantages[i];
    std::vector<int> seq = r.prompt_tokens;
    seq.insert(seq.end(), r.completion_tokens.begin(), r.completion_tokens.end());
    Cache<T> cache = policy.model().fwd(seq);
    std::vector<double> ref_lp = reference.score(r.prompt_tokens, r.completion_tokens);
    const int np = static_cast<int>(r.prompt_tokens.size());
    const int nt = static_cast<int>(r.completion_tokens.size());
    std::vector<T> dlogits;
    if (with_grad) dlogits.assign(static_cast<size_t>(cache.n) * V, T(0));
    for (int t = 0; t < nt; ++t) {
      const int row = np + t - 1;
      const int tgt = r.completion_tokens[t];
      std::vector<T> lp = log_softmax(&cache.logits[static_cast<size_t>(row) * V], V);
      const double lp_theta = static_cast<double>(lp[tgt]);
      const double rho = std::exp(lp_theta - r.logps[t]);
      const double clipped = std::clamp(rho, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
      surrogate += std::min(rho * a, clipped * a);
      const double rho_ref = std::exp(ref_lp[t] - lp_theta);
      kl += rho_ref - (ref_lp[t] - lp_theta) - 1.0;
      if (with_grad) {
        const bool clipped_out = (a > 0 && rho > 1.0 + cfg.clip_eps) ||
                                 (a < 0 && rho < 1.0 - cfg.clip_eps);
        double coeff = 0.0;
        if (!clipped_out) coeff -= invN * rho * a;          // surrogate term
        coeff += cfg.kl_coeff * invN * (1.0 - rho_ref);      // KL term
        coeff *= grad_scale;
        if (coeff != 0.0) {
          T* drow = &dlogits[static_cast<size_t>(row) * V];
          for (int c = 0; c < V; ++c)
            drow[c] = static_cast<T>(coeff *
                                     (static_cast<double>(c == tgt) -
                                      std::exp(static_cast<double>(lp[c]))));
        }
      }
    }
    if (with_grad) policy.model().backward(cache, dlogits);
  }
  if (kl_out) *kl_out = kl * invN;
  return -surrogate * invN + cfg.kl_coeff * kl * invN;
}

struct RlStepMetrics {
  double loss = 0;
  double kl = 0;
  double mean_reward_cls = 0;
  double mean_reward_gen = 0;
  int n_cls_rollouts = 0;
  int n_gen_rollouts = 0;
  double frac_valid = 0;
  double param_norm = 0;
  bool updated = false;

  json to_json() const {
    return json{{"loss", loss},
                {"kl", kl},
                {"mean_reward_cls", mean_reward_cls},
                {"mean_reward_gen", mean_reward_gen},
                {"n_cls_rollouts", n_cls_rollouts},
                {"n_gen_rollouts", n_gen_rollouts},
                {"frac_valid", frac_valid},
                {"param_norm", param_norm},
                {"updated", updated}};
  }
};

// One optimizer update on the mean grpo_loss across groups. An exactly-zero
// gradient (all advantages zero, no KL pressure) skips the update so the
// parameters stay untouched.
template <typename T>
RlStepMetrics rl_step(Policy<T>& policy, const Policy<T>& reference, Adam<T>& opt,
                      const std::vector<Group>& groups, const RLConfig& cfg) {
  if (groups.empty()) throw EmptyBatch("rl_step: no groups");
  RlStepMetrics m;
  policy.model().zero_grads();
  const double scale = 1.0 / static_cast<double>(groups.size());
  int n_valid = 0, n_total = 0;
  for (const auto& g : groups) {
    double kl = 0;
    m.loss += grpo_loss(policy, reference, g, cfg, true, scale, &kl) * scale;
    m.kl += kl * scale;
    for (size_t i = 0; i < g.rollouts.size(); ++i) {
      const int r = g.rewards[i].reward;
      if (g.task == TaskTag::cls_cot) {
        m.mean_reward_cls += r;
        ++m.n_cls_rollouts;
      } else {
        m.mean_reward_gen += r;
        ++m.n_gen_rollouts;
      }
      n_valid += g.valid_format[i] ? 1 : 0;
      ++n_total;
    }
  }
  if (m.n_cls_rollouts) m.mean_reward_cls /= m.n_cls_rollouts;
  if (m.n_gen_rollouts) m.mean_reward_gen /= m.n_gen_rollouts;
  m.frac_valid = n_total ? static_cast<double>(n_valid) / n_total : 0.0;

  bool all_zero = true;
  for (T gr : policy.model().grads())
    if (gr != T(0)) {
      all_zero = false;
      break;
    }
  if (!all_zero) {
    m.param_norm = policy.grad_step(opt);
    m.updated = true;
  } else {
    double sq = 0;
    for (T p : policy.model().params()) sq += static_cast<double>(p) * p;
    m.param_norm = std::sqrt(sq);
  }
  return m;
}

struct RlResult {
  std::string checkpoint_path;
  std::string metrics_path;
  int discarded_groups = 0;
  double final_mean_reward_cls = 0;
  double final_mean_reward_gen = 0;
};

// Full stage-2 loop from a stage-1 checkpoint. The reference policy is the
// loaded checkpoint, frozen. Deterministic in cfg.seed; resume_from an RL
// checkpoint reproduces the uninterrupted run bit for bit because every
// random draw is keyed on absolute step indices.
template <typename T>
RlResult run_rl(const RLConfig& cfg, const std::string& sft_checkpoint,
                const Dataset& data, ChatClient* client = nullptr,
                const std::string& resume_from = "",
                const std::function<void(const Policy<T>&, int)>& eval_cb = nullptr) {
  cfg.validate();
  Dataset train = data.with_split(Split::train);
  if (train.utterances.empty()) throw EmptyDataset("rl: no training utterances");
  if (cfg.judge == JudgeMode::oracle)
    for (const auto& u : train.utterances)
      if (u.dataset != DatasetId::synthetic)
        throw NotSynthetic("oracle judge requires a synthetic corpus");
  std::filesystem::create_directories(cfg.out_dir);

  LoadedCheckpoint<T> base = load_checkpoint<T>(sft_checkpoint);
  Policy<T> reference = base.policy.snapshot();
  Policy<T> policy = std::move(base.policy);
  Adam<T> opt(policy.model().param_count(), cfg.adam);
  int start_step = 0;
  if (!resume_from.empty()) {
    LoadedCheckpoint<T> rl = load_checkpoint<T>(resume_from);
    policy = std::move(rl.policy);
    if (!rl.opt) throw SchemaError("resume checkpoint lacks optimizer state");
    opt = std::move(*rl.opt);
    start_step = static_cast<int>(rl.step);
  }

  const std::string tag = to_string(cfg.task_mix);
  RlResult res;
  res.metrics_path = cfg.out_dir + "/metrics_" + tag + ".jsonl";
  // Append on resume so the merged log matches an uninterrupted run.
  JsonlWriter metrics(res.metrics_path, start_step > 0);
  JsonlWriter reward_log(cfg.out_dir + "/rewards_" + tag + ".jsonl", start_step > 0);

  const auto& utts = train.utterances;
  json run_manifest{{"stage", "rl"},
                    {"config", cfg.to_json()},
                    {"sft_parent", sft_checkpoint},
                    {"bank_version", kBankVersion},
                    {"data_seed", data.seed},
                    {"provenance", data.provenance}};
  write_file(cfg.out_dir + "/run_manifest_" + tag + ".json", run_manifest.dump(2) + "\n");

  RlStepMetrics last;
  for (int step = start_step; step < cfg.steps; ++step) {
    std::vector<Group> groups;
    for (int gi = 0; gi < cfg.groups_per_step; ++gi) {
      uint64_t ukey = mix_seed(cfg.seed, hash_str("rl-utt"), static_cast<uint64_t>(step),
                               static_cast<uint64_t>(gi));
      const Utterance& u = utts[ukey % utts.size()];
      Rng task_rng(mix_seed(cfg.seed, hash_str("rl-task"), static_cast<uint64_t>(step),
                            static_cast<uint64_t>(gi)));
      TaskTag task = sample_task(cfg, task_rng);
      try {
        groups.push_back(collect_group(policy, u, task, cfg, step, gi, client));
      } catch (const GroupDiscarded&) {
        ++res.discarded_groups;
      }
    }
    json rec{{"step", step}, {"groups", groups.size()},
             {"discarded_total", res.discarded_groups}};
    if (!groups.empty()) {
      last = rl_step(policy, reference, opt, groups, cfg);
      for (const auto& g : groups)
        for (const auto& rr : g.rewards) reward_log.write(rr.to_json());
      rec.update(last.to_json());
    }
    metrics.write(rec);
    const int done = step + 1;
    json meta{{"stage", "rl"},          {"task_mix", tag},
              {"variant", rl_variant_name(cfg.task_mix)},
              {"config", cfg.to_json()}, {"sft_parent", sft_checkpoint},
              {"data_seed", data.seed}, {"provenance", data.provenance}};
    if (cfg.save_every > 0 && done % cfg.save_every == 0 && done < cfg.steps)
      save_checkpoint(cfg.out_dir + "/rl_" + tag + "_step" + std::to_string(done) + ".ckpt",
                      policy, &opt, done, meta);
    if (eval_cb && cfg.eval_every > 0 && done % cfg.eval_every == 0)
      eval_cb(policy, done);
  }

  res.checkpoint_path = cfg.out_dir + "/rl_" + tag + "_final.ckpt";
  json meta{{"stage", "rl"},          {"task_mix", tag},
            {"variant", rl_variant_name(cfg.task_mix)},
            {"config", cfg.to_json()}, {"sft_parent", sft_checkpoint},
            {"data_seed", data.seed}, {"provenance", data.provenance}};
  save_checkpoint(res.checkpoint_path, policy, &opt, cfg.steps, meta);
  res.final_mean_reward_cls = last.mean_reward_cls;
  res.final_mean_reward_gen = last.mean_reward_gen;
  return res;
}

}  // namespace pallm
