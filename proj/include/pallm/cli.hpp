// Command-line front end. Strict-keyed JSON config plus flag overrides,
// subcommands for corpus generation, manifest ingestion, both training
// stages, evaluation, and the variant comparison table. Exit codes:
// 0 success, 2 config error, 3 missing/mismatched inputs, 4 external
// service failure.
#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pallm/common.hpp"
#include "pallm/corpus.hpp"
#include "pallm/errors.hpp"
#include "pallm/evalx.hpp"
#include "pallm/grpo.hpp"
#include "pallm/httpchat.hpp"
#include "pallm/model.hpp"
#include "pallm/policy.hpp"
#include "pallm/sft.hpp"
#include "pallm/synth.hpp"
#include "pallm/vocab.hpp"

namespace pallm {
namespace cli {

// Training and evaluation run in single precision end to end.
using Real = float;

// --- strict config ----------------------------------------------------------

inline void check_keys(const json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (j.is_null()) return;
  if (!j.is_object()) throw InvalidConfig(where + " must be a JSON object");
  for (const auto& [key, val] : j.items()) {
    (void)val;
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw InvalidConfig("unknown config key: " + where + "." + key);
  }
}

// Rejects unknown keys everywhere so typos fail loudly instead of being
// silently ignored. Per-run seeds/out dirs come from the top level and the
// flags, never from the sections.
inline void validate_config(const json& root) {
  check_keys(root, "config",
             {"seed", "out", "manifest", "model", "corpus", "ingest", "sft", "rl",
              "eval", "compare"});
  if (root.contains("model"))
    check_keys(root.at("model"), "model",
               {"ctx", "width", "heads", "blocks", "mlp_mult", "init_std"});
  if (root.contains("corpus"))
    check_keys(root.at("corpus"), "corpus",
               {"n_per_tone", "prosody_dim", "noise_sigma", "frac_aligned",
                "frac_text_neutral", "frac_conflict", "eval_fraction"});
  if (root.contains("ingest")) check_keys(root.at("ingest"), "ingest", {"eval_fraction"});
  if (root.contains("sft")) {
    check_keys(root.at("sft"), "sft",
               {"steps", "batch_size", "adam", "cls_prime_frac", "gen_prime_frac",
                "gen_only", "generator", "max_target_tokens", "calib_lo", "calib_hi",
                "mask_prosody"});
    if (root.at("sft").contains("adam"))
      check_keys(root.at("sft").at("adam"), "sft.adam",
                 {"lr", "beta1", "beta2", "eps", "grad_clip"});
  }
  if (root.contains("rl")) {
    check_keys(root.at("rl"), "rl",
               {"K", "clip_eps", "kl_coeff", "adam", "temperature", "steps",
                "groups_per_step", "max_new_tokens", "task_mix", "judge", "calib_lo",
                "calib_hi", "mask_prosody", "eval_every", "save_every"});
    if (root.at("rl").contains("adam"))
      check_keys(root.at("rl").at("adam"), "rl.adam",
                 {"lr", "beta1", "beta2", "eps", "grad_clip"});
  }
  if (root.contains("eval"))
    check_keys(root.at("eval"), "eval",
               {"stage", "judge", "max_new_tokens", "calib_lo", "calib_hi",
                "mask_prosody", "with_appropriateness"});
  if (root.contains("compare"))
    check_keys(root.at("compare"), "compare", {"checkpoints", "judge", "by_cue_mode"});
}

inline json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("config file not found: " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidConfig("config is not valid JSON (" + path + "): " + e.what());
  }
  validate_config(root);
  return root;
}

// --- flag state and resolution ----------------------------------------------

struct Options {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out;
  std::string manifest;
  std::string mode;      // sft: gen_only | cls_and_gen
  std::string from_sft;  // rl: stage-1 checkpoint
  std::string resume;    // rl: checkpoint to resume from
  std::string task_mix;  // rl: cls_only | gen_only | cls_and_gen
  std::string judge;     // oracle | external
  bool by_cue_mode = false;
  std::string ckpt;                 // eval
  std::vector<std::string> ckpts;   // compare
};

struct Resolved {
  json cfg;
  uint64_t seed = 0;
  std::string out;
  std::string manifest;  // may be empty; commands that need it check
};

inline Resolved resolve(const Options& o) {
  Resolved r;
  r.cfg = load_config(o.config_path);
  r.seed = o.seed ? *o.seed : r.cfg.value("seed", uint64_t{0});
  r.out = !o.out.empty() ? o.out : r.cfg.value("out", std::string("out"));
  r.manifest = !o.manifest.empty() ? o.manifest : r.cfg.value("manifest", std::string());
  return r;
}

inline ModelConfig model_config(const json& root) {
  ModelConfig m;
  m.vocab = vocab().size();
  if (root.contains("model")) {
    const json& j = root.at("model");
    if (j.contains("ctx")) m.ctx = j.at("ctx").get<int>();
    if (j.contains("width")) m.width = j.at("width").get<int>();
    if (j.contains("heads")) m.heads = j.at("heads").get<int>();
    if (j.contains("blocks")) m.blocks = j.at("blocks").get<int>();
    if (j.contains("mlp_mult")) m.mlp_mult = j.at("mlp_mult").get<int>();
    if (j.contains("init_std")) m.init_std = j.at("init_std").get<double>();
  }
  m.validate();
  return m;
}

inline JudgeMode resolve_judge(const std::string& flag, const json& section) {
  if (!flag.empty()) return judge_mode_from_string(flag);
  if (section.contains("judge"))
    return judge_mode_from_string(section.at("judge").get<std::string>());
  return JudgeMode::oracle;
}

inline std::unique_ptr<ChatClient> external_client() {
  return std::make_unique<HttpChatClient>(chat_config_from_env());
}

inline void write_resolved(const std::string& dir, json j) {
  std::filesystem::create_directories(dir);
  write_file(dir + "/resolved_config.json", j.dump(2) + "\n");
}

// --- dataset preparation ------------------------------------------------------

struct Prepared {
  Dataset data;
  DropReport report;
  json split_info;
};

// Loads a manifest and guarantees every record a train/eval assignment.
// Explicit split fields are honored as-is; otherwise the source-specific
// rule applies: held-out speaker pair for expresso, 10% of recordings for
// iemocap/ravdess, 20% for synthetic. config.ingest.eval_fraction overrides
// the fraction-based rules.
inline Prepared prepare_dataset(const Resolved& r) {
  if (r.manifest.empty())
    throw MissingInput("no corpus manifest given (use --manifest or config \"manifest\")");
  LoadResult lr = load_manifest(r.manifest);
  Prepared p;
  p.data = std::move(lr.dataset);
  p.report = std::move(lr.report);
  p.data.seed = r.seed;
  if (p.data.utterances.empty())
    throw EmptyDataset("manifest has no usable records: " + r.manifest);

  bool all_assigned = true;
  for (const auto& u : p.data.utterances)
    all_assigned = all_assigned && u.split != Split::unassigned;

  if (all_assigned) {
    p.split_info["rule"] = "explicit";
  } else {
    const DatasetId src = p.data.utterances.front().dataset;
    std::pair<Dataset, Dataset> parts = [&] {
      if (src == DatasetId::expresso) {
        p.split_info["rule"] = "speaker_holdout";
        return split_expresso(p.data, r.seed);
      }
      double frac = src == DatasetId::synthetic ? 0.2 : 0.1;
      if (r.cfg.contains("ingest") && r.cfg.at("ingest").contains("eval_fraction"))
        frac = r.cfg.at("ingest").at("eval_fraction").get<double>();
      p.split_info["rule"] = "fraction";
      p.split_info["eval_fraction"] = frac;
      return split_fraction(p.data, frac, r.seed);
    }();
    std::map<std::string, Split> split_of;
    for (const auto& u : parts.first.utterances) split_of[u.id] = Split::train;
    for (const auto& u : parts.second.utterances) split_of[u.id] = Split::eval;
    for (auto& u : p.data.utterances) u.split = split_of.at(u.id);
    if (src == DatasetId::expresso) {
      p.split_info["eval_speakers"] = parts.second.speakers();
    }
  }
  size_t n_train = 0, n_eval = 0;
  for (const auto& u : p.data.utterances) (u.split == Split::eval ? n_eval : n_train)++;
  p.split_info["n_train"] = n_train;
  p.split_info["n_eval"] = n_eval;
  return p;
}

// --- subcommands --------------------------------------------------------------

inline int cmd_gen_corpus(const Options& o) {
  Resolved r = resolve(o);
  const json corpus_cfg = r.cfg.value("corpus", json::object());
  SynthConfig sc = SynthConfig::from_json(corpus_cfg);
  sc.seed = r.seed;
  sc.validate();
  const double eval_fraction = corpus_cfg.value("eval_fraction", 0.2);

  Dataset ds = synth_corpus(sc);
  auto [tr, ev] = split_fraction(ds, eval_fraction, r.seed);
  std::map<std::string, Split> split_of;
  for (const auto& u : tr.utterances) split_of[u.id] = Split::train;
  for (const auto& u : ev.utterances) split_of[u.id] = Split::eval;
  for (auto& u : ds.utterances) u.split = split_of.at(u.id);

  std::filesystem::create_directories(r.out);
  const std::string manifest_path = r.out + "/corpus.jsonl";
  write_manifest(ds, manifest_path);
  write_manifest(tr, r.out + "/train.jsonl");
  write_manifest(ev, r.out + "/eval.jsonl");

  std::map<std::string, int> by_tone, by_cue;
  for (const auto& u : ds.utterances) {
    by_tone[u.tone]++;
    by_cue[to_string(u.cue_mode)]++;
  }
  json summary{{"manifest", manifest_path},
               {"train", r.out + "/train.jsonl"},
               {"eval", r.out + "/eval.jsonl"},
               {"n_total", ds.utterances.size()},
               {"n_train", tr.utterances.size()},
               {"n_eval", ev.utterances.size()},
               {"by_tone", by_tone},
               {"by_cue_mode", by_cue}};
  write_file(r.out + "/corpus_summary.json", summary.dump(2) + "\n");
  json cc = sc.to_json();
  cc["eval_fraction"] = eval_fraction;
  write_resolved(r.out, json{{"command", "gen-corpus"},
                             {"config_file", o.config_path},
                             {"seed", r.seed},
                             {"out", r.out},
                             {"corpus", cc}});
  std::cout << summary.dump(2) << "\n";
  return 0;
}

inline int cmd_ingest(const Options& o) {
  Resolved r = resolve(o);
  Prepared p = prepare_dataset(r);

  std::filesystem::create_directories(r.out);
  const std::string normalized = r.out + "/ingest_manifest.jsonl";
  write_manifest(p.data, normalized);

  json summary{{"manifest", r.manifest},
               {"normalized_manifest", normalized},
               {"kept", p.report.kept},
               {"dropped_total", p.report.dropped_total()},
               {"dropped_length", p.report.dropped_length},
               {"dropped_surprised", p.report.dropped_surprised},
               {"dropped_unknown_tone", p.report.dropped_unknown_tone},
               {"split", p.split_info}};
  write_file(r.out + "/ingest_summary.json", summary.dump(2) + "\n");
  write_resolved(r.out, json{{"command", "ingest"},
                             {"config_file", o.config_path},
                             {"seed", r.seed},
                             {"out", r.out},
                             {"manifest", r.manifest}});
  std::cout << summary.dump(2) << "\n";
  return 0;
}

inline int cmd_sft(const Options& o) {
  Resolved r = resolve(o);
  Prepared p = prepare_dataset(r);

  SftConfig sc = SftConfig::from_json(r.cfg.value("sft", json::object()));
  if (!o.mode.empty()) {
    if (o.mode == "gen_only") sc.gen_only = true;
    else if (o.mode == "cls_and_gen") sc.gen_only = false;
    else throw InvalidConfig("--mode must be gen_only or cls_and_gen, got " + o.mode);
  }
  sc.seed = r.seed;
  sc.out_dir = r.out + (sc.gen_only ? "/sft_gen_only" : "/sft_cls_gen");
  if (sc.mask_prosody) sc.out_dir += "_masked";
  const ModelConfig mc = model_config(r.cfg);

  std::unique_ptr<ChatClient> client;
  if (sc.generator == "external") client = external_client();

  SftResult res = run_sft<Real>(sc, mc, p.data, client.get());
  write_resolved(sc.out_dir, json{{"command", "sft"},
                                  {"config_file", o.config_path},
                                  {"seed", r.seed},
                                  {"out", r.out},
                                  {"manifest", r.manifest},
                                  {"model", mc.to_json()},
                                  {"sft", sc.to_json()}});
  json summary{{"checkpoint", res.checkpoint_path},
               {"metrics", res.metrics_path},
               {"final_L_cls", res.final_l_cls},
               {"final_L_gen", res.final_l_gen},
               {"final_L_SFT", res.final_l_sft}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

inline int cmd_rl(const Options& o) {
  if (o.from_sft.empty())
    throw MissingInput("rl requires --from-sft <stage-1 checkpoint>");
  Resolved r = resolve(o);
  Prepared p = prepare_dataset(r);

  RLConfig rc = RLConfig::from_json(r.cfg.value("rl", json::object()));
  if (!o.task_mix.empty()) rc.task_mix = task_mix_from_string(o.task_mix);
  if (!o.judge.empty()) rc.judge = judge_mode_from_string(o.judge);
  rc.seed = r.seed;
  rc.out_dir = r.out + "/rl_" + to_string(rc.task_mix);
  if (rc.mask_prosody) rc.out_dir += "_masked";

  std::unique_ptr<ChatClient> client;
  if (rc.judge == JudgeMode::external) client = external_client();

  // Periodic held-out eval alongside training; resume appends so an
  // interrupted run's log converges to the uninterrupted one.
  std::filesystem::create_directories(rc.out_dir);
  EvalConfig ec;
  ec.stage = EvalStage::rl;
  ec.judge = rc.judge;
  ec.calib_lo = rc.calib_lo;
  ec.calib_hi = rc.calib_hi;
  ec.max_new_tokens = rc.max_new_tokens;
  ec.mask_prosody = rc.mask_prosody;
  JsonlWriter eval_log(rc.out_dir + "/eval_" + to_string(rc.task_mix) + ".jsonl",
                       !o.resume.empty());
  auto eval_cb = [&](const Policy<Real>& pol, int step) {
    EvalResult er = evaluate(pol, p.data, ec, rl_variant_name(rc.task_mix), client.get());
    json row = er.to_json();
    row["step"] = step;
    eval_log.write(row);
  };

  RlResult res = run_rl<Real>(rc, o.from_sft, p.data, client.get(), o.resume, eval_cb);
  write_resolved(rc.out_dir, json{{"command", "rl"},
                                  {"config_file", o.config_path},
                                  {"seed", r.seed},
                                  {"out", r.out},
                                  {"manifest", r.manifest},
                                  {"from_sft", o.from_sft},
                                  {"rl", rc.to_json()}});
  json summary{{"checkpoint", res.checkpoint_path},
               {"metrics", res.metrics_path},
               {"discarded_groups", res.discarded_groups},
               {"final_mean_reward_cls", res.final_mean_reward_cls},
               {"final_mean_reward_gen", res.final_mean_reward_gen}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

inline EvalStage stage_for(const json& meta, const std::string& requested) {
  if (requested == "sft") return EvalStage::sft;
  if (requested == "rl") return EvalStage::rl;
  if (!requested.empty() && requested != "auto")
    throw InvalidConfig("eval stage must be auto, sft, or rl, got " + requested);
  return meta.value("stage", std::string("rl")) == "sft" ? EvalStage::sft : EvalStage::rl;
}

inline EvalConfig eval_config_from(const json& root, EvalStage stage, JudgeMode judge) {
  EvalConfig e;
  e.stage = stage;
  e.judge = judge;
  if (root.contains("eval")) {
    const json& j = root.at("eval");
    if (j.contains("max_new_tokens")) e.max_new_tokens = j.at("max_new_tokens").get<int>();
    if (j.contains("calib_lo")) e.calib_lo = j.at("calib_lo").get<double>();
    if (j.contains("calib_hi")) e.calib_hi = j.at("calib_hi").get<double>();
    if (j.contains("mask_prosody")) e.mask_prosody = j.at("mask_prosody").get<bool>();
    if (j.contains("with_appropriateness"))
      e.with_appropriateness = j.at("with_appropriateness").get<bool>();
  }
  return e;
}

inline int cmd_eval(const Options& o) {
  if (o.ckpt.empty()) throw MissingInput("eval requires --ckpt <checkpoint>");
  Resolved r = resolve(o);
  Prepared p = prepare_dataset(r);

  LoadedCheckpoint<Real> lc = load_checkpoint<Real>(o.ckpt);
  const json eval_section = r.cfg.value("eval", json::object());
  const EvalStage stage = stage_for(lc.meta, eval_section.value("stage", std::string("auto")));
  const JudgeMode judge = resolve_judge(o.judge, eval_section);
  EvalConfig ec = eval_config_from(r.cfg, stage, judge);

  std::unique_ptr<ChatClient> client;
  if (judge == JudgeMode::external) client = external_client();

  const std::string variant =
      lc.meta.value("variant", std::filesystem::path(o.ckpt).filename().string());
  EvalResult res = evaluate(lc.policy, p.data, ec, variant, client.get());

  std::filesystem::create_directories(r.out);
  RenderedReport rep = variant_report({res}, "evaluation (eval split)");
  json machine{{"variant", res.variant},
               {"dataset", res.dataset},
               {"stage", to_string(stage)},
               {"judge", to_string(judge)},
               {"sentiment_accuracy", res.sentiment_acc},
               {"appropriateness", res.appropriateness},
               {"n_examples", res.n_examples}};
  write_file(r.out + "/report.json", machine.dump(2) + "\n");
  write_file(r.out + "/report.txt", rep.text);
  {
    JsonlWriter audit(r.out + "/audit.jsonl");
    for (const auto& rec : res.records) audit.write(rec);
  }
  write_resolved(r.out, json{{"command", "eval"},
                             {"config_file", o.config_path},
                             {"seed", r.seed},
                             {"out", r.out},
                             {"manifest", r.manifest},
                             {"ckpt", o.ckpt},
                             {"stage", to_string(stage)},
                             {"judge", to_string(judge)}});
  std::cout << rep.text;
  return 0;
}

inline int cmd_compare(const Options& o) {
  Resolved r = resolve(o);
  const json section = r.cfg.value("compare", json::object());

  std::vector<std::string> paths = o.ckpts;
  if (paths.empty() && section.contains("checkpoints")) {
    const json& c = section.at("checkpoints");
    if (c.is_array()) {
      for (const auto& v : c) paths.push_back(v.get<std::string>());
    } else if (c.is_object()) {
      for (const auto& [name, v] : c.items()) {
        (void)name;
        paths.push_back(v.get<std::string>());
      }
    } else {
      throw InvalidConfig("compare.checkpoints must be an array or object of paths");
    }
  }
  if (paths.size() < 2)
    throw MissingInput("compare needs at least two checkpoints (--ckpt, repeatable)");
  const bool by_cue = o.by_cue_mode || section.value("by_cue_mode", false);
  const JudgeMode judge = resolve_judge(o.judge, section);

  Prepared p = prepare_dataset(r);
  std::unique_ptr<ChatClient> client;
  if (judge == JudgeMode::external) client = external_client();

  // All variants must come from one corpus; otherwise the table compares
  // apples to oranges.
  std::vector<LoadedCheckpoint<Real>> cks;
  for (const auto& path : paths) cks.push_back(load_checkpoint<Real>(path));
  for (size_t i = 1; i < cks.size(); ++i) {
    const bool same =
        cks[i].meta.value("data_seed", uint64_t{0}) ==
            cks[0].meta.value("data_seed", uint64_t{0}) &&
        cks[i].meta.value("provenance", std::string()) ==
            cks[0].meta.value("provenance", std::string());
    if (!same)
      throw MissingInput("compare: checkpoints were trained on different corpora (" +
                         paths[0] + " vs " + paths[i] + ")");
  }

  auto eval_all = [&](const Dataset& data) {
    std::vector<EvalResult> out;
    for (size_t i = 0; i < cks.size(); ++i) {
      const EvalStage stage = stage_for(cks[i].meta, "auto");
      EvalConfig ec = eval_config_from(r.cfg, stage, judge);
      const std::string variant = cks[i].meta.value(
          "variant", std::filesystem::path(paths[i]).filename().string());
      out.push_back(evaluate(cks[i].policy, data, ec, variant, client.get()));
    }
    return out;
  };

  std::string text;
  json machine;
  RenderedReport overall = variant_report(eval_all(p.data), "overall (eval split)");
  text += overall.text;
  machine["overall"] = overall.machine;

  if (by_cue) {
    bool any = false;
    for (CueMode m : {CueMode::aligned, CueMode::text_neutral, CueMode::conflict}) {
      Dataset sub = filter_by_cue_mode(p.data, m);
      bool has_eval = false;
      for (const auto& u : sub.utterances) has_eval = has_eval || u.split == Split::eval;
      if (!has_eval) continue;
      any = true;
      RenderedReport rep =
          variant_report(eval_all(sub), std::string("cue mode: ") + to_string(m));
      text += "\n" + rep.text;
      machine["by_cue_mode"][to_string(m)] = rep.machine;
    }
    if (!any)
      throw InvalidConfig("--by-cue-mode needs a corpus with cue_mode annotations");
  }

  std::filesystem::create_directories(r.out);
  write_file(r.out + "/report.txt", text);
  write_file(r.out + "/report.json", machine.dump(2) + "\n");
  write_resolved(r.out, json{{"command", "compare"},
                             {"config_file", o.config_path},
                             {"seed", r.seed},
                             {"out", r.out},
                             {"manifest", r.manifest},
                             {"checkpoints", paths},
                             {"judge", to_string(judge)},
                             {"by_cue_mode", by_cue}});
  std::cout << text;
  return 0;
}

// --- entry point ----------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv) {
  Options o;
  CLI::App app{"dual-channel (text + prosody) sentiment and response pipeline"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* s) {
    s->add_option("--config", o.config_path, "JSON config file");
    s->add_option("--seed", o.seed, "run seed (overrides config)");
    s->add_option("--out", o.out, "output directory (overrides config)");
    return s;
  };
  auto add_manifest = [&](CLI::App* s) {
    s->add_option("--manifest", o.manifest, "corpus manifest (overrides config)");
    return s;
  };

  add_common(app.add_subcommand("gen-corpus", "generate the synthetic dual-channel corpus"));

  add_manifest(add_common(
      app.add_subcommand("ingest", "filter/map/split a manifest, print the drop report")));

  CLI::App* sft = add_manifest(add_common(
      app.add_subcommand("sft", "stage 1: joint supervised fine-tuning")));
  sft->add_option("--mode", o.mode, "gen_only | cls_and_gen")
      ->check(CLI::IsMember({"gen_only", "cls_and_gen"}));

  CLI::App* rl = add_manifest(add_common(
      app.add_subcommand("rl", "stage 2: multi-task GRPO from a stage-1 checkpoint")));
  rl->add_option("--from-sft", o.from_sft, "stage-1 checkpoint");
  rl->add_option("--resume", o.resume, "RL checkpoint to resume from");
  rl->add_option("--task-mix", o.task_mix, "cls_only | gen_only | cls_and_gen")
      ->check(CLI::IsMember({"cls_only", "gen_only", "cls_and_gen"}));
  rl->add_option("--judge", o.judge, "oracle | external")
      ->check(CLI::IsMember({"oracle", "external"}));

  CLI::App* ev = add_manifest(add_common(
      app.add_subcommand("eval", "evaluate one checkpoint on the eval split")));
  ev->add_option("--ckpt", o.ckpt, "checkpoint to evaluate");
  ev->add_option("--judge", o.judge, "oracle | external")
      ->check(CLI::IsMember({"oracle", "external"}));

  CLI::App* cmp = add_manifest(add_common(
      app.add_subcommand("compare", "side-by-side variant table on one corpus")));
  cmp->add_option("--ckpt", o.ckpts, "checkpoint (repeat once per variant)");
  cmp->add_option("--judge", o.judge, "oracle | external")
      ->check(CLI::IsMember({"oracle", "external"}));
  cmp->add_flag("--by-cue-mode", o.by_cue_mode, "add per-cue-mode sub-tables");

  int rc = 0;
  app.get_subcommand("gen-corpus")->callback([&] { rc = cmd_gen_corpus(o); });
  app.get_subcommand("ingest")->callback([&] { rc = cmd_ingest(o); });
  app.get_subcommand("sft")->callback([&] { rc = cmd_sft(o); });
  app.get_subcommand("rl")->callback([&] { rc = cmd_rl(o); });
  app.get_subcommand("eval")->callback([&] { rc = cmd_eval(o); });
  app.get_subcommand("compare")->callback([&] { rc = cmd_compare(o); });

  auto fail = [](const std::exception& e, int code) {
    std::cerr << "error: " << e.what() << "\n";
    return code;
  };
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const InvalidConfig& e) {
    return fail(e, 2);
  } catch (const SchemaError& e) {
    return fail(e, 2);
  } catch (const pallm::ParseError& e) {
    return fail(e, 2);
  } catch (const json::exception& e) {
    return fail(e, 2);
  } catch (const MissingInput& e) {
    return fail(e, 3);
  } catch (const NotSynthetic& e) {
    return fail(e, 3);
  } catch (const TooFewSpeakers& e) {
    return fail(e, 3);
  } catch (const EmptyDataset& e) {
    return fail(e, 3);
  } catch (const IoError& e) {
    return fail(e, 3);
  } catch (const ExternalUnavailable& e) {
    return fail(e, 4);
  } catch (const Error& e) {
    return fail(e, 1);
  } catch (const std::exception& e) {
    return fail(e, 1);
  }
  return rc;
}

}  // namespace cli
}  // namespace pallm
