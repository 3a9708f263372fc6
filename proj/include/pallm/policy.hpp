// Policy wrapper: prompt encoding, temperature sampling with recorded
// log-probs, exact rescoring, optimizer stepping and checkpoint I/O.
#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "pallm/corpus.hpp"
#include "pallm/model.hpp"
#include "pallm/optim.hpp"
#include "pallm/vocab.hpp"

namespace pallm {

struct SamplerConfig {
  double temperature = 1.0;
  int max_new_tokens = 48;
  uint64_t seed = 0;

  void validate() const {
    if (!(temperature > 0)) throw InvalidConfig("temperature must be > 0");
    if (max_new_tokens < 1) throw InvalidConfig("max_new_tokens must be >= 1");
  }
};

struct Rollout {
  std::vector<int> prompt_tokens;
  std::vector<int> completion_tokens;
  std::vector<double> logps;  // recorded at sampling time, untempered
  TaskTag task = TaskTag::cls_cot;
  std::string text;  // literal decode of the completion
  std::string utterance_id;
};

struct EncodeOptions {
  double calib_lo = 0.0;
  double calib_hi = 1.0;
  bool mask_prosody = false;
};

// Prompt layout: task tag, prosody tokens (or <pmask> per dim when masked),
// <sep>, transcript, <sep>, instruction, <ans>. Generation starts after <ans>.
inline std::vector<int> encode_input(const Utterance& u, TaskTag task,
                                     const std::string& instruction,
                                     const EncodeOptions& opt = {}) {
  const Vocab& v = vocab();
  std::vector<int> seq;
  seq.push_back(v.tag(task));
  if (opt.mask_prosody) {
    for (size_t d = 0; d < u.prosody.size(); ++d) seq.push_back(v.pmask());
  } else {
    for (int t : v.prosody_tokens(u.prosody, opt.calib_lo, opt.calib_hi)) seq.push_back(t);
  }
  seq.push_back(v.sep());
  for (int t : v.encode_text(u.transcript)) seq.push_back(t);
  seq.push_back(v.sep());
  for (int t : v.encode_text(instruction)) seq.push_back(t);
  seq.push_back(v.ans());
  return seq;
}

template <typename T>
class Policy {
 public:
  explicit Policy(const ModelConfig& cfg, uint64_t seed = 0) : model_(cfg, seed) {
    if (cfg.vocab != vocab().size())
      throw InvalidConfig("model vocab size must match the tokenizer (" +
                          std::to_string(vocab().size()) + ")");
  }

  TransformerModel<T>& model() { return model_; }
  const TransformerModel<T>& model() const { return model_; }

  // Deep copy; the frozen reference for the RL KL term.
  Policy snapshot() const { return *this; }

  // Temperature sampling with per-token untempered log-probs. Deterministic
  // in cfg.seed. Stops at <eos> (included in the completion) or when the
  // token budget / context runs out.
  Rollout sample(const std::vector<int>& prompt, const SamplerConfig& cfg) const {
    cfg.validate();
    const int ctx = model_.config().ctx;
    const int n = static_cast<int>(prompt.size());
    if (n == 0) throw EmptyBatch("sample: empty prompt");
    if (n >= ctx)
      throw ContextOverflow("prompt length " + std::to_string(n) +
                            " leaves no room in context " + std::to_string(ctx));
    Rollout r;
    r.prompt_tokens = prompt;
    IncState<T> st = model_.new_state();
    std::vector<T> logits;
    for (int t : prompt) logits = model_.inc_step(st, t);
    Rng rng(cfg.seed);
    const int budget = std::min(cfg.max_new_tokens, ctx - n);
    for (int i = 0; i < budget; ++i) {
      std::vector<T> lp = log_softmax(logits.data(), static_cast<int>(logits.size()));
      int tok = sample_index(logits, cfg.temperature, rng);
      r.completion_tokens.push_back(tok);
      r.logps.push_back(static_cast<double>(lp[tok]));
      if (tok == vocab().eos()) break;
      if (st.n >= ctx) break;  // context exhausted; no further feed possible
      logits = model_.inc_step(st, tok);
    }
    r.text = vocab().decode(r.completion_tokens);
    return r;
  }

  // Exact conditional log-probs of `completion` after `prompt` under current
  // parameters. Uses the same incremental primitives as sampling, so values
  // match recorded rollout log-probs bit for bit.
  std::vector<double> score(const std::vector<int>& prompt,
                            const std::vector<int>& completion) const {
    const int ctx = model_.config().ctx;
    if (prompt.empty()) throw EmptyBatch("score: empty prompt");
    if (prompt.size() + completion.size() > static_cast<size_t>(ctx))
      throw ContextOverflow("score: sequence exceeds context");
    std::vector<double> out;
    if (completion.empty()) return out;
    IncState<T> st = model_.new_state();
    std::vector<T> logits;
    for (int t : prompt) logits = model_.inc_step(st, t);
    for (size_t i = 0; i < completion.size(); ++i) {
      std::vector<T> lp = log_softmax(logits.data(), static_cast<int>(logits.size()));
      out.push_back(static_cast<double>(lp[completion[i]]));
      if (i + 1 < completion.size()) logits = model_.inc_step(st, completion[i]);
    }
    return out;
  }

  // Apply accumulated gradients via the optimizer; returns the post-update
  // parameter L2 norm.
  double grad_step(Adam<T>& opt) {
    opt.step(model_.params(), model_.grads());
    double sq = 0;
    for (T p : model_.params()) sq += static_cast<double>(p) * static_cast<double>(p);
    return std::sqrt(sq);
  }

 private:
  static int sample_index(const std::vector<T>& logits, double temperature, Rng& rng) {
    const int n = static_cast<int>(logits.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) mx = std::max(mx, static_cast<double>(logits[i]));
    std::vector<double> p(n);
    double z = 0;
    for (int i = 0; i < n; ++i) {
      p[i] = std::exp((static_cast<double>(logits[i]) - mx) / temperature);
      z += p[i];
    }
    double u = rng.u01() * z;
    double acc = 0;
    for (int i = 0; i < n; ++i) {
      acc += p[i];
      if (u < acc) return i;
    }
    return n - 1;
  }

  TransformerModel<T> model_;
};

// --- checkpoint I/O --------------------------------------------------------

namespace detail {
inline void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw SchemaError("checkpoint truncated");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}
template <typename T>
void write_vec(std::ostream& os, const std::vector<T>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(T)));
}
template <typename T>
void read_vec(std::istream& is, std::vector<T>& v) {
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(T)));
  if (!is) throw SchemaError("checkpoint truncated");
}
template <typename T>
const char* dtype_name() {
  if constexpr (std::is_same_v<T, float>) return "f32";
  else if constexpr (std::is_same_v<T, double>) return "f64";
  else return "?";
}
}  // namespace detail

inline constexpr uint32_t kCheckpointMagic = 0x4d4c4150;  // "PALM"
inline constexpr uint32_t kCheckpointVersion = 1;

template <typename T>
void save_checkpoint(const std::string& path, const Policy<T>& policy,
                     const Adam<T>* opt, int64_t step, const json& meta = json::object()) {
  const auto& model = policy.model();
  json header{{"model", model.config().to_json()},
              {"dtype", detail::dtype_name<T>()},
              {"param_count", model.param_count()},
              {"vocab_fingerprint", vocab().fingerprint()},
              {"vocab_size", vocab().size()},
              {"step", step},
              {"has_optimizer", opt != nullptr},
              {"meta", meta}};
  if (opt) {
    header["adam"] = opt->config().to_json();
    header["adam_t"] = opt->step_count();
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint: " + path);
  detail::write_u32(os, kCheckpointMagic);
  detail::write_u32(os, kCheckpointVersion);
  std::string h = header.dump();
  detail::write_u32(os, static_cast<uint32_t>(h.size()));
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  detail::write_vec(os, model.params());
  if (opt) {
    detail::write_vec(os, opt->m());
    detail::write_vec(os, opt->v());
  }
  if (!os) throw IoError("short write on checkpoint: " + path);
}

template <typename T>
struct LoadedCheckpoint {
  Policy<T> policy;
  std::optional<Adam<T>> opt;
  int64_t step = 0;
  json meta;
};

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInput("checkpoint not found: " + path);
  if (detail::read_u32(is) != kCheckpointMagic)
    throw SchemaError("not a checkpoint file: " + path);
  if (detail::read_u32(is) != kCheckpointVersion)
    throw SchemaError("unsupported checkpoint version in " + path);
  uint32_t hlen = detail::read_u32(is);
  std::string h(hlen, '\0');
  is.read(h.data(), hlen);
  if (!is) throw SchemaError("checkpoint truncated");
  json header;
  try {
    header = json::parse(h);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad checkpoint header: ") + e.what());
  }
  if (header.at("dtype").get<std::string>() != detail::dtype_name<T>())
    throw SchemaError("checkpoint dtype " + header.at("dtype").get<std::string>() +
                      " does not match requested " + detail::dtype_name<T>());
  if (header.at("vocab_fingerprint").get<uint64_t>() != vocab().fingerprint() ||
      header.at("vocab_size").get<int>() != vocab().size())
    throw SchemaError("checkpoint vocab does not match this build's tokenizer");
  ModelConfig cfg = ModelConfig::from_json(header.at("model"));
  LoadedCheckpoint<T> out{Policy<T>(cfg, 0), std::nullopt,
                          header.at("step").get<int64_t>(),
                          header.value("meta", json::object())};
  auto& params = out.policy.model().params();
  if (params.size() != header.at("param_count").get<size_t>())
    throw SchemaError("checkpoint param count mismatch");
  detail::read_vec(is, params);
  if (header.value("has_optimizer", false)) {
    AdamConfig acfg = AdamConfig::from_json(header.at("adam"));
    Adam<T> opt(params.size(), acfg);
    detail::read_vec(is, opt.m());
    detail::read_vec(is, opt.v());
    opt.set_step_count(header.at("adam_t").get<int64_t>());
    out.opt = std::move(opt);
  }
  return out;
}

}  // namespace pallm
