// Token vocabulary for the char-level policy: control tokens, task tags,
// JSON scaffold atoms, sentiment-word atoms, quantized prosody tokens and
// printable ASCII. Multi-char atoms keep prompts inside the short context
// window and give classification a single-token answer slot.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "pallm/common.hpp"
#include "pallm/errors.hpp"

namespace pallm {

enum class TaskTag { cls_sft, gen_sft, cls_cot, gen_reason };

inline const char* to_string(TaskTag t) {
  switch (t) {
    case TaskTag::cls_sft: return "cls_sft";
    case TaskTag::gen_sft: return "gen_sft";
    case TaskTag::cls_cot: return "cls_cot";
    case TaskTag::gen_reason: return "gen_reason";
  }
  return "?";
}

class Vocab {
 public:
  static constexpr int kProsodyDims = 8;
  static constexpr int kProsodyBins = 8;

  Vocab() {
    add("<eos>");
    add("<sep>");
    add("<ans>");
    add("<resp>");
    add("<pmask>");
    add("<cls_sft>");
    add("<gen_sft>");
    add("<cls_cot>");
    add("<gen_reason>");
    add("{\"explanation\":\"");
    add("\",\"Judgement\":\"");
    add("\"}");
    add("positive");
    add("neutral");
    add("negative");
    prosody_base_ = static_cast<int>(tokens_.size());
    for (int d = 0; d < kProsodyDims; ++d)
      for (int b = 0; b < kProsodyBins; ++b)
        add("<p" + std::to_string(d) + "_" + std::to_string(b) + ">");
    ascii_base_ = static_cast<int>(tokens_.size());
    for (char c = 0x20; c <= 0x7e; ++c) add(std::string(1, c));
    // Greedy longest-match wants atoms checked longest-first.
    atom_order_.resize(tokens_.size());
    for (size_t i = 0; i < tokens_.size(); ++i) atom_order_[i] = static_cast<int>(i);
    std::stable_sort(atom_order_.begin(), atom_order_.end(), [this](int a, int b) {
      return tokens_[a].size() > tokens_[b].size();
    });
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& text(int id) const { return tokens_.at(static_cast<size_t>(id)); }
  int id(const std::string& tok) const {
    auto it = lookup_.find(tok);
    if (it == lookup_.end()) throw Error("unknown token: " + tok);
    return it->second;
  }

  int eos() const { return 0; }
  int sep() const { return 1; }
  int ans() const { return 2; }
  int resp() const { return 3; }
  int pmask() const { return 4; }

  int tag(TaskTag t) const { return 5 + static_cast<int>(t); }
  int json_open() const { return 9; }    // {"explanation":"
  int json_mid() const { return 10; }    // ","Judgement":"
  int json_close() const { return 11; }  // "}
  int sentiment_token(int s) const { return 12 + s; }  // order: positive, neutral, negative

  int prosody_token(int dim, int bin) const {
    if (dim < 0 || dim >= kProsodyDims || bin < 0 || bin >= kProsodyBins)
      throw Error("prosody token out of range");
    return prosody_base_ + dim * kProsodyBins + bin;
  }
  bool is_prosody(int id) const {
    return id >= prosody_base_ && id < prosody_base_ + kProsodyDims * kProsodyBins;
  }

  // Quantize one prosody value into its bin (clamped to the calibration
  // range; the top edge folds into the last bin).
  static int quantize(double v, double lo, double hi) {
    if (!(hi > lo)) throw InvalidConfig("calibration range must have hi > lo");
    double c = std::clamp(v, lo, hi);
    int bin = static_cast<int>(std::floor((c - lo) / (hi - lo) * kProsodyBins));
    return std::min(bin, kProsodyBins - 1);
  }

  std::vector<int> prosody_tokens(const std::vector<double>& prosody, double lo,
                                  double hi) const {
    if (static_cast<int>(prosody.size()) != kProsodyDims)
      throw ShapeMismatch("prosody vector must have " + std::to_string(kProsodyDims) +
                          " dims, got " + std::to_string(prosody.size()));
    std::vector<int> out(prosody.size());
    for (size_t d = 0; d < prosody.size(); ++d)
      out[d] = prosody_token(static_cast<int>(d), quantize(prosody[d], lo, hi));
    return out;
  }

  // Greedy longest-match text encoding. Unknown bytes (non-printable) are
  // skipped; the corpus filter never lets them through anyway.
  std::vector<int> encode_text(const std::string& text) const {
    std::vector<int> out;
    size_t pos = 0;
    while (pos < text.size()) {
      int matched = -1;
      for (int cand : atom_order_) {
        const std::string& tok = tokens_[cand];
        if (text.compare(pos, tok.size(), tok) == 0) {
          matched = cand;
          break;
        }
      }
      if (matched < 0) {
        ++pos;
        continue;
      }
      out.push_back(matched);
      pos += tokens_[matched].size();
    }
    return out;
  }

  std::string decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) out += text(id);
    return out;
  }

  // Stable fingerprint of the token list; checkpoints embed it so a model
  // can refuse inputs tokenized under a different layout.
  uint64_t fingerprint() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& t : tokens_) {
      h = mix_seed(h, hash_str(t));
    }
    return h;
  }

 private:
  void add(const std::string& tok) {
    lookup_.emplace(tok, static_cast<int>(tokens_.size()));
    tokens_.push_back(tok);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> lookup_;
  std::vector<int> atom_order_;
  int prosody_base_ = 0;
  int ascii_base_ = 0;
};

inline const Vocab& vocab() {
  static const Vocab v;
  return v;
}

}  // namespace pallm
