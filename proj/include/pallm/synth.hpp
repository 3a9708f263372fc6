// Synthetic dual-channel corpus: transcripts from the template bank paired
// with prosody vectors drawn from per-tone Gaussian clusters. The cue_mode
// controls whether the lexical channel agrees with, hides, or contradicts
// the prosodic channel.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pallm/banks.hpp"
#include "pallm/common.hpp"
#include "pallm/corpus.hpp"
#include "pallm/errors.hpp"

namespace pallm {

struct SynthConfig {
  int n_per_tone = 40;
  int prosody_dim = 8;
  double noise_sigma = 0.10;
  double frac_aligned = 0.4;
  double frac_text_neutral = 0.3;
  double frac_conflict = 0.3;
  uint64_t seed = 0;

  void validate() const {
    if (n_per_tone <= 0) throw InvalidConfig("n_per_tone must be positive");
    if (prosody_dim <= 0) throw InvalidConfig("prosody_dim must be positive");
    if (!(noise_sigma >= 0.0)) throw InvalidConfig("noise_sigma must be >= 0");
    if (frac_aligned < 0 || frac_text_neutral < 0 || frac_conflict < 0)
      throw InvalidConfig("cue-mode fractions must be non-negative");
    double total = frac_aligned + frac_text_neutral + frac_conflict;
    if (std::abs(total - 1.0) > 1e-9)
      throw InvalidConfig("cue-mode fractions must sum to 1");
  }

  json to_json() const {
    return json{{"n_per_tone", n_per_tone},     {"prosody_dim", prosody_dim},
                {"noise_sigma", noise_sigma},   {"frac_aligned", frac_aligned},
                {"frac_text_neutral", frac_text_neutral},
                {"frac_conflict", frac_conflict}, {"seed", seed}};
  }

  static SynthConfig from_json(const json& j) {
    SynthConfig c;
    if (j.contains("n_per_tone")) c.n_per_tone = j.at("n_per_tone").get<int>();
    if (j.contains("prosody_dim")) c.prosody_dim = j.at("prosody_dim").get<int>();
    if (j.contains("noise_sigma")) c.noise_sigma = j.at("noise_sigma").get<double>();
    if (j.contains("frac_aligned")) c.frac_aligned = j.at("frac_aligned").get<double>();
    if (j.contains("frac_text_neutral"))
      c.frac_text_neutral = j.at("frac_text_neutral").get<double>();
    if (j.contains("frac_conflict")) c.frac_conflict = j.at("frac_conflict").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    return c;
  }
};

// Tones the synthetic corpus uses; one per sentiment keeps the clusters and
// the label space in one-to-one correspondence.
inline const std::vector<std::string>& synth_tones() {
  static const std::vector<std::string> tones = {"happy", "neutral", "sad"};
  return tones;
}

// Cluster means live in [0.15, 0.85]^D so sigma~0.1 noise rarely clips.
inline std::vector<double> cluster_mean(const std::string& tone, int dim, uint64_t seed) {
  Rng rng(mix_seed(seed, hash_str("cluster-mean"), hash_str(tone)));
  std::vector<double> mean(dim);
  for (auto& v : mean) v = 0.15 + 0.70 * rng.u01();
  return mean;
}

// Largest-remainder split of n into the three cue-mode counts.
inline std::array<int, 3> cue_mode_counts(int n, const SynthConfig& cfg) {
  std::array<double, 3> want = {cfg.frac_aligned * n, cfg.frac_text_neutral * n,
                                cfg.frac_conflict * n};
  std::array<int, 3> got{};
  int used = 0;
  for (int i = 0; i < 3; ++i) {
    got[i] = static_cast<int>(std::floor(want[i]));
    used += got[i];
  }
  // Hand leftovers to the largest fractional remainders; ties go left.
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return want[a] - std::floor(want[a]) > want[b] - std::floor(want[b]);
  });
  for (int i = 0; used + i < n; ++i) got[order[i % 3]]++;
  return got;
}

inline Sentiment opposite_sentiment(Sentiment s) {
  switch (s) {
    case Sentiment::positive: return Sentiment::negative;
    case Sentiment::negative: return Sentiment::positive;
    case Sentiment::neutral: return Sentiment::neutral;
  }
  return Sentiment::neutral;
}

// Generate the synthetic corpus. Byte-identical output for a given config:
// every random draw is keyed off (seed, tone, item index) so insertion order
// never feeds back into the stream.
inline Dataset synth_corpus(const SynthConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.provenance = "synthetic";
  ds.seed = cfg.seed;
  for (const auto& tone : synth_tones()) {
    Sentiment gold = map_tone_to_sentiment(tone, DatasetId::synthetic);
    std::vector<double> mean = cluster_mean(tone, cfg.prosody_dim, cfg.seed);
    std::array<int, 3> counts = cue_mode_counts(cfg.n_per_tone, cfg);
    int idx = 0;
    for (int mode_i = 0; mode_i < 3; ++mode_i) {
      CueMode mode = static_cast<CueMode>(mode_i);
      for (int j = 0; j < counts[mode_i]; ++j, ++idx) {
        Utterance u;
        u.id = "syn-" + tone + "-" + std::to_string(idx);
        u.dataset = DatasetId::synthetic;
        u.tone = tone;
        u.sentiment = gold;
        u.cue_mode = mode;

        uint64_t key = mix_seed(cfg.seed, hash_str(tone), static_cast<uint64_t>(idx));
        Rng rng(mix_seed(key, hash_str("prosody")));
        u.prosody.resize(cfg.prosody_dim);
        for (int d = 0; d < cfg.prosody_dim; ++d)
          u.prosody[d] = std::clamp(mean[d] + cfg.noise_sigma * rng.normal(), 0.0, 1.0);

        u.speaker = "spk" + std::to_string(key % 8);

        // Lexical channel per cue mode: aligned text matches the prosody's
        // sentiment, text_neutral hides it, conflict contradicts it. For
        // neutral gold there is no opposite, so conflict degrades to neutral
        // text as well (the prosody still has to carry the label).
        CueClass cue;
        switch (mode) {
          case CueMode::aligned: cue = cue_class_for(gold); break;
          case CueMode::text_neutral: cue = CueClass::neutral; break;
          case CueMode::conflict: cue = cue_class_for(opposite_sentiment(gold)); break;
          default: cue = CueClass::neutral;
        }
        LengthBand band =
            (mix_seed(key, hash_str("band")) % 2 == 0) ? LengthBand::shortband
                                                       : LengthBand::mediumband;
        u.transcript = pick_transcript(cue, band, mix_seed(key, hash_str("text")));
        ds.utterances.push_back(std::move(u));
      }
    }
  }
  return ds;
}

}  // namespace pallm
