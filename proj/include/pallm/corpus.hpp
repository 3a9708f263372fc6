// Corpus layer: tone/sentiment labels, the per-dataset tone->sentiment
// mapping, the 1..20-word length filter, speaker/fraction splits, and JSONL
// manifest ingestion with a drop report sidecar.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pallm/common.hpp"
#include "pallm/errors.hpp"

namespace pallm {

enum class DatasetId { expresso, iemocap, ravdess, synthetic };
enum class Sentiment { positive, neutral, negative };
enum class Split { train, eval, unassigned };
enum class CueMode { aligned, text_neutral, conflict, none };

inline const char* to_string(DatasetId d) {
  switch (d) {
    case DatasetId::expresso: return "expresso";
    case DatasetId::iemocap: return "iemocap";
    case DatasetId::ravdess: return "ravdess";
    case DatasetId::synthetic: return "synthetic";
  }
  return "?";
}

inline DatasetId dataset_from_string(const std::string& s) {
  if (s == "expresso") return DatasetId::expresso;
  if (s == "iemocap") return DatasetId::iemocap;
  if (s == "ravdess") return DatasetId::ravdess;
  if (s == "synthetic") return DatasetId::synthetic;
  throw SchemaError("unknown dataset id: " + s);
}

inline const char* to_string(Sentiment s) {
  switch (s) {
    case Sentiment::positive: return "positive";
    case Sentiment::neutral: return "neutral";
    case Sentiment::negative: return "negative";
  }
  return "?";
}

inline std::optional<Sentiment> sentiment_from_string(const std::string& s) {
  if (s == "positive") return Sentiment::positive;
  if (s == "neutral") return Sentiment::neutral;
  if (s == "negative") return Sentiment::negative;
  return std::nullopt;
}

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::eval: return "eval";
    case Split::unassigned: return "unassigned";
  }
  return "?";
}

inline const char* to_string(CueMode m) {
  switch (m) {
    case CueMode::aligned: return "aligned";
    case CueMode::text_neutral: return "text_neutral";
    case CueMode::conflict: return "conflict";
    case CueMode::none: return "none";
  }
  return "?";
}

inline std::optional<CueMode> cue_mode_from_string(const std::string& s) {
  if (s == "aligned") return CueMode::aligned;
  if (s == "text_neutral") return CueMode::text_neutral;
  if (s == "conflict") return CueMode::conflict;
  if (s == "none") return CueMode::none;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Tone -> sentiment mapping, one row per source dataset. The synthetic
// dataset uses the union of all rows; the rows never disagree on a shared
// tone, so the union is well defined. "surprised" is excluded everywhere.
// ---------------------------------------------------------------------------

struct ToneMapEntry {
  const char* tone;
  DatasetId dataset;
  Sentiment sentiment;
};

inline const std::vector<ToneMapEntry>& tone_map_entries() {
  static const std::vector<ToneMapEntry> rows = {
      {"laughing", DatasetId::expresso, Sentiment::positive},
      {"happy", DatasetId::expresso, Sentiment::positive},
      {"neutral", DatasetId::expresso, Sentiment::neutral},
      {"angry", DatasetId::expresso, Sentiment::negative},
      {"sad", DatasetId::expresso, Sentiment::negative},
      {"fearful", DatasetId::expresso, Sentiment::negative},

      {"excited", DatasetId::iemocap, Sentiment::positive},
      {"happy", DatasetId::iemocap, Sentiment::positive},
      {"neutral", DatasetId::iemocap, Sentiment::neutral},
      {"angry", DatasetId::iemocap, Sentiment::negative},
      {"sad", DatasetId::iemocap, Sentiment::negative},
      {"fear", DatasetId::iemocap, Sentiment::negative},
      {"frustrated", DatasetId::iemocap, Sentiment::negative},
      {"disgust", DatasetId::iemocap, Sentiment::negative},

      {"happy", DatasetId::ravdess, Sentiment::positive},
      {"neutral", DatasetId::ravdess, Sentiment::neutral},
      {"calm", DatasetId::ravdess, Sentiment::neutral},
      {"sad", DatasetId::ravdess, Sentiment::negative},
      {"angry", DatasetId::ravdess, Sentiment::negative},
      {"fearful", DatasetId::ravdess, Sentiment::negative},
      {"disgust", DatasetId::ravdess, Sentiment::negative},
  };
  return rows;
}

inline Sentiment map_tone_to_sentiment(const std::string& tone, DatasetId dataset) {
  const std::string t = to_lower(trim(tone));
  if (t == "surprised")
    throw ExcludedTone("tone 'surprised' is excluded on dataset " +
                       std::string(to_string(dataset)));
  for (const auto& row : tone_map_entries()) {
    if (t != row.tone) continue;
    if (dataset == DatasetId::synthetic || dataset == row.dataset) return row.sentiment;
  }
  throw UnknownTone("tone '" + t + "' has no mapping for dataset " +
                    std::string(to_string(dataset)));
}

// Tones a given dataset can carry (synthetic accepts the union).
inline std::vector<std::string> tones_for_dataset(DatasetId dataset) {
  std::set<std::string> out;
  for (const auto& row : tone_map_entries())
    if (dataset == DatasetId::synthetic || dataset == row.dataset) out.insert(row.tone);
  return {out.begin(), out.end()};
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct Utterance {
  std::string id;
  DatasetId dataset = DatasetId::synthetic;
  std::string speaker;
  std::string transcript;
  std::string tone;
  Sentiment sentiment = Sentiment::neutral;
  std::vector<double> prosody;
  Split split = Split::unassigned;
  CueMode cue_mode = CueMode::none;
};

struct Dataset {
  std::vector<Utterance> utterances;
  std::string provenance;
  uint64_t seed = 0;

  std::vector<std::string> speakers() const {
    std::set<std::string> s;
    for (const auto& u : utterances) s.insert(u.speaker);
    return {s.begin(), s.end()};
  }
  Dataset with_split(Split sp) const {
    Dataset out;
    out.provenance = provenance;
    out.seed = seed;
    for (const auto& u : utterances)
      if (u.split == sp) out.utterances.push_back(u);
    return out;
  }
};

// The paper's conversational-length filter: 1..20 whitespace words.
inline bool filter_by_length(std::string_view transcript) {
  const int n = word_count(transcript);
  return n >= 1 && n <= 20;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

// Speaker-level split: two eval speakers chosen by seeded shuffle over the
// sorted speaker list; everything else trains.
inline std::pair<Dataset, Dataset> split_expresso(const Dataset& dataset, uint64_t seed) {
  std::vector<std::string> spk = dataset.speakers();
  if (spk.size() < 3)
    throw TooFewSpeakers("speaker split needs >= 3 speakers, got " +
                         std::to_string(spk.size()));
  Rng rng(mix_seed_str(seed, "expresso-split"));
  // Fisher-Yates over the sorted list, so ordering of the input is irrelevant.
  for (size_t i = spk.size(); i > 1; --i) {
    const size_t j = rng.below(i);
    std::swap(spk[i - 1], spk[j]);
  }
  const std::set<std::string> eval_speakers{spk[0], spk[1]};
  Dataset train, eval;
  train.provenance = dataset.provenance + "#train";
  eval.provenance = dataset.provenance + "#eval";
  train.seed = eval.seed = seed;
  for (const auto& u : dataset.utterances) {
    Utterance v = u;
    if (eval_speakers.count(u.speaker)) {
      v.split = Split::eval;
      eval.utterances.push_back(std::move(v));
    } else {
      v.split = Split::train;
      train.utterances.push_back(std::move(v));
    }
  }
  return {std::move(train), std::move(eval)};
}

// Uniform split: |eval| = round(fraction * n), exact partition.
inline std::pair<Dataset, Dataset> split_fraction(const Dataset& dataset,
                                                  double eval_fraction, uint64_t seed) {
  if (dataset.utterances.empty()) throw EmptyDataset("split_fraction on empty dataset");
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0))
    throw InvalidConfig("eval_fraction must be in (0,1), got " +
                        std::to_string(eval_fraction));
  const size_t n = dataset.utterances.size();
  const size_t n_eval = static_cast<size_t>(
      std::llround(eval_fraction * static_cast<double>(n)));
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(mix_seed_str(seed, "fraction-split"));
  for (size_t i = n; i > 1; --i) {
    const size_t j = rng.below(i);
    std::swap(idx[i - 1], idx[j]);
  }
  std::vector<bool> is_eval(n, false);
  for (size_t i = 0; i < n_eval && i < n; ++i) is_eval[idx[i]] = true;
  Dataset train, eval;
  train.provenance = dataset.provenance + "#train";
  eval.provenance = dataset.provenance + "#eval";
  train.seed = eval.seed = seed;
  for (size_t i = 0; i < n; ++i) {
    Utterance v = dataset.utterances[i];
    v.split = is_eval[i] ? Split::eval : Split::train;
    (is_eval[i] ? eval : train).utterances.push_back(std::move(v));
  }
  return {std::move(train), std::move(eval)};
}

// ---------------------------------------------------------------------------
// Manifest IO
// ---------------------------------------------------------------------------

struct DropReport {
  size_t kept = 0;
  size_t dropped_length = 0;
  size_t dropped_surprised = 0;
  size_t dropped_unknown_tone = 0;
  std::vector<json> dropped_records;  // {id, reason}

  size_t dropped_total() const {
    return dropped_length + dropped_surprised + dropped_unknown_tone;
  }
  json to_json() const {
    return json{{"kept", kept},
                {"dropped_total", dropped_total()},
                {"dropped_length", dropped_length},
                {"dropped_surprised", dropped_surprised},
                {"dropped_unknown_tone", dropped_unknown_tone},
                {"records", dropped_records}};
  }
};

struct LoadResult {
  Dataset dataset;
  DropReport report;
  std::string report_path;
};

inline json utterance_to_json(const Utterance& u) {
  json j{{"id", u.id},
         {"dataset", to_string(u.dataset)},
         {"speaker", u.speaker},
         {"transcript", u.transcript},
         {"tone", u.tone},
         {"prosody", u.prosody}};
  if (u.split != Split::unassigned) j["split"] = to_string(u.split);
  if (u.cue_mode != CueMode::none) j["cue_mode"] = to_string(u.cue_mode);
  return j;
}

inline void write_manifest(const Dataset& ds, const std::string& path) {
  JsonlWriter out(path);
  for (const auto& u : ds.utterances) out.write(utterance_to_json(u));
}

// Parses a JSONL manifest, applies the length filter, drops 'surprised' and
// unmappable tones (counted per reason), derives sentiment, and writes a
// sidecar report next to the manifest.
inline LoadResult load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest: " + path);

  LoadResult res;
  res.dataset.provenance = path;
  std::set<std::string> seen_ids;

  const auto need_str = [](const json& j, const char* field, size_t line) {
    if (!j.contains(field))
      throw SchemaError("manifest line " + std::to_string(line) +
                        ": missing field \"" + field + "\"");
    if (!j.at(field).is_string())
      throw SchemaError("manifest line " + std::to_string(line) + ": field \"" +
                        field + "\" must be a string");
    return j.at(field).get<std::string>();
  };

  std::string line;
  size_t lineno = 0;
  std::optional<size_t> prosody_dim;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError("manifest parse error at line " + std::to_string(lineno));

    Utterance u;
    u.id = need_str(j, "id", lineno);
    u.dataset = dataset_from_string(need_str(j, "dataset", lineno));
    u.speaker = need_str(j, "speaker", lineno);
    u.transcript = need_str(j, "transcript", lineno);
    u.tone = to_lower(trim(need_str(j, "tone", lineno)));
    if (!j.contains("prosody"))
      throw SchemaError("manifest line " + std::to_string(lineno) +
                        ": missing field \"prosody\"");
    if (!j.at("prosody").is_array())
      throw SchemaError("manifest line " + std::to_string(lineno) +
                        ": field \"prosody\" must be an array");
    for (const auto& v : j.at("prosody")) {
      if (!v.is_number())
        throw SchemaError("manifest line " + std::to_string(lineno) +
                          ": field \"prosody\" must hold numbers");
      const double x = v.get<double>();
      if (!std::isfinite(x))
        throw SchemaError("manifest line " + std::to_string(lineno) +
                          ": field \"prosody\" must be finite");
      u.prosody.push_back(x);
    }
    if (!prosody_dim) prosody_dim = u.prosody.size();
    if (u.prosody.size() != *prosody_dim)
      throw SchemaError("manifest line " + std::to_string(lineno) +
                        ": field \"prosody\" has inconsistent dimension");
    if (j.contains("split")) {
      const std::string sp = j.at("split").get<std::string>();
      if (sp == "train") u.split = Split::train;
      else if (sp == "eval") u.split = Split::eval;
      else u.split = Split::unassigned;
    }
    if (j.contains("cue_mode")) {
      if (auto cm = cue_mode_from_string(j.at("cue_mode").get<std::string>()))
        u.cue_mode = *cm;
    }
    if (seen_ids.count(u.id))
      throw SchemaError("manifest line " + std::to_string(lineno) +
                        ": duplicate id \"" + u.id + "\"");

    if (!filter_by_length(u.transcript)) {
      res.report.dropped_length++;
      res.report.dropped_records.push_back(json{{"id", u.id}, {"reason", "length"}});
      continue;
    }
    try {
      u.sentiment = map_tone_to_sentiment(u.tone, u.dataset);
    } catch (const ExcludedTone&) {
      res.report.dropped_surprised++;
      res.report.dropped_records.push_back(json{{"id", u.id}, {"reason", "surprised"}});
      continue;
    } catch (const UnknownTone&) {
      res.report.dropped_unknown_tone++;
      res.report.dropped_records.push_back(json{{"id", u.id}, {"reason", "unknown_tone"}});
      continue;
    }
    seen_ids.insert(u.id);
    res.report.kept++;
    res.dataset.utterances.push_back(std::move(u));
  }

  res.report_path = path + ".report.json";
  write_file(res.report_path, res.report.to_json().dump(2) + "\n");
  return res;
}

}  // namespace pallm
