#include <gtest/gtest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "pallm/corpus.hpp"

namespace pallm {
namespace {

namespace fs = std::filesystem;

struct TmpDir {
  fs::path path;
  TmpDir() {
    path = fs::temp_directory_path() /
           ("pallm-corpus-" + std::to_string(::getpid()) + "-" +
            std::to_string(reinterpret_cast<uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
};

// The full tone->sentiment table, restated independently as the oracle.
struct MapCase {
  const char* tone;
  DatasetId ds;
  Sentiment want;
};
const MapCase kMapCases[] = {
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

TEST(ToneMap, EveryTableRowMaps) {
  for (const auto& c : kMapCases)
    EXPECT_EQ(map_tone_to_sentiment(c.tone, c.ds), c.want) << c.tone;
  // Synthetic accepts the union of all rows.
  for (const auto& c : kMapCases)
    EXPECT_EQ(map_tone_to_sentiment(c.tone, DatasetId::synthetic), c.want) << c.tone;
}

TEST(ToneMap, SurprisedIsExcludedEverywhere) {
  for (DatasetId ds : {DatasetId::expresso, DatasetId::iemocap, DatasetId::ravdess,
                       DatasetId::synthetic}) {
    EXPECT_THROW(map_tone_to_sentiment("surprised", ds), ExcludedTone);
    EXPECT_THROW(map_tone_to_sentiment(" Surprised ", ds), ExcludedTone);
  }
}

TEST(ToneMap, UnknownAndCrossDatasetTonesThrow) {
  EXPECT_THROW(map_tone_to_sentiment("bored", DatasetId::expresso), UnknownTone);
  // "calm" is a RAVDESS-only label; "excited" is IEMOCAP-only.
  EXPECT_THROW(map_tone_to_sentiment("calm", DatasetId::expresso), UnknownTone);
  EXPECT_THROW(map_tone_to_sentiment("excited", DatasetId::ravdess), UnknownTone);
  EXPECT_THROW(map_tone_to_sentiment("", DatasetId::iemocap), UnknownTone);
}

TEST(ToneMap, NormalizesCaseAndWhitespace) {
  EXPECT_EQ(map_tone_to_sentiment("  HAPPY ", DatasetId::ravdess), Sentiment::positive);
  EXPECT_EQ(map_tone_to_sentiment("Frustrated", DatasetId::iemocap), Sentiment::negative);
}

TEST(LengthFilter, OneToTwentyWords) {
  EXPECT_FALSE(filter_by_length(""));
  EXPECT_FALSE(filter_by_length("   "));
  EXPECT_TRUE(filter_by_length("one"));
  std::string twenty, twentyone;
  for (int i = 0; i < 20; ++i) twenty += "w ";
  twentyone = twenty + "w";
  EXPECT_TRUE(filter_by_length(twenty));
  EXPECT_FALSE(filter_by_length(twentyone));
}

Dataset tiny_dataset(int n, const std::string& speaker_prefix, int n_speakers) {
  Dataset ds;
  ds.provenance = "test";
  for (int i = 0; i < n; ++i) {
    Utterance u;
    u.id = "u" + std::to_string(i);
    u.dataset = DatasetId::synthetic;
    u.speaker = speaker_prefix + std::to_string(i % n_speakers);
    u.transcript = "hello there";
    u.tone = "happy";
    u.sentiment = Sentiment::positive;
    u.prosody = {0.5, 0.5};
    ds.utterances.push_back(std::move(u));
  }
  return ds;
}

TEST(Splits, ExpressoHoldsOutExactlyTwoSpeakers) {
  Dataset ds = tiny_dataset(40, "spk", 8);
  auto [train, eval] = split_expresso(ds, 123);
  std::set<std::string> eval_spk, train_spk;
  for (const auto& u : eval.utterances) eval_spk.insert(u.speaker);
  for (const auto& u : train.utterances) train_spk.insert(u.speaker);
  EXPECT_EQ(eval_spk.size(), 2u);
  EXPECT_EQ(train_spk.size(), 6u);
  for (const auto& s : eval_spk) EXPECT_FALSE(train_spk.count(s));
  EXPECT_EQ(train.utterances.size() + eval.utterances.size(), 40u);
  // Deterministic in the seed, independent of record order.
  Dataset shuffled = ds;
  std::swap(shuffled.utterances.front(), shuffled.utterances.back());
  auto [t2, e2] = split_expresso(shuffled, 123);
  std::set<std::string> eval_spk2;
  for (const auto& u : e2.utterances) eval_spk2.insert(u.speaker);
  EXPECT_EQ(eval_spk, eval_spk2);
}

TEST(Splits, ExpressoNeedsThreeSpeakers) {
  Dataset ds = tiny_dataset(10, "spk", 2);
  EXPECT_THROW(split_expresso(ds, 1), TooFewSpeakers);
}

TEST(Splits, FractionIsExactAndDisjoint) {
  Dataset ds = tiny_dataset(50, "spk", 5);
  auto [train, eval] = split_fraction(ds, 0.1, 7);
  EXPECT_EQ(eval.utterances.size(), 5u);  // round(0.1 * 50)
  EXPECT_EQ(train.utterances.size(), 45u);
  std::set<std::string> ids;
  for (const auto& u : train.utterances) ids.insert(u.id);
  for (const auto& u : eval.utterances) ids.insert(u.id);
  EXPECT_EQ(ids.size(), 50u);
  for (const auto& u : train.utterances) EXPECT_EQ(u.split, Split::train);
  for (const auto& u : eval.utterances) EXPECT_EQ(u.split, Split::eval);
}

TEST(Splits, FractionValidatesInputs) {
  Dataset ds = tiny_dataset(10, "s", 2);
  EXPECT_THROW(split_fraction(ds, 0.0, 1), InvalidConfig);
  EXPECT_THROW(split_fraction(ds, 1.0, 1), InvalidConfig);
  Dataset empty;
  EXPECT_THROW(split_fraction(empty, 0.1, 1), EmptyDataset);
}

TEST(Splits, WithSplitFilters) {
  Dataset ds = tiny_dataset(10, "s", 2);
  for (size_t i = 0; i < ds.utterances.size(); ++i)
    ds.utterances[i].split = i < 3 ? Split::eval : Split::train;
  EXPECT_EQ(ds.with_split(Split::eval).utterances.size(), 3u);
  EXPECT_EQ(ds.with_split(Split::train).utterances.size(), 7u);
  EXPECT_EQ(ds.with_split(Split::eval).provenance, ds.provenance);
}

TEST(Manifest, RoundTripPreservesRecords) {
  TmpDir tmp;
  Dataset ds = tiny_dataset(6, "spk", 3);
  ds.utterances[0].cue_mode = CueMode::conflict;
  ds.utterances[1].split = Split::eval;
  const std::string path = (tmp.path / "m.jsonl").string();
  write_manifest(ds, path);
  LoadResult lr = load_manifest(path);
  ASSERT_EQ(lr.dataset.utterances.size(), 6u);
  EXPECT_EQ(lr.report.kept, 6u);
  EXPECT_EQ(lr.report.dropped_total(), 0u);
  EXPECT_EQ(lr.dataset.utterances[0].cue_mode, CueMode::conflict);
  EXPECT_EQ(lr.dataset.utterances[1].split, Split::eval);
  EXPECT_EQ(lr.dataset.utterances[2].split, Split::unassigned);
  EXPECT_EQ(lr.dataset.utterances[0].transcript, "hello there");
  EXPECT_EQ(lr.dataset.utterances[0].sentiment, Sentiment::positive);
  EXPECT_TRUE(fs::exists(lr.report_path));
}

TEST(Manifest, DropsAndCountsByReason) {
  TmpDir tmp;
  const std::string path = (tmp.path / "m.jsonl").string();
  std::ofstream out(path);
  auto row = [](const std::string& id, const std::string& tone,
                const std::string& transcript) {
    json j{{"id", id},          {"dataset", "iemocap"},
           {"speaker", "s1"},   {"transcript", transcript},
           {"tone", tone},      {"prosody", json::array({0.1, 0.2})}};
    return j.dump();
  };
  out << row("a", "happy", "fine words here") << "\n";
  out << row("b", "surprised", "whoa") << "\n";
  out << row("c", "mystified", "no such tone") << "\n";
  std::string long_text;
  for (int i = 0; i < 21; ++i) long_text += "word ";
  out << row("d", "sad", long_text) << "\n";
  out << row("e", "", "blank tone") << "\n";
  out.close();

  LoadResult lr = load_manifest(path);
  EXPECT_EQ(lr.report.kept, 1u);
  EXPECT_EQ(lr.report.dropped_surprised, 1u);
  EXPECT_EQ(lr.report.dropped_unknown_tone, 2u);
  EXPECT_EQ(lr.report.dropped_length, 1u);
  EXPECT_EQ(lr.report.dropped_total(), 4u);
  ASSERT_EQ(lr.dataset.utterances.size(), 1u);
  EXPECT_EQ(lr.dataset.utterances[0].id, "a");

  json report = json::parse(std::ifstream(lr.report_path));
  EXPECT_EQ(report.at("kept").get<int>(), 1);
  EXPECT_EQ(report.at("dropped_surprised").get<int>(), 1);
}

TEST(Manifest, SchemaErrors) {
  TmpDir tmp;
  const std::string path = (tmp.path / "m.jsonl").string();
  auto write = [&](const std::string& body) {
    std::ofstream out(path);
    out << body << "\n";
  };

  write(R"({"id":"a","dataset":"iemocap","speaker":"s","transcript":"hi","tone":"sad"})");
  EXPECT_THROW(load_manifest(path), SchemaError);  // missing prosody

  write(R"({"id":"a","dataset":"nope","speaker":"s","transcript":"hi","tone":"sad","prosody":[0.1]})");
  EXPECT_THROW(load_manifest(path), SchemaError);  // unknown dataset

  write(R"({"dataset":"iemocap","speaker":"s","transcript":"hi","tone":"sad","prosody":[0.1]})");
  EXPECT_THROW(load_manifest(path), SchemaError);  // missing id

  write("this is not json");
  EXPECT_THROW(load_manifest(path), ParseError);

  {
    std::ofstream out(path);
    out << R"({"id":"a","dataset":"iemocap","speaker":"s","transcript":"hi","tone":"sad","prosody":[0.1,0.2]})"
        << "\n"
        << R"({"id":"a","dataset":"iemocap","speaker":"s","transcript":"hi","tone":"sad","prosody":[0.1,0.2]})"
        << "\n";
  }
  EXPECT_THROW(load_manifest(path), SchemaError);  // duplicate id

  {
    std::ofstream out(path);
    out << R"({"id":"a","dataset":"iemocap","speaker":"s","transcript":"hi","tone":"sad","prosody":[0.1,0.2]})"
        << "\n"
        << R"({"id":"b","dataset":"iemocap","speaker":"s","transcript":"hi","tone":"sad","prosody":[0.1]})"
        << "\n";
  }
  EXPECT_THROW(load_manifest(path), SchemaError);  // inconsistent prosody dim

  EXPECT_THROW(load_manifest((tmp.path / "absent.jsonl").string()), IoError);
}

}  // namespace
}  // namespace pallm
