#include <gtest/gtest.h>

#include <set>

#include "pallm/vocab.hpp"

namespace pallm {
namespace {

TEST(Vocab, DenseLayoutAndSize) {
  const Vocab& v = vocab();
  // 5 specials + 4 task tags + 3 JSON atoms + 3 sentiment words
  // + 8*8 prosody tokens + 95 printable ASCII = 174.
  EXPECT_EQ(v.size(), 5 + 4 + 3 + 3 + 64 + 95);
  EXPECT_EQ(v.eos(), 0);
  EXPECT_EQ(v.sep(), 1);
  EXPECT_EQ(v.ans(), 2);
  EXPECT_EQ(v.resp(), 3);
  EXPECT_EQ(v.pmask(), 4);
  EXPECT_EQ(v.text(v.eos()), "<eos>");
  EXPECT_EQ(v.text(v.resp()), "<resp>");
  EXPECT_EQ(v.text(v.json_open()), "{\"explanation\":\"");
  EXPECT_EQ(v.text(v.json_mid()), "\",\"Judgement\":\"");
  EXPECT_EQ(v.text(v.json_close()), "\"}");
  EXPECT_EQ(v.text(v.sentiment_token(0)), "positive");
  EXPECT_EQ(v.text(v.sentiment_token(1)), "neutral");
  EXPECT_EQ(v.text(v.sentiment_token(2)), "negative");
  // Dense ids: every id in [0, size) has a distinct non-empty string.
  std::set<std::string> seen;
  for (int i = 0; i < v.size(); ++i) {
    EXPECT_FALSE(v.text(i).empty());
    EXPECT_TRUE(seen.insert(v.text(i)).second) << v.text(i);
  }
}

TEST(Vocab, ProsodyTokenGrid) {
  const Vocab& v = vocab();
  EXPECT_EQ(v.text(v.prosody_token(0, 0)), "<p0_0>");
  EXPECT_EQ(v.text(v.prosody_token(0, 7)), "<p0_7>");
  EXPECT_EQ(v.text(v.prosody_token(7, 7)), "<p7_7>");
  // Dim-major layout.
  EXPECT_EQ(v.prosody_token(1, 0), v.prosody_token(0, 0) + 8);
  EXPECT_TRUE(v.is_prosody(v.prosody_token(3, 5)));
  EXPECT_FALSE(v.is_prosody(v.eos()));
  EXPECT_FALSE(v.is_prosody(v.id("a")));
}

TEST(Vocab, QuantizeEdges) {
  // 8 bins over [0,1): bin = min(7, floor(v*8)), clamped into range first.
  EXPECT_EQ(Vocab::quantize(0.0, 0.0, 1.0), 0);
  EXPECT_EQ(Vocab::quantize(0.124, 0.0, 1.0), 0);
  EXPECT_EQ(Vocab::quantize(0.125, 0.0, 1.0), 1);
  EXPECT_EQ(Vocab::quantize(0.5, 0.0, 1.0), 4);
  EXPECT_EQ(Vocab::quantize(0.999, 0.0, 1.0), 7);
  EXPECT_EQ(Vocab::quantize(1.0, 0.0, 1.0), 7);   // hi maps into the last bin
  EXPECT_EQ(Vocab::quantize(-3.0, 0.0, 1.0), 0);  // clamped below
  EXPECT_EQ(Vocab::quantize(42.0, 0.0, 1.0), 7);  // clamped above
  // Non-default calibration range.
  EXPECT_EQ(Vocab::quantize(0.0, -1.0, 1.0), 4);
  EXPECT_EQ(Vocab::quantize(-1.0, -1.0, 1.0), 0);
}

TEST(Vocab, ProsodyTokensShapeCheck) {
  const Vocab& v = vocab();
  std::vector<double> ok(8, 0.5);
  auto toks = v.prosody_tokens(ok, 0.0, 1.0);
  ASSERT_EQ(toks.size(), 8u);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(toks[i], v.prosody_token(i, 4));
  std::vector<double> bad(7, 0.5);
  EXPECT_THROW(v.prosody_tokens(bad, 0.0, 1.0), ShapeMismatch);
}

TEST(Vocab, GreedyLongestMatch) {
  const Vocab& v = vocab();
  // Multi-char atoms win over their character spellings.
  auto ids = v.encode_text("<resp>");
  ASSERT_EQ(ids.size(), 1u);
  EXPECT_EQ(ids[0], v.resp());

  ids = v.encode_text("positive");
  ASSERT_EQ(ids.size(), 1u);
  EXPECT_EQ(ids[0], v.sentiment_token(0));

  ids = v.encode_text("{\"explanation\":\"hi\",\"Judgement\":\"positive\"}");
  ASSERT_EQ(ids.size(), 6u);
  EXPECT_EQ(ids[0], v.json_open());
  EXPECT_EQ(ids[1], v.id("h"));
  EXPECT_EQ(ids[2], v.id("i"));
  EXPECT_EQ(ids[3], v.json_mid());
  EXPECT_EQ(ids[4], v.sentiment_token(0));
  EXPECT_EQ(ids[5], v.json_close());

  // A prefix that ALMOST matches an atom falls back to chars.
  ids = v.encode_text("<res>");
  EXPECT_EQ(ids.size(), 5u);

  // Words containing sentiment substrings: "positively" = "positive" + "l" + "y"
  // under greedy longest-match (documented tokenizer behavior).
  ids = v.encode_text("positively");
  EXPECT_EQ(ids.size(), 3u);
  EXPECT_EQ(ids[0], v.sentiment_token(0));
}

TEST(Vocab, DecodeInvertsEncodeOnPlainText) {
  const Vocab& v = vocab();
  for (const std::string s :
       {"hello world", "It's 5 o'clock!", "JSON: {\"key\": 1}", "mixed <resp> tag",
        "~!@#$%^&*()_+ 0123456789"}) {
    EXPECT_EQ(v.decode(v.encode_text(s)), s);
  }
}

TEST(Vocab, FingerprintIsStableAndLayoutSensitive) {
  EXPECT_EQ(vocab().fingerprint(), vocab().fingerprint());
  EXPECT_EQ(Vocab().fingerprint(), vocab().fingerprint());
  EXPECT_NE(vocab().fingerprint(), 0u);
}

}  // namespace
}  // namespace pallm
