// CoT parsing, binary rewards, the oracle judge, and the external judge
// client (exercised against a local in-process HTTP server).
#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <random>
#include <thread>

#include "pallm/rewards.hpp"

namespace pallm {
namespace {

// ---------------------------------------------------------------------------
// parse_cot_output: 50-case fixture file

TEST(ParseCot, FiftyCaseFixtureFile) {
  std::ifstream in(std::string(PALLM_SOURCE_DIR) + "/tests/fixtures/cot_parse_cases.jsonl");
  ASSERT_TRUE(in.is_open());
  int n = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    json c = json::parse(line);
    ++n;
    SCOPED_TRACE(c["name"].get<std::string>());
    DecisionKind kind = c["kind"] == "sentiment" ? DecisionKind::sentiment : DecisionKind::yes_no;
    std::string raw = c["raw"].get<std::string>();
    JudgeVerdict v;
    ASSERT_NO_THROW(v = parse_cot_output(raw, kind));
    EXPECT_EQ(v.valid, c["valid"].get<bool>());
    EXPECT_EQ(v.raw, raw);
    if (c.contains("decision")) EXPECT_EQ(v.decision, c["decision"].get<std::string>());
    if (c.contains("explanation")) EXPECT_EQ(v.explanation, c["explanation"].get<std::string>());
    if (!v.valid) EXPECT_TRUE(v.decision.empty());
    // Idempotence: re-parsing the recorded raw text reproduces the verdict.
    JudgeVerdict again = parse_cot_output(v.raw, kind);
    EXPECT_EQ(again.valid, v.valid);
    EXPECT_EQ(again.decision, v.decision);
    EXPECT_EQ(again.explanation, v.explanation);
  }
  EXPECT_EQ(n, 50);
}

TEST(ParseCot, NeverRaisesOnArbitraryBytes) {
  std::mt19937_64 rng(12345);
  for (int i = 0; i < 500; ++i) {
    std::string s;
    size_t len = rng() % 200;
    for (size_t j = 0; j < len; ++j) s += static_cast<char>(rng() % 256);
    // Bias toward brace-heavy strings to stress the extractor.
    if (i % 3 == 0) s = "{" + s;
    if (i % 5 == 0) s += "}";
    ASSERT_NO_THROW(parse_cot_output(s, DecisionKind::sentiment));
    ASSERT_NO_THROW(parse_cot_output(s, DecisionKind::yes_no));
  }
}

TEST(ParseCot, TaskTagOverloadSelectsKind) {
  const std::string sent = R"({"explanation":"e","Judgement":"negative"})";
  const std::string yn = R"({"explanation":"e","Judgement":"YES"})";
  EXPECT_TRUE(parse_cot_output(sent, TaskTag::cls_cot).valid);
  EXPECT_FALSE(parse_cot_output(sent, TaskTag::gen_reason).valid);
  EXPECT_TRUE(parse_cot_output(yn, TaskTag::gen_reason).valid);
  EXPECT_FALSE(parse_cot_output(yn, TaskTag::cls_cot).valid);
}

TEST(ParseCot, NormalizeDecisionText) {
  using detail::normalize_decision_text;
  EXPECT_EQ(normalize_decision_text("  negative  "), "negative");
  EXPECT_EQ(normalize_decision_text("\"positive\""), "positive");
  EXPECT_EQ(normalize_decision_text("'no'"), "no");
  EXPECT_EQ(normalize_decision_text("[neutral]"), "neutral");
  EXPECT_EQ(normalize_decision_text("(yes)"), "yes");
  EXPECT_EQ(normalize_decision_text("Yes."), "Yes");
  EXPECT_EQ(normalize_decision_text("No!"), "No");
  EXPECT_EQ(normalize_decision_text("neutral,"), "neutral");
  EXPECT_EQ(normalize_decision_text("\" [negative]. \""), "negative");
  EXPECT_EQ(normalize_decision_text(""), "");
  EXPECT_EQ(normalize_decision_text("\""), "\"");  // lone quote: no matching pair
}

// ---------------------------------------------------------------------------
// reward_cls: the biconditional checked exhaustively

TEST(RewardCls, BiconditionalGrid) {
  const Sentiment golds[] = {Sentiment::negative, Sentiment::neutral, Sentiment::positive};
  const char* decisions[] = {"negative", "neutral", "positive"};
  for (Sentiment gold : golds) {
    for (const char* dec : decisions) {
      JudgeVerdict v;
      v.valid = true;
      v.decision = dec;
      RewardRecord r = reward_cls(v, gold);
      int expect = (v.decision == to_string(gold)) ? 1 : -1;
      EXPECT_EQ(r.reward, expect) << dec << " vs " << to_string(gold);
      EXPECT_TRUE(r.reward == 1 || r.reward == -1);
    }
    // Fourth column: invalid parse is always -1, even when the decision text
    // happens to match the gold label.
    JudgeVerdict bad;
    bad.valid = false;
    bad.decision = to_string(gold);
    EXPECT_EQ(reward_cls(bad, gold).reward, -1);
  }
}

TEST(RewardCls, RecordFields) {
  JudgeVerdict v;
  v.valid = true;
  v.decision = "positive";
  v.explanation = "why";
  RewardRecord r = reward_cls(v, Sentiment::positive, "roll-7");
  EXPECT_EQ(r.rollout_id, "roll-7");
  EXPECT_EQ(r.task, TaskTag::cls_cot);
  EXPECT_EQ(r.source, RewardSource::rule);
  EXPECT_EQ(r.reward, 1);
  EXPECT_EQ(r.verdict.decision, "positive");
  json j = r.to_json();
  EXPECT_EQ(j["rollout_id"], "roll-7");
  EXPECT_EQ(j["task"], "cls_cot");
  EXPECT_EQ(j["reward"], 1);
  EXPECT_EQ(j["source"], "rule");
  EXPECT_EQ(j["verdict"]["decision"], "positive");
  EXPECT_EQ(j["verdict"]["explanation"], "why");
  EXPECT_EQ(j["verdict"]["valid"], true);
}

// ---------------------------------------------------------------------------
// strip_reasoning

TEST(StripReasoning, Cases) {
  EXPECT_EQ(strip_reasoning("thinking...<resp>Here you go."), "Here you go.");
  EXPECT_EQ(strip_reasoning("no marker at all"), "no marker at all");
  // Multiple markers: everything before the last one is reasoning.
  EXPECT_EQ(strip_reasoning("a<resp>b<resp>final"), "final");
  // Control-token literals are removed even without a marker.
  EXPECT_EQ(strip_reasoning("hi<eos>"), "hi");
  EXPECT_EQ(strip_reasoning("<ans>x<sep>y<pmask>"), "xy");
  EXPECT_EQ(strip_reasoning("think<resp>  padded  <eos>"), "padded");
  EXPECT_EQ(strip_reasoning(""), "");
  EXPECT_EQ(strip_reasoning("<resp>"), "");
}

// ---------------------------------------------------------------------------
// oracle_judge

Utterance synth_utt(Sentiment gold) {
  Utterance u;
  u.id = "synthetic:t0";
  u.dataset = DatasetId::synthetic;
  u.transcript = "the meeting moved to three";
  u.tone = to_string(gold);
  u.sentiment = gold;
  u.prosody.assign(8, 0.5);
  return u;
}

TEST(OracleJudge, CompatibilityGridOverBankTemplates) {
  const Sentiment golds[] = {Sentiment::negative, Sentiment::neutral, Sentiment::positive};
  const ResponseClass classes[] = {ResponseClass::empathetic, ResponseClass::celebratory,
                                   ResponseClass::neutral_playful, ResponseClass::neutral_factual};
  for (Sentiment gold : golds) {
    Utterance u = synth_utt(gold);
    for (ResponseClass cls : classes) {
      for (const std::string& resp : response_templates(cls)) {
        JudgeVerdict v = oracle_judge(resp, u);
        EXPECT_TRUE(v.valid);
        bool expect_yes = class_compatible(cls, gold);
        EXPECT_EQ(v.decision, expect_yes ? "YES" : "NO")
            << to_string(cls) << " vs gold " << to_string(gold) << ": " << resp;
        EXPECT_FALSE(v.explanation.empty());
      }
    }
  }
}

TEST(OracleJudge, SpotChecks) {
  // negative gold: only empathetic responses pass.
  Utterance neg = synth_utt(Sentiment::negative);
  EXPECT_EQ(oracle_judge(response_templates(ResponseClass::empathetic)[0], neg).decision, "YES");
  EXPECT_EQ(oracle_judge(response_templates(ResponseClass::celebratory)[0], neg).decision, "NO");
  // Unclassifiable response: valid verdict, decision NO.
  JudgeVerdict v = oracle_judge("zzz qqq xxx", neg);
  EXPECT_TRUE(v.valid);
  EXPECT_EQ(v.decision, "NO");
}

TEST(OracleJudge, DeterministicPureFunction) {
  Utterance u = synth_utt(Sentiment::positive);
  std::string resp = response_templates(ResponseClass::celebratory)[1];
  JudgeVerdict a = oracle_judge(resp, u);
  JudgeVerdict b = oracle_judge(resp, u);
  EXPECT_EQ(a.decision, b.decision);
  EXPECT_EQ(a.explanation, b.explanation);
  EXPECT_EQ(a.valid, b.valid);
}

TEST(OracleJudge, RejectsRealDatasetUtterances) {
  Utterance u = synth_utt(Sentiment::negative);
  u.dataset = DatasetId::iemocap;
  EXPECT_THROW(oracle_judge("I'm sorry to hear that.", u), NotSynthetic);
  u.dataset = DatasetId::expresso;
  EXPECT_THROW(oracle_judge("I'm sorry to hear that.", u), NotSynthetic);
}

// ---------------------------------------------------------------------------
// reward_gen

TEST(RewardGen, Mapping) {
  JudgeVerdict yes;
  yes.valid = true;
  yes.decision = "YES";
  JudgeVerdict no;
  no.valid = true;
  no.decision = "NO";
  JudgeVerdict invalid;  // valid=false
  invalid.decision = "YES";

  RewardRecord ry = reward_gen(yes, RewardSource::oracle, "g1");
  EXPECT_EQ(ry.reward, 1);
  EXPECT_EQ(ry.task, TaskTag::gen_reason);
  EXPECT_EQ(ry.source, RewardSource::oracle);
  EXPECT_EQ(ry.rollout_id, "g1");
  EXPECT_EQ(reward_gen(no, RewardSource::external).reward, -1);
  EXPECT_EQ(reward_gen(invalid, RewardSource::external).reward, -1);
  EXPECT_EQ(reward_gen(no, RewardSource::external).source, RewardSource::external);
  EXPECT_EQ(std::string(to_string(RewardSource::rule)), "rule");
  EXPECT_EQ(std::string(to_string(RewardSource::oracle)), "oracle");
  EXPECT_EQ(std::string(to_string(RewardSource::external)), "external");
}

// ---------------------------------------------------------------------------
// llm_judge against a local HTTP server

struct JudgeServer {
  httplib::Server svr;
  int port = 0;
  std::thread th;
  std::atomic<int> hits{0};
  json last_body;
  std::string last_auth;

  // handler(request_count) -> {status, body}
  template <typename Fn>
  explicit JudgeServer(Fn handler) {
    svr.Post("/v1/chat/completions", [this, handler](const httplib::Request& req,
                                                     httplib::Response& res) {
      int n = ++hits;
      last_auth = req.get_header_value("Authorization");
      last_body = json::parse(req.body, nullptr, false);
      auto [status, body] = handler(n, last_body);
      res.status = status;
      res.set_content(body, "application/json");
    });
    port = svr.bind_to_any_port("127.0.0.1");
    th = std::thread([this] { svr.listen_after_bind(); });
    svr.wait_until_ready();
  }
  ~JudgeServer() {
    svr.stop();
    th.join();
  }
  ChatConfig config(int retries = 0) const {
    ChatConfig c;
    c.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    c.api_key = "test-key-123";
    c.max_retries = retries;
    c.backoff_base_s = 0.01;
    c.timeout_s = 5;
    return c;
  }
};

std::string openai_reply(const std::string& content) {
  return json{{"choices", json::array({json{{"message", json{{"role", "assistant"},
                                                             {"content", content}}}}})}}
      .dump();
}

TEST(LlmJudge, ToneMatchFixturesThroughHttp) {
  JudgeServer srv([](int, const json& body) -> std::pair<int, std::string> {
    std::string user = body["messages"][1]["content"].get<std::string>();
    bool yes = user.find("[sad]") != std::string::npos;
    std::string verdict =
        yes ? R"({"Explanation":"empathetic reply to sad tone","Judgement":"YES"})"
            : R"({"Explanation":"completely mismatches the user's emotional state","Judgement":"NO"})";
    return {200, openai_reply(verdict)};
  });
  HttpChatClient client(srv.config());

  JudgeVerdict yes = llm_judge("Oh no, I'm sorry to hear that. Do you want to talk about it?",
                               "I didn't get the job.", "sad", client);
  EXPECT_TRUE(yes.valid);
  EXPECT_EQ(yes.decision, "YES");

  JudgeVerdict no = llm_judge("That's unfortunate. I'm sorry you have to go through this.",
                              "I didn't get the job.", "relieved", client);
  EXPECT_TRUE(no.valid);
  EXPECT_EQ(no.decision, "NO");

  // Transport details: bearer auth, deterministic temperature, rubric text.
  EXPECT_EQ(srv.last_auth, "Bearer test-key-123");
  EXPECT_EQ(srv.last_body["temperature"], 0);
  std::string sys = srv.last_body["messages"][0]["content"].get<std::string>();
  EXPECT_NE(sys.find("appropriately matches"), std::string::npos);
  EXPECT_NE(sys.find("\"YES\"or \"NO\""), std::string::npos);
  std::string user = srv.last_body["messages"][1]["content"].get<std::string>();
  EXPECT_NE(user.find("[USER] \"[relieved] I didn't get the job.\""), std::string::npos);
  EXPECT_NE(user.find("[ASSISTANT]"), std::string::npos);
  EXPECT_EQ(srv.hits.load(), 2);
}

TEST(LlmJudge, UnparseableReplyYieldsInvalidVerdict) {
  JudgeServer srv([](int, const json&) -> std::pair<int, std::string> {
    return {200, openai_reply("I think it matches pretty well, overall.")};
  });
  HttpChatClient client(srv.config());
  JudgeVerdict v = llm_judge("resp", "transcript", "happy", client);
  EXPECT_FALSE(v.valid);
  EXPECT_TRUE(v.decision.empty());
}

TEST(LlmJudge, RetriesThenSucceeds) {
  JudgeServer srv([](int n, const json&) -> std::pair<int, std::string> {
    if (n == 1) return {500, "overloaded"};
    return {200, openai_reply(R"({"Explanation":"ok","Judgement":"YES"})")};
  });
  HttpChatClient client(srv.config(/*retries=*/2));
  JudgeVerdict v = llm_judge("resp", "transcript", "happy", client);
  EXPECT_TRUE(v.valid);
  EXPECT_EQ(v.decision, "YES");
  EXPECT_EQ(srv.hits.load(), 2);
}

TEST(LlmJudge, ExhaustedRetriesRaiseExternalUnavailable) {
  JudgeServer srv([](int, const json&) -> std::pair<int, std::string> {
    return {503, "down"};
  });
  HttpChatClient client(srv.config(/*retries=*/2));
  EXPECT_THROW(llm_judge("resp", "transcript", "happy", client), ExternalUnavailable);
  EXPECT_EQ(srv.hits.load(), 3);  // initial attempt + 2 retries
}

TEST(LlmJudge, ConnectionRefusedRaisesExternalUnavailable) {
  ChatConfig c;
  c.url = "http://127.0.0.1:9/v1/chat/completions";  // discard port: nothing listens
  c.api_key = "k";
  c.max_retries = 1;
  c.backoff_base_s = 0.01;
  c.timeout_s = 1;
  HttpChatClient client(c);
  EXPECT_THROW(llm_judge("resp", "transcript", "happy", client), ExternalUnavailable);
}

// ---------------------------------------------------------------------------
// HttpChatClient plumbing

TEST(HttpChat, ExtractContentShapes) {
  EXPECT_EQ(HttpChatClient::extract_content(openai_reply("hello")), "hello");
  EXPECT_EQ(HttpChatClient::extract_content(
                json{{"choices", json::array({json{{"text", "plain"}}})}}.dump()),
            "plain");
  EXPECT_EQ(HttpChatClient::extract_content(json{{"content", "bare"}}.dump()), "bare");
  EXPECT_EQ(HttpChatClient::extract_content("not json"), "not json");
}

TEST(HttpChat, SplitUrl) {
  std::string base, path;
  HttpChatClient::split_url("http://api.example.com:8080/v1/chat/completions", base, path);
  EXPECT_EQ(base, "http://api.example.com:8080");
  EXPECT_EQ(path, "/v1/chat/completions");
  HttpChatClient::split_url("https://host", base, path);
  EXPECT_EQ(base, "https://host");
  EXPECT_EQ(path, "/");
  EXPECT_THROW(HttpChatClient::split_url("no-scheme/path", base, path), InvalidConfig);
}

TEST(HttpChat, ConfigFromEnvRequiresBothVariables) {
  // Save and restore so other tests see a clean environment.
  const char* old_url = std::getenv("JUDGE_URL");
  const char* old_key = std::getenv("JUDGE_API_KEY");
  std::string saved_url = old_url ? old_url : "";
  std::string saved_key = old_key ? old_key : "";

  ::setenv("JUDGE_URL", "http://127.0.0.1:1234/v1/chat/completions", 1);
  ::setenv("JUDGE_API_KEY", "sekrit", 1);
  ChatConfig c = chat_config_from_env();
  EXPECT_EQ(c.url, "http://127.0.0.1:1234/v1/chat/completions");
  EXPECT_EQ(c.api_key, "sekrit");

  ::unsetenv("JUDGE_API_KEY");
  EXPECT_THROW(chat_config_from_env(), InvalidConfig);
  ::unsetenv("JUDGE_URL");
  EXPECT_THROW(chat_config_from_env(), InvalidConfig);
  ::setenv("JUDGE_URL", "http://x/", 1);
  ::setenv("JUDGE_API_KEY", "", 1);  // empty counts as unset
  EXPECT_THROW(chat_config_from_env(), InvalidConfig);

  if (!saved_url.empty()) ::setenv("JUDGE_URL", saved_url.c_str(), 1);
  else ::unsetenv("JUDGE_URL");
  if (!saved_key.empty()) ::setenv("JUDGE_API_KEY", saved_key.c_str(), 1);
  else ::unsetenv("JUDGE_API_KEY");
}

}  // namespace
}  // namespace pallm
