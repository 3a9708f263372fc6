// Template banks: transcript templates per (sentiment-cue x length-band),
// response templates per response class, and the marker lexicon the oracle
// judge classifies responses with.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "pallm/common.hpp"
#include "pallm/corpus.hpp"

namespace pallm {

inline constexpr const char* kBankVersion = "bank-v1";

enum class CueClass { positive, neutral, negative };
enum class LengthBand { shortband, mediumband };
enum class ResponseClass { empathetic, celebratory, neutral_playful, neutral_factual };

inline const char* to_string(ResponseClass c) {
  switch (c) {
    case ResponseClass::empathetic: return "empathetic";
    case ResponseClass::celebratory: return "celebratory";
    case ResponseClass::neutral_playful: return "neutral_playful";
    case ResponseClass::neutral_factual: return "neutral_factual";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Transcript templates. Every entry passes the 1..20-word filter and stays
// short enough (<= 38 chars) to fit the char-level context window. The cue
// words ("great", "awful", ...) are the lexical channel the conflict mode
// pits against prosody.
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& transcript_templates(CueClass cue, LengthBand band) {
  static const std::vector<std::string> pos_short = {
      "Great news", "I love it", "So great", "We won", "Best day",
      "Love this", "How awesome", "Happy days", "Great stuff", "I won",
      "Awesome work", "So happy"};
  static const std::vector<std::string> pos_medium = {
      "That went really well", "I got the best score", "We won the big game",
      "This is great news today", "I love how this turned out",
      "My happy place is here", "That was an awesome show",
      "The best part came early", "I am so happy now",
      "Great work from the team", "It went well again",
      "I love this little plan"};
  static const std::vector<std::string> neg_short = {
      "Awful news", "I hate it", "So terrible", "We failed", "Worst day",
      "Hate this", "How awful", "It broke", "Terrible stuff", "I failed",
      "Worst luck", "So awful"};
  static const std::vector<std::string> neg_medium = {
      "That went really badly", "I got the worst score", "We failed the big test",
      "This is awful news today", "I hate how this turned out",
      "My worst fear came true", "That was a terrible show",
      "The worst part came early", "I am so upset now",
      "It broke down again", "I hate this little plan",
      "Everything failed at once"};
  static const std::vector<std::string> neu_short = {
      "I did", "Okay then", "One sec", "Maybe later", "Check this",
      "Next item", "About that", "Here it is", "Third time", "I'm fine",
      "Over there", "Per the plan"};
  static const std::vector<std::string> neu_medium = {
      "The meeting is at noon", "I did the thing you asked",
      "Let me check the time", "It is on the table",
      "We start in ten minutes", "The file is right here",
      "I heard about the plan", "She called twice today",
      "The door is on the left", "I read the note you left",
      "They arrive on Tuesday", "It takes about an hour"};
  switch (cue) {
    case CueClass::positive: return band == LengthBand::shortband ? pos_short : pos_medium;
    case CueClass::negative: return band == LengthBand::shortband ? neg_short : neg_medium;
    case CueClass::neutral: return band == LengthBand::shortband ? neu_short : neu_medium;
  }
  return neu_short;
}

inline std::string pick_transcript(CueClass cue, LengthBand band, uint64_t key) {
  const auto& bank = transcript_templates(cue, band);
  return bank[key % bank.size()];
}

inline CueClass cue_class_for(Sentiment s) {
  switch (s) {
    case Sentiment::positive: return CueClass::positive;
    case Sentiment::negative: return CueClass::negative;
    case Sentiment::neutral: return CueClass::neutral;
  }
  return CueClass::neutral;
}

inline bool transcript_in_bank(const std::string& transcript, CueClass cue) {
  for (LengthBand band : {LengthBand::shortband, LengthBand::mediumband})
    for (const auto& t : transcript_templates(cue, band))
      if (t == transcript) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Response templates per class. Each response carries at least one marker of
// its own class and no marker of any other class, so the oracle judge can
// classify bank outputs unambiguously. All responses are <= 45 chars so they
// fit the 48-token response cap at char level.
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& response_templates(ResponseClass cls) {
  static const std::vector<std::string> empathetic = {
      "I'm sorry, that sounds tough.",
      "Sorry to hear that. Want to talk?",
      "That sounds hard. I'm here.",
      "I'm sorry. Take a deep breath.",
      "That sounds rough. I'm with you.",
      "Sorry, that must feel heavy.",
      "It's okay. I'm here for you.",
      "That sounds tough. Want help?"};
  static const std::vector<std::string> celebratory = {
      "Congrats, that's wonderful!",
      "Amazing, well done!",
      "Yay, that's fantastic news!",
      "Wonderful, you earned it!",
      "That's brilliant, congrats!",
      "Fantastic, way to go!",
      "Well done, you nailed it!",
      "Amazing, celebrate it!"};
  static const std::vector<std::string> playful = {
      "Want to chat or play a game?",
      "Should we put on some music?",
      "Up for a quick fun fact?",
      "Want to play some trivia?",
      "We could chat about anything.",
      "Fancy a fun little game?",
      "Want me to queue some music?",
      "Let's chat, what's new?"};
  static const std::vector<std::string> factual = {
      "Okay, noted.",
      "Sure, got it.",
      "Alright, understood.",
      "Okay, noted for later.",
      "Got it, thanks.",
      "Noted, anything else?",
      "Sure thing, all set.",
      "Understood, moving on."};
  switch (cls) {
    case ResponseClass::empathetic: return empathetic;
    case ResponseClass::celebratory: return celebratory;
    case ResponseClass::neutral_playful: return playful;
    case ResponseClass::neutral_factual: return factual;
  }
  return factual;
}

inline const std::vector<std::string>& response_markers(ResponseClass cls) {
  static const std::vector<std::string> empathetic = {
      "sorry", "tough", "hard", "rough", "heavy", "here for you", "breath", "with you"};
  static const std::vector<std::string> celebratory = {
      "congrats", "wonderful", "amazing", "fantastic", "yay",
      "brilliant", "well done", "way to go", "nailed", "celebrate"};
  static const std::vector<std::string> playful = {
      "chat", "play", "game", "music", "fun", "trivia"};
  static const std::vector<std::string> factual = {
      "noted", "got it", "understood", "sure", "alright", "all set", "moving on"};
  switch (cls) {
    case ResponseClass::empathetic: return empathetic;
    case ResponseClass::celebratory: return celebratory;
    case ResponseClass::neutral_playful: return playful;
    case ResponseClass::neutral_factual: return factual;
  }
  return factual;
}

// Marker-lexicon classification. Highest hit count wins; ties resolve in
// fixed class order (empathetic, celebratory, playful, factual). No hits at
// all means the response is unclassifiable.
inline std::optional<ResponseClass> classify_response(const std::string& response) {
  const std::string low = to_lower(response);
  static const std::array<ResponseClass, 4> order = {
      ResponseClass::empathetic, ResponseClass::celebratory,
      ResponseClass::neutral_playful, ResponseClass::neutral_factual};
  int best = 0;
  std::optional<ResponseClass> winner;
  for (ResponseClass cls : order) {
    int hits = 0;
    for (const auto& marker : response_markers(cls))
      if (contains_word(low, marker)) ++hits;
    if (hits > best) {
      best = hits;
      winner = cls;
    }
  }
  return winner;
}

// Compatibility of a response class with the gold sentiment. Neutral gold
// accepts both neutral classes and rejects valenced ones; positive accepts
// celebratory or playful; negative accepts only empathetic.
inline bool class_compatible(ResponseClass cls, Sentiment gold) {
  switch (gold) {
    case Sentiment::negative: return cls == ResponseClass::empathetic;
    case Sentiment::positive:
      return cls == ResponseClass::celebratory || cls == ResponseClass::neutral_playful;
    case Sentiment::neutral:
      return cls == ResponseClass::neutral_playful || cls == ResponseClass::neutral_factual;
  }
  return false;
}

// Response class the template generator targets for a given sentiment.
inline ResponseClass target_response_class(Sentiment s, uint64_t key) {
  switch (s) {
    case Sentiment::negative: return ResponseClass::empathetic;
    case Sentiment::positive:
      // Mostly celebratory, occasionally playful, both judge-compatible.
      return (key % 10 < 7) ? ResponseClass::celebratory : ResponseClass::neutral_playful;
    case Sentiment::neutral:
      return (key % 2 == 0) ? ResponseClass::neutral_factual
                            : ResponseClass::neutral_playful;
  }
  return ResponseClass::neutral_factual;
}

inline std::string pick_response(ResponseClass cls, uint64_t key) {
  const auto& bank = response_templates(cls);
  return bank[key % bank.size()];
}

// Short prosody-flavored rationales used as CoT-format warm-start targets.
inline const char* cot_explanation(Sentiment s) {
  switch (s) {
    case Sentiment::negative: return "low pitch, slow pace";
    case Sentiment::positive: return "bright pitch, lively pace";
    case Sentiment::neutral: return "flat pitch, even pace";
  }
  return "flat pitch, even pace";
}

}  // namespace pallm
