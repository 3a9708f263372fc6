// Pulls in every public header once so missing includes or ODR issues fail
// loudly, plus a couple of end-to-end sanity checks.
#include <gtest/gtest.h>

#include "pallm/cli.hpp"

namespace pallm {
namespace {

TEST(Smoke, VocabIsDenseAndStable) {
  EXPECT_EQ(vocab().size(), 174);
  EXPECT_EQ(vocab().fingerprint(), Vocab().fingerprint());
}

TEST(Smoke, ModelBuilds) {
  ModelConfig cfg;
  cfg.vocab = vocab().size();
  TransformerModel<float> m(cfg);
  EXPECT_GT(m.param_count(), 100000u);
  EXPECT_LT(m.param_count(), 200000u);
}

}  // namespace
}  // namespace pallm
