#include "blicomb/pipeline.hpp"
#include "blicomb/synthgen.hpp"

#include <gtest/gtest.h>

using namespace blicomb;
using namespace blicomb::pipeline;

TEST(Fingerprint, KnownFnvValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(hex64(0xabcull), "0000000000000abc");
}

TEST(Report, StanzaLinesThenMetrics) {
  Report r({{"train_seed", "3"}, {"synth_seed", "7"}}, "lr=0.01\n");
  r.line("mode supervised");
  r.metric("lambda", 0.1);
  r.metric("note", "x");
  const std::string expected = "# blicomb report\n"
                               "# seeds: synth_seed=7 train_seed=3\n"
                               "# config_hash=" + hex64(fnv1a("lr=0.01\n")) + "\n"
                               "mode supervised\n"
                               "[metrics]\n"
                               "lambda=0.1000\n"
                               "note=x\n";
  EXPECT_EQ(r.str(), expected);
}

TEST(Report, ComparisonMetricsPresent) {
  Report r({}, "");
  add_comparison(r, {1, 2, 3, 4}, 0.12);
  const auto s = r.str();
  for (const char* k : {"baseline_p1=1.0000", "contextual_p1=2.0000", "unified_p1=3.0000", "interpolated_p1=4.0000",
                        "lambda=0.1200"}) {
    EXPECT_NE(s.find(k), std::string::npos) << k;
  }
}

TEST(Reversal, SwapsSides) {
  BilingualDictionary d({{1, 2}, {3, 4}});
  EXPECT_EQ(reversed(d), BilingualDictionary({{2, 1}, {4, 3}}));
  Checkpoint c;
  c.embed = {Matrix::Identity(2, 2), 2 * Matrix::Identity(2, 2)};
  c.anchor = c.embed;
  auto r = reversed(c);
  EXPECT_EQ(r.embed.wx, c.embed.wy);
  EXPECT_EQ(r.anchor.wy, c.anchor.wx);
}

TEST(RunSupervised, SmallWorldEndToEnd) {
  synthgen::SynthWorldConfig wc;
  wc.n_words = 400;
  wc.dim = 10;
  wc.anchor_dim = 12;
  wc.noise = 0.05;
  auto w = synthgen::generate(wc);
  auto split = synthgen::split_gold(w.gold, 150, 100, 100, 11);
  auto p = prepare({w.src, w.tgt, w.src_anchor, w.tgt_anchor}, {});
  SupervisedOptions opt;
  opt.train.epochs = 3;
  opt.train.learning_rate = 0.01;
  auto o = run_supervised(p, split.train, split.val, split.test, opt);
  ASSERT_TRUE(o.checkpoint.spring.has_value());
  EXPECT_EQ(o.lambda_search.grid.size(), 26u);
  EXPECT_EQ(o.checkpoint.lambda, o.lambda_search.lambda);
  EXPECT_GE(o.test.baseline, 90.0);
  for (double v : {o.test.baseline, o.test.contextual, o.test.unified, o.test.interpolated}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 100.0);
  }
  auto again = run_supervised(p, split.train, split.val, split.test, opt);
  EXPECT_EQ(again.test.interpolated, o.test.interpolated);
  EXPECT_EQ(again.checkpoint.spring->x.w0, o.checkpoint.spring->x.w0);
}
