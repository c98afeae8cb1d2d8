#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "stemgen/grid_io.hpp"
#include "stemgen/stem_layout.hpp"

using namespace stemgen;

TEST(Layout, DefaultHasSixStreamsAndResidualDelays) {
  const auto l = make_layout({{"bass", 1, 64}, {"drums", 1, 64}, {"other", 4, 64}}, 50.0);
  EXPECT_EQ(l.n_streams(), 6);
  EXPECT_EQ(l.delays(), (std::vector<int>{0, 0, 0, 1, 2, 3}));
  EXPECT_EQ(l, default_layout());
}

TEST(Layout, SingleStreamStem) {
  const auto l = make_layout({{"solo", 1, 8}});
  EXPECT_EQ(l.n_streams(), 1);
  EXPECT_EQ(l.delays(), std::vector<int>{0});
}

TEST(Layout, TwoMultiStreamStems) {
  const auto l = make_layout({{"a", 2, 8}, {"b", 3, 8}});
  EXPECT_EQ(l.delays(), (std::vector<int>{0, 1, 0, 1, 2}));
}

TEST(Layout, RejectsBadSpecs) {
  EXPECT_THROW(make_layout({{"a", 1, 8}, {"a", 2, 8}}), InvalidArgument);
  EXPECT_THROW(make_layout({{"a", 0, 8}}), InvalidArgument);
  EXPECT_THROW(make_layout({{"a", 1, 1}}), InvalidArgument);
  EXPECT_THROW(make_layout({}), InvalidArgument);
  EXPECT_THROW(make_layout({{"a", 1, 8}}, 0.0), InvalidArgument);
}

TEST(Layout, IsPure) {
  const std::vector<StemSpec> specs = {{"x", 3, 16}, {"y", 1, 4}};
  EXPECT_EQ(make_layout(specs, 25.0), make_layout(specs, 25.0));
}

TEST(Layout, StreamIndexExamples) {
  const auto d = default_layout();
  EXPECT_EQ(stream_index(d, "other", 1), 2);
  EXPECT_EQ(stream_index(d, "bass", 1), 0);
  const auto ab = make_layout({{"a", 2, 8}, {"b", 3, 8}});
  EXPECT_EQ(stream_index(ab, "b", 3), 4);
  EXPECT_THROW(stream_index(d, "vocals", 1), InvalidArgument);
  EXPECT_THROW(stream_index(d, "other", 5), InvalidArgument);
  EXPECT_THROW(stream_index(d, "bass", 0), InvalidArgument);
}

TEST(Layout, StreamIndexRoundTripsExhaustively) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<StemSpec> specs;
    const int n_stems = 1 + static_cast<int>(rng() % 5);
    for (int i = 0; i < n_stems; ++i)
      specs.push_back({"s" + std::to_string(i), 1 + static_cast<int>(rng() % 5), 2 + static_cast<int>(rng() % 30)});
    const auto l = make_layout(specs);
    std::vector<bool> hit(l.n_streams(), false);
    for (const auto& s : specs)
      for (int st = 1; st <= s.n_streams; ++st) {
        const int idx = stream_index(l, s.name, st);
        ASSERT_FALSE(hit[idx]);
        hit[idx] = true;
        EXPECT_EQ(stream_ref(l, idx), (StreamRef{s.name, st}));
      }
    for (int s = 0; s < l.n_streams(); ++s) {
      const auto r = stream_ref(l, s);
      EXPECT_EQ(stream_index(l, r.stem, r.stage), s);
      EXPECT_EQ(l.delays()[s], r.stage - 1);
    }
  }
}

TEST(Layout, SpecialIdsSitAboveCodebookAndAreDistinct) {
  const auto l = make_layout({{"a", 1, 5}, {"b", 2, 9}});
  for (int s = 0; s < l.n_streams(); ++s) {
    std::set<Token> ids;
    for (auto sp : {Special::pad_delay, Special::mask, Special::sep, Special::bos}) {
      const Token t = l.special(s, sp);
      EXPECT_GE(t, l.codebook_size(s));
      EXPECT_TRUE(l.is_special(s, t));
      EXPECT_FALSE(l.is_codebook_id(s, t));
      ids.insert(t);
    }
    EXPECT_EQ(ids.size(), 4u);
  }
}

TEST(ValidateGrid, AllZerosIsValid) {
  EXPECT_TRUE(validate_grid(TokenGrid(default_layout(), 10)).ok);
}

TEST(ValidateGrid, ReportsFirstOutOfRangeToken) {
  TokenGrid g(default_layout(), 10);
  g.at(0, 5) = 64 + kNumSpecials;
  g.at(3, 7) = -1;
  const auto r = validate_grid(g);
  EXPECT_FALSE(r.ok);
  ASSERT_TRUE(r.first);
  EXPECT_EQ(r.first->stream, 0);
  EXPECT_EQ(r.first->frame, 5);
  EXPECT_EQ(r.n_violations, 2u);
  EXPECT_THROW(require_valid(g), MalformedData);
}

TEST(ValidateGrid, CodebookSizeItselfIsSpecialNotViolation) {
  // codebook_size is PAD_DELAY, a declared special id; one past the specials is not.
  TokenGrid g(default_layout(), 10);
  g.at(0, 5) = 64;
  EXPECT_TRUE(validate_grid(g).ok);
}

TEST(ValidateGrid, MaskAnywhereIsValid) {
  const auto l = default_layout();
  TokenGrid g(l, 4);
  for (int s = 0; s < l.n_streams(); ++s)
    for (int t = 0; t < 4; ++t) g.at(s, t) = l.special(s, Special::mask);
  EXPECT_TRUE(validate_grid(g).ok);
}

TEST(GridIo, RoundTripsThroughText) {
  const auto l = make_layout_with_delays({{"a", 2, 7}, {"b", 1, 3}}, 12.5, {0, 2, 1});
  TokenGrid g(l, 9);
  std::mt19937 rng(1);
  for (int s = 0; s < l.n_streams(); ++s)
    for (int t = 0; t < 9; ++t) g.at(s, t) = static_cast<Token>(rng() % l.vocab_size(s));
  std::stringstream ss;
  write_grid(ss, g);
  EXPECT_EQ(read_grid(ss), g);
}

TEST(GridIo, RejectsGarbage) {
  std::stringstream bad("STEMGRID 9\n");
  EXPECT_THROW(read_grid(bad), MalformedData);
  std::stringstream empty;
  EXPECT_THROW(read_grid(empty), MalformedData);
  EXPECT_THROW(load_grid("/nonexistent/file.tok"), IoError);
}

TEST(GridIo, RejectsOutOfRangeTokens) {
  TokenGrid g(make_layout({{"a", 1, 4}}), 2);
  std::stringstream ss;
  write_grid(ss, g);
  auto text = ss.str();
  text.replace(text.rfind('0'), 1, "99");
  std::stringstream in(text);
  EXPECT_THROW(read_grid(in), MalformedData);
}

TEST(GridIo, LayoutJsonRoundTrip) {
  const auto l = make_layout_with_delays({{"a", 2, 7}, {"b", 1, 3}}, 12.5, {0, 2, 1});
  EXPECT_EQ(layout_from_json(layout_to_json(l)), l);
}
