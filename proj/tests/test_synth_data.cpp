#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "stemgen/synth_data.hpp"

using namespace stemgen;

namespace {

StyleParams style(int cond, double p_ct = 1.0, double p_ob = 1.0) {
  StyleParams s = style_for_condition(cond);
  s.p_ct = p_ct;
  s.p_ob = p_ob;
  return s;
}

const LayoutSpec& layout8() {
  static const LayoutSpec l = default_layout(64, 8.0);
  return l;
}

double chord_tone_rate(const std::vector<SymbolicSong>& songs) {
  std::size_t hits = 0, total = 0;
  for (const auto& s : songs)
    for (const auto& e : s.bass_events) {
      if (!e.active) continue;
      const auto c = chord_at(s, e.time);
      ++total;
      hits += c && ((c->pitch_classes() >> e.pitch_class) & 1u);
    }
  return static_cast<double>(hits) / total;
}

double on_beat_rate(const std::vector<SymbolicSong>& songs) {
  std::size_t hits = 0, total = 0;
  for (const auto& s : songs)
    for (const auto& e : s.drum_events) {
      ++total;
      hits += std::find(s.beat_grid.begin(), s.beat_grid.end(), e.time) != s.beat_grid.end();
    }
  return static_cast<double>(hits) / total;
}

std::vector<SymbolicSong> songs_with(double p_ct, double p_ob, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<SymbolicSong> out;
  for (int i = 0; i < n; ++i) out.push_back(generate_song(style(i % 4, p_ct, p_ob), rng));
  return out;
}

}  // namespace

TEST(GenerateSong, EnforcingSettingsHoldExactly) {
  const auto songs = songs_with(1.0, 1.0, 500, 1);
  EXPECT_EQ(chord_tone_rate(songs), 1.0);
  EXPECT_EQ(on_beat_rate(songs), 1.0);
}

TEST(GenerateSong, RandomPitchGivesTriadChanceLevel) {
  EXPECT_NEAR(chord_tone_rate(songs_with(0.0, 1.0, 3000, 2)), 0.25, 0.02);
}

TEST(GenerateSong, StatisticsTrackRequestedProbabilities) {
  // Non-chord-tone draws are uniform over 12 classes, so 1/4 of them still land on the triad.
  const auto songs = songs_with(0.6, 0.7, 10000, 3);
  EXPECT_NEAR(chord_tone_rate(songs), 0.6 + 0.4 * 0.25, 0.02);
  EXPECT_NEAR(on_beat_rate(songs), 0.7, 0.02);
}

TEST(GenerateSong, RejectsEmptyVocabulary) {
  auto s = style(0);
  s.chord_vocabulary.clear();
  std::mt19937_64 rng(0);
  EXPECT_THROW(generate_song(s, rng), InvalidArgument);
}

TEST(GenerateSong, Bpm120BeatsHalfSecondApart) {
  auto s = style(0);
  s.bpm_choices = {120.0};
  std::mt19937_64 rng(4);
  const auto song = generate_song(s, rng);
  for (std::size_t i = 1; i < song.beat_grid.size(); ++i)
    EXPECT_DOUBLE_EQ(song.beat_grid[i] - song.beat_grid[i - 1], 0.5);
}

TEST(SymbolicTokenizer, RoundTripsThousandSongs) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    auto st = style(i % 4, i % 3 == 0 ? 0.5 : 1.0, i % 5 == 0 ? 0.6 : 1.0);
    st.hat_prob = i % 2 ? 0.5 : 0.0;
    const auto song = generate_song(st, rng);
    const auto grid = symbolic_tokenize(song, layout8());
    ASSERT_TRUE(validate_grid(grid).ok);
    const auto back = symbolic_detokenize(grid);
    ASSERT_EQ(back.warnings, 0u) << "song " << i;
    ASSERT_TRUE(same_content(back.song, song)) << "song " << i;
    ASSERT_EQ(symbolic_tokenize(back.song, layout8()), grid);
  }
}

TEST(SymbolicTokenizer, SilentBassIsRestEverywhere) {
  std::mt19937_64 rng(6);
  auto song = generate_song(style(0), rng);
  song.bass_events.clear();
  const auto grid = symbolic_tokenize(song, layout8());
  for (int t = 0; t < grid.frames(); ++t) EXPECT_EQ(grid.at(0, t), 0);
}

TEST(SymbolicTokenizer, OneChordChangeIsLocalToItsBar) {
  std::mt19937_64 rng(7);
  auto a = generate_song(style(0), rng);
  auto b = a;
  const Chord old = a.chords[1].chord;
  const Chord repl{(old.root + 1) % 12, old.minor};
  b.chords[1].chord = repl;
  for (auto& e : b.other_events)
    if (e.time >= b.chords[1].start && e.time < b.chords[1].end) e.chord = repl;
  const auto ga = symbolic_tokenize(a, layout8());
  const auto gb = symbolic_tokenize(b, layout8());
  const int f0 = static_cast<int>(std::lround(a.chords[1].start * 8.0));
  const int f1 = static_cast<int>(std::lround(a.chords[1].end * 8.0));
  for (int t = 0; t < ga.frames(); ++t) EXPECT_EQ(ga.at(2, t) != gb.at(2, t), t >= f0 && t < f1) << t;
  for (int s : {0, 1, 3, 4, 5}) EXPECT_EQ(ga.stream(s), gb.stream(s));
}

TEST(SymbolicTokenizer, EventOutsideGridRejected) {
  std::mt19937_64 rng(8);
  auto song = generate_song(style(0), rng);
  song.drum_events.push_back({song.duration_s + 1.0, DrumClass::kick});
  EXPECT_THROW(symbolic_tokenize(song, layout8()), InvalidArgument);
  EXPECT_THROW(symbolic_tokenize(song, make_layout({{"x", 1, 64}})), LayoutMismatch);
}

TEST(SymbolicDetokenizer, SilentGridIsAllRest) {
  const auto r = symbolic_detokenize(TokenGrid(layout8(), 30));
  EXPECT_TRUE(r.song.bass_events.empty());
  EXPECT_TRUE(r.song.drum_events.empty());
  EXPECT_TRUE(r.song.other_events.empty());
  EXPECT_EQ(r.warnings, 0u);
}

TEST(SymbolicDetokenizer, ArbitraryGridDecodesWithWarnings) {
  std::mt19937_64 rng(9);
  TokenGrid g(layout8(), 60);
  for (int s = 0; s < 6; ++s)
    for (int t = 0; t < 60; ++t) g.at(s, t) = static_cast<Token>(rng() % 68);
  DetokenizeResult r;
  ASSERT_NO_THROW(r = symbolic_detokenize(g));
  EXPECT_GT(r.warnings, 0u);
  EXPECT_THROW(symbolic_detokenize(TokenGrid(make_layout({{"x", 1, 64}}), 3)), LayoutMismatch);
}

TEST(SongJson, RoundTrip) {
  std::mt19937_64 rng(10);
  const auto s = generate_song(style(3), rng);
  const auto back = song_from_json(to_json(s));
  EXPECT_TRUE(same_content(back, s));
  EXPECT_EQ(back.beat_grid, s.beat_grid);
  EXPECT_EQ(back.bpm, s.bpm);
  EXPECT_EQ(back.condition_id, 3);
}

TEST(Dataset, WriteLoadAndSplit) {
  const auto dir = (std::filesystem::temp_directory_path() / "stemgen_ds_test").string();
  std::filesystem::remove_all(dir);
  DatasetOptions opt;
  opt.n_songs = 60;
  write_dataset(dir, opt);
  const auto ds = load_dataset(dir);
  ASSERT_EQ(ds.songs.size(), 60u);
  EXPECT_EQ(ds.split(Split::train).size(), 54u);
  EXPECT_EQ(ds.split(Split::validation).size(), 3u);
  EXPECT_EQ(ds.split(Split::test).size(), 3u);
  for (const auto& e : ds.songs) {
    const auto song = load_sidecar(e.sidecar);
    EXPECT_EQ(symbolic_tokenize(song, ds.layout), e.tokens);
    EXPECT_EQ(song.condition_id, e.condition);
    EXPECT_TRUE(same_content(song, dataset_song(opt, e.id)));
  }
  EXPECT_THROW(load_dataset(dir + "_missing"), IoError);
}

TEST(Dataset, SongsDependOnlyOnSeedAndId) {
  DatasetOptions a, b;
  b.n_songs = 5;
  EXPECT_TRUE(same_content(dataset_song(a, 3), dataset_song(b, 3)));
  b.seed = 8;
  EXPECT_FALSE(same_content(dataset_song(a, 3), dataset_song(b, 3)));
}

TEST(StemFeatures, ShapesAndDeterminism) {
  std::mt19937_64 rng(11);
  const auto song = generate_song(style(0), rng);
  std::mt19937_64 r1(1), r2(1);
  const auto a = render_stem_features(song, "other", 8.0, 0.1, r1);
  const auto b = render_stem_features(song, "other", 8.0, 0.1, r2);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.frames(), 60);
  EXPECT_EQ(a.dim, 16);
  EXPECT_EQ(render_stem_features(song, "bass", 8.0, 0.0, r1).dim, 13);
  EXPECT_EQ(render_stem_features(song, "drums", 8.0, 0.0, r1).dim, 4);
  EXPECT_THROW(render_stem_features(song, "vocals", 8.0, 0.0, r1), InvalidArgument);
}
