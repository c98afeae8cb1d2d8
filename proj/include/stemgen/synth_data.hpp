#pragma once

// Synthetic multi-stem songs with known cross-stem structure, and an exact
// symbolic tokenizer for the default bass/drums/other layout.
//
// All event times sit on the frame grid (multiples of 1 / frame_rate), so
// tokenize/detokenize round trips are exact.
//
// Stream codes (0 is silence/rest everywhere):
//   bass     1..12 onset pitch class, 13..24 sustain pitch class
//   drums    1 kick, 2 snare, 3 hat (onset frames only)
//   other_1  1 + chord id (root + 12 * minor), 24 chords
//   other_2  onset 1 + inversion + 3 * bar_start (1..6), sustain 7 + inversion
//   other_3  1 + register (1..4)
//   other_4  onset 1 + velocity (1..4), sustain 5 + velocity (5..8)

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stemgen/error.hpp"
#include "stemgen/grid_io.hpp"
#include "stemgen/rvq_codec.hpp"
#include "stemgen/stem_layout.hpp"

namespace stemgen {

struct Chord {
  int root = 0;  // pitch class 0..11
  bool minor = false;

  int id() const { return root + (minor ? 12 : 0); }
  static Chord from_id(int id) { return {id % 12, id >= 12}; }
  std::uint16_t pitch_classes() const {
    const int third = minor ? 3 : 4;
    return static_cast<std::uint16_t>((1u << root) | (1u << ((root + third) % 12)) |
                                      (1u << ((root + 7) % 12)));
  }
  std::string name() const {
    static const char* names[12] = {"C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"};
    return std::string(names[root]) + (minor ? "m" : "");
  }
  bool operator==(const Chord&) const = default;
};

enum class DrumClass : int { kick = 1, snare = 2, hat = 3 };

struct ChordSpan {
  double start = 0.0;
  double end = 0.0;
  Chord chord;
  bool operator==(const ChordSpan&) const = default;
};

struct BassEvent {
  double time = 0.0;
  int pitch_class = 0;
  bool active = true;
  bool operator==(const BassEvent&) const = default;
};

struct DrumEvent {
  double time = 0.0;
  DrumClass cls = DrumClass::kick;
  bool operator==(const DrumEvent&) const = default;
};

struct Voicing {
  int inversion = 0;  // 0..2
  int register_ = 0;  // 0..3
  int velocity = 0;   // 0..3
  bool operator==(const Voicing&) const = default;
};

struct OtherEvent {
  double time = 0.0;
  Chord chord;
  Voicing voicing;
  bool bar_start = false;
  bool active = true;
  bool operator==(const OtherEvent&) const = default;
};

struct SymbolicSong {
  double bpm = 0.0;  // 0 when unknown (detokenized)
  std::vector<double> beat_grid;
  std::vector<ChordSpan> chords;
  std::vector<BassEvent> bass_events;
  std::vector<DrumEvent> drum_events;
  std::vector<OtherEvent> other_events;
  int condition_id = -1;
  double duration_s = 0.0;
};

/// Musical content equality: everything except bpm, beat grid and condition,
/// which the tokens do not carry.
inline bool same_content(const SymbolicSong& a, const SymbolicSong& b) {
  return a.chords == b.chords && a.bass_events == b.bass_events &&
         a.drum_events == b.drum_events && a.other_events == b.other_events &&
         a.duration_s == b.duration_s;
}

struct StyleParams {
  double frame_rate_hz = 8.0;
  int n_frames = 60;
  std::vector<double> bpm_choices = {96.0, 120.0, 160.0};
  int beats_per_bar = 4;
  std::vector<Chord> chord_vocabulary;
  std::vector<DrumClass> drum_pattern = {DrumClass::kick, DrumClass::snare, DrumClass::kick,
                                         DrumClass::snare};
  double p_ct = 1.0;         // bass pitch drawn from chord tones
  double p_ob = 1.0;         // drum event on its beat
  double p_bass_rest = 0.1;  // bass beat is a rest
  double p_restrike = 0.5;   // other re-strikes on a non-downbeat beat
  double hat_prob = 0.0;     // hat at the half-beat
  int condition_id = 0;
};

inline constexpr int kDefaultConditions = 4;

/// Condition ids select a style: bit 0 chooses minor over major triads, bit 1
/// chooses the kick-kick-kick-snare pattern over the kick-snare backbeat.
inline StyleParams style_for_condition(int condition_id, StyleParams base = {}) {
  if (condition_id < 0 || condition_id >= kDefaultConditions)
    throw InvalidArgument("condition id out of range for the synthetic styles");
  base.condition_id = condition_id;
  base.chord_vocabulary.clear();
  const bool minor = condition_id & 1;
  for (int r = 0; r < 12; ++r) base.chord_vocabulary.push_back({r, minor});
  if (condition_id & 2)
    base.drum_pattern = {DrumClass::kick, DrumClass::kick, DrumClass::kick, DrumClass::snare};
  else
    base.drum_pattern = {DrumClass::kick, DrumClass::snare, DrumClass::kick, DrumClass::snare};
  return base;
}

template <class Rng>
SymbolicSong generate_song(const StyleParams& style, Rng& rng) {
  if (style.chord_vocabulary.empty()) throw InvalidArgument("empty chord vocabulary");
  if (style.bpm_choices.empty()) throw InvalidArgument("empty bpm choices");
  if (style.drum_pattern.empty() || style.beats_per_bar < 1)
    throw InvalidArgument("invalid bar/drum pattern");
  if (style.n_frames < 1 || !(style.frame_rate_hz > 0.0)) throw InvalidArgument("invalid song length");
  auto unit = [&] { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); };
  auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
  const double fr = style.frame_rate_hz;
  const int n_frames = style.n_frames;
  auto time_of = [&](int f) { return static_cast<double>(f) / fr; };

  SymbolicSong song;
  song.condition_id = style.condition_id;
  song.duration_s = time_of(n_frames);
  song.bpm = style.bpm_choices[pick(static_cast<int>(style.bpm_choices.size()))];
  const double period_frames = 60.0 / song.bpm * fr;
  if (period_frames < 2.0) throw InvalidArgument("tempo too fast for the frame rate");
  std::vector<int> beats;
  for (int k = 0;; ++k) {
    const int f = static_cast<int>(std::lround(k * period_frames));
    if (f >= n_frames) break;
    beats.push_back(f);
    song.beat_grid.push_back(time_of(f));
  }
  const int n_beats = static_cast<int>(beats.size());
  const int bpb = style.beats_per_bar;
  auto beat_end = [&](int b) { return b + 1 < n_beats ? beats[b + 1] : n_frames; };

  // chords per bar
  std::vector<Chord> bar_chord;
  for (int b = 0; b < n_beats; b += bpb) {
    const Chord c = style.chord_vocabulary[pick(static_cast<int>(style.chord_vocabulary.size()))];
    bar_chord.push_back(c);
    const int end_beat = std::min(b + bpb, n_beats);
    song.chords.push_back({time_of(beats[b]), time_of(end_beat < n_beats ? beats[end_beat] : n_frames), c});
  }

  // bass: one event per beat; rests only after an active note
  bool bass_active = false;
  for (int b = 0; b < n_beats; ++b) {
    const Chord c = bar_chord[b / bpb];
    if (unit() < style.p_bass_rest) {
      if (bass_active) song.bass_events.push_back({time_of(beats[b]), 0, false});
      bass_active = false;
      continue;
    }
    int pc;
    if (unit() < style.p_ct) {
      const int third = c.minor ? 3 : 4;
      const std::array<int, 3> tones = {c.root, (c.root + third) % 12, (c.root + 7) % 12};
      pc = tones[pick(3)];
    } else {
      pc = pick(12);
    }
    song.bass_events.push_back({time_of(beats[b]), pc, true});
    bass_active = true;
  }

  // drums
  std::vector<bool> occupied(n_frames, false);
  for (int f : beats) occupied[f] = true;
  std::vector<std::pair<int, DrumClass>> drums;
  for (int b = 0; b < n_beats; ++b) {
    const DrumClass cls = style.drum_pattern[b % bpb % style.drum_pattern.size()];
    if (unit() < style.p_ob) {
      drums.emplace_back(beats[b], cls);
      continue;
    }
    const int half = std::max(1, static_cast<int>(period_frames / 2));
    std::vector<int> cands;
    for (int f = beats[b] - half; f <= beats[b] + half; ++f)
      if (f >= 0 && f < n_frames && !occupied[f]) cands.push_back(f);
    if (cands.empty()) {
      drums.emplace_back(beats[b], cls);
      continue;
    }
    const int f = cands[pick(static_cast<int>(cands.size()))];
    occupied[f] = true;
    drums.emplace_back(f, cls);
  }
  if (style.hat_prob > 0.0) {
    for (int b = 0; b < n_beats; ++b) {
      const int f = (beats[b] + beat_end(b)) / 2;
      if (f > beats[b] && f < n_frames && !occupied[f] && unit() < style.hat_prob) {
        occupied[f] = true;
        drums.emplace_back(f, DrumClass::hat);
      }
    }
  }
  std::sort(drums.begin(), drums.end(), [](auto& a, auto& b) { return a.first < b.first; });
  for (auto& [f, cls] : drums) song.drum_events.push_back({time_of(f), cls});

  // other: bar-start voicing plus optional re-strikes
  int reg = 0;
  for (int b = 0; b < n_beats; ++b) {
    const bool bar_start = b % bpb == 0;
    if (bar_start) reg = pick(4);
    else if (unit() >= style.p_restrike) continue;
    const int inv = pick(3);
    const int vel = pick(4);
    song.other_events.push_back({time_of(beats[b]), bar_chord[b / bpb], {inv, reg, vel}, bar_start, true});
  }
  return song;
}

inline bool is_default_structure(const LayoutSpec& layout) {
  const auto& st = layout.stems();
  return st.size() == 3 && st[0].name == "bass" && st[0].n_streams == 1 && st[1].name == "drums" &&
         st[1].n_streams == 1 && st[2].name == "other" && st[2].n_streams == 4 &&
         std::all_of(st.begin(), st.end(), [](const StemSpec& s) { return s.codebook_size >= 25; });
}

inline TokenGrid symbolic_tokenize(const SymbolicSong& song, const LayoutSpec& layout) {
  if (!is_default_structure(layout))
    throw LayoutMismatch("symbolic tokenizer needs the bass:1/drums:1/other:4 layout "
                         "with codebook_size >= 25");
  const double fr = layout.frame_rate_hz();
  const int n_frames = static_cast<int>(std::lround(song.duration_s * fr));
  auto frame_of = [&](double t) {
    const long f = std::lround(t * fr);
    if (f < 0 || f >= n_frames)
      throw InvalidArgument("song event at " + std::to_string(t) + " s lies outside the grid");
    return static_cast<int>(f);
  };
  TokenGrid g(layout, n_frames, 0);

  for (std::size_t i = 0; i < song.bass_events.size(); ++i) {
    const auto& e = song.bass_events[i];
    const int f0 = frame_of(e.time);
    const int f1 = i + 1 < song.bass_events.size() ? frame_of(song.bass_events[i + 1].time) : n_frames;
    for (int f = f0; f < f1; ++f)
      g.at(0, f) = e.active ? (f == f0 ? 1 + e.pitch_class : 13 + e.pitch_class) : 0;
  }
  for (const auto& e : song.drum_events) g.at(1, frame_of(e.time)) = static_cast<int>(e.cls);
  for (std::size_t i = 0; i < song.other_events.size(); ++i) {
    const auto& e = song.other_events[i];
    const int f0 = frame_of(e.time);
    const int f1 = i + 1 < song.other_events.size() ? frame_of(song.other_events[i + 1].time) : n_frames;
    for (int f = f0; f < f1; ++f) {
      if (!e.active) {
        for (int s = 2; s < 6; ++s) g.at(s, f) = 0;
        continue;
      }
      const bool onset = f == f0;
      g.at(2, f) = 1 + e.chord.id();
      g.at(3, f) = onset ? 1 + e.voicing.inversion + (e.bar_start ? 3 : 0) : 7 + e.voicing.inversion;
      g.at(4, f) = 1 + e.voicing.register_;
      g.at(5, f) = onset ? 1 + e.voicing.velocity : 5 + e.voicing.velocity;
    }
  }
  return g;
}

struct DetokenizeResult {
  SymbolicSong song;
  /// Codes that were unknown or implausible (decoded as rests/defaults).
  std::size_t warnings = 0;
};

inline DetokenizeResult symbolic_detokenize(const TokenGrid& grid) {
  if (!is_default_structure(grid.layout()))
    throw LayoutMismatch("symbolic detokenizer needs the bass:1/drums:1/other:4 layout");
  const double fr = grid.layout().frame_rate_hz();
  auto time_of = [&](int f) { return static_cast<double>(f) / fr; };
  DetokenizeResult r;
  auto& song = r.song;
  const int n = grid.frames();
  song.duration_s = time_of(n);

  // bass
  bool active = false;
  int pc = -1;
  for (int f = 0; f < n; ++f) {
    const Token c = grid.at(0, f);
    if (c >= 1 && c <= 12) {
      song.bass_events.push_back({time_of(f), c - 1, true});
      active = true;
      pc = c - 1;
    } else if (c >= 13 && c <= 24) {
      if (!active || pc != c - 13) {
        ++r.warnings;
        song.bass_events.push_back({time_of(f), c - 13, true});
        active = true;
        pc = c - 13;
      }
    } else {
      if (c != 0) ++r.warnings;
      if (active) song.bass_events.push_back({time_of(f), 0, false});
      active = false;
    }
  }

  // drums
  for (int f = 0; f < n; ++f) {
    const Token c = grid.at(1, f);
    if (c >= 1 && c <= 3) song.drum_events.push_back({time_of(f), static_cast<DrumClass>(c)});
    else if (c != 0) ++r.warnings;
  }

  // other
  bool sounding = false;
  OtherEvent cur;
  for (int f = 0; f < n; ++f) {
    const Token chord = grid.at(2, f), texture = grid.at(3, f), reg = grid.at(4, f), vel = grid.at(5, f);
    const bool chord_ok = chord >= 1 && chord <= 24;
    if (!chord_ok) {
      if (chord != 0) ++r.warnings;
      if (sounding) {
        OtherEvent off = cur;
        off.time = time_of(f);
        off.active = false;
        off.bar_start = false;
        song.other_events.push_back(off);
      }
      sounding = false;
      continue;
    }
    const Chord c = Chord::from_id(chord - 1);
    const bool onset = texture >= 1 && texture <= 6;
    const bool sustain = texture >= 7 && texture <= 9;
    if (!onset && !sustain) ++r.warnings;
    Voicing v = cur.voicing;
    if (onset) v.inversion = (texture - 1) % 3;
    else if (sustain) v.inversion = texture - 7;
    if (reg >= 1 && reg <= 4) v.register_ = reg - 1;
    else ++r.warnings;
    if (vel >= 1 && vel <= 4) v.velocity = vel - 1;
    else if (vel >= 5 && vel <= 8) v.velocity = vel - 5;
    else ++r.warnings;
    const bool continues = sounding && !onset && c == cur.chord && v == cur.voicing;
    if (continues) continue;
    if (!onset) ++r.warnings;
    cur = OtherEvent{time_of(f), c, v, onset && texture >= 4, true};
    song.other_events.push_back(cur);
    sounding = true;
  }

  // chord spans: a span opens at every bar start and at every chord change
  for (const auto& e : song.other_events) {
    if (!e.active) {
      if (!song.chords.empty() && song.chords.back().end < 0) song.chords.back().end = e.time;
      continue;
    }
    const bool open = !song.chords.empty() && song.chords.back().end < 0;
    if (open && !e.bar_start && song.chords.back().chord == e.chord) continue;
    if (open) song.chords.back().end = e.time;
    song.chords.push_back({e.time, -1.0, e.chord});
  }
  if (!song.chords.empty() && song.chords.back().end < 0) song.chords.back().end = song.duration_s;
  return r;
}

/// Chord sounding at time `t` (nullopt in silence).
inline std::optional<Chord> chord_at(const SymbolicSong& song, double t) {
  for (const auto& span : song.chords)
    if (t >= span.start && t < span.end) return span.chord;
  return std::nullopt;
}

/// Continuous per-frame features of one stem, a stand-in for codec latents.
template <class Rng>
FrameSequence render_stem_features(const SymbolicSong& song, const std::string& stem,
                                   double frame_rate, double noise, Rng& rng) {
  const int n = static_cast<int>(std::lround(song.duration_s * frame_rate));
  auto frame_of = [&](double t) { return static_cast<int>(std::lround(t * frame_rate)); };
  std::normal_distribution<double> gauss(0.0, noise);
  FrameSequence out;
  if (stem == "bass") {
    out = FrameSequence(n, 13);
    for (std::size_t i = 0; i < song.bass_events.size(); ++i) {
      const auto& e = song.bass_events[i];
      if (!e.active) continue;
      const int f0 = frame_of(e.time);
      const int f1 = i + 1 < song.bass_events.size() ? frame_of(song.bass_events[i + 1].time) : n;
      for (int f = f0; f < f1 && f < n; ++f) {
        out.frame(f)[e.pitch_class] = f == f0 ? 1.0 : 0.7;
        out.frame(f)[12] = 1.0;
      }
    }
  } else if (stem == "drums") {
    out = FrameSequence(n, 4);
    for (const auto& e : song.drum_events) {
      const int f = frame_of(e.time);
      const int k = static_cast<int>(e.cls) - 1;
      if (f < n) { out.frame(f)[k] = 1.0; out.frame(f)[3] = 1.0; }
      if (f + 1 < n) { out.frame(f + 1)[k] = std::max(out.frame(f + 1)[k], 0.4); }
    }
  } else if (stem == "other") {
    out = FrameSequence(n, 16);
    for (std::size_t i = 0; i < song.other_events.size(); ++i) {
      const auto& e = song.other_events[i];
      if (!e.active) continue;
      const int f0 = frame_of(e.time);
      const int f1 = i + 1 < song.other_events.size() ? frame_of(song.other_events[i + 1].time) : n;
      const int third = e.chord.minor ? 3 : 4;
      const std::array<int, 3> tones = {e.chord.root, (e.chord.root + third) % 12, (e.chord.root + 7) % 12};
      const double gain = 0.5 + 0.5 * e.voicing.velocity / 3.0;
      for (int f = f0; f < f1 && f < n; ++f) {
        const double decay = f == f0 ? 1.0 : 0.8;
        for (int k = 0; k < 3; ++k)
          out.frame(f)[tones[k]] = gain * decay * (k == e.voicing.inversion ? 1.0 : 0.6);
        out.frame(f)[12 + e.voicing.register_] = decay;
      }
    }
  } else {
    throw InvalidArgument("unknown stem '" + stem + "'");
  }
  if (noise > 0.0)
    for (double& v : out.values) v += gauss(rng);
  return out;
}

// ---------------------------------------------------------------------------
// JSON sidecars and dataset directories

inline nlohmann::json to_json(const SymbolicSong& s) {
  nlohmann::json j;
  j["bpm"] = s.bpm;
  j["beat_grid"] = s.beat_grid;
  j["condition_id"] = s.condition_id;
  j["duration_s"] = s.duration_s;
  j["chords"] = nlohmann::json::array();
  for (const auto& c : s.chords)
    j["chords"].push_back({{"start", c.start}, {"end", c.end}, {"chord", c.chord.id()}, {"name", c.chord.name()}});
  j["bass_events"] = nlohmann::json::array();
  for (const auto& e : s.bass_events)
    j["bass_events"].push_back({{"time", e.time}, {"pitch_class", e.pitch_class}, {"active", e.active}});
  j["drum_events"] = nlohmann::json::array();
  for (const auto& e : s.drum_events)
    j["drum_events"].push_back({{"time", e.time}, {"class", static_cast<int>(e.cls)}});
  j["other_events"] = nlohmann::json::array();
  for (const auto& e : s.other_events)
    j["other_events"].push_back({{"time", e.time},
                                 {"chord", e.chord.id()},
                                 {"inversion", e.voicing.inversion},
                                 {"register", e.voicing.register_},
                                 {"velocity", e.voicing.velocity},
                                 {"bar_start", e.bar_start},
                                 {"active", e.active}});
  return j;
}

inline SymbolicSong song_from_json(const nlohmann::json& j) {
  SymbolicSong s;
  s.bpm = j.at("bpm").get<double>();
  s.beat_grid = j.at("beat_grid").get<std::vector<double>>();
  s.condition_id = j.at("condition_id").get<int>();
  s.duration_s = j.at("duration_s").get<double>();
  for (const auto& c : j.at("chords"))
    s.chords.push_back({c.at("start").get<double>(), c.at("end").get<double>(), Chord::from_id(c.at("chord").get<int>())});
  for (const auto& e : j.at("bass_events"))
    s.bass_events.push_back({e.at("time").get<double>(), e.at("pitch_class").get<int>(), e.at("active").get<bool>()});
  for (const auto& e : j.at("drum_events"))
    s.drum_events.push_back({e.at("time").get<double>(), static_cast<DrumClass>(e.at("class").get<int>())});
  for (const auto& e : j.at("other_events"))
    s.other_events.push_back({e.at("time").get<double>(),
                              Chord::from_id(e.at("chord").get<int>()),
                              {e.at("inversion").get<int>(), e.at("register").get<int>(), e.at("velocity").get<int>()},
                              e.at("bar_start").get<bool>(),
                              e.at("active").get<bool>()});
  return s;
}

enum class Split { train, validation, test };

/// 90/5/5 split by song id.
inline Split split_of(int song_id) {
  const int r = song_id % 20;
  return r == 18 ? Split::validation : r == 19 ? Split::test : Split::train;
}

inline const char* split_name(Split s) {
  return s == Split::train ? "train" : s == Split::validation ? "validation" : "test";
}

struct DatasetOptions {
  int n_songs = 10000;
  std::uint64_t seed = 7;
  StyleParams style;  // chord vocabulary / drum pattern come from the condition
  int codebook_size = 64;
  int n_conditions = kDefaultConditions;
};

inline constexpr int kDatasetFormatVersion = 1;

inline std::string song_stem_name(int id) {
  std::ostringstream os;
  os << "song_" << std::setw(5) << std::setfill('0') << id;
  return os.str();
}

/// Song `id` of a dataset; depends only on (seed, id).
inline SymbolicSong dataset_song(const DatasetOptions& opt, int id) {
  std::seed_seq seq{static_cast<std::uint32_t>(opt.seed), static_cast<std::uint32_t>(opt.seed >> 32),
                    static_cast<std::uint32_t>(id)};
  std::mt19937_64 rng(seq);
  const int cond = std::uniform_int_distribution<int>(0, opt.n_conditions - 1)(rng);
  return generate_song(style_for_condition(cond, opt.style), rng);
}

/// Writes <dir>/manifest.json plus one token file and one JSON sidecar per song.
inline void write_dataset(const std::string& dir, const DatasetOptions& opt) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto layout = default_layout(opt.codebook_size, opt.style.frame_rate_hz);
  nlohmann::json manifest;
  manifest["format_version"] = kDatasetFormatVersion;
  manifest["seed"] = opt.seed;
  manifest["n_songs"] = opt.n_songs;
  manifest["n_conditions"] = opt.n_conditions;
  manifest["layout"] = layout_to_json(layout);
  manifest["style"] = {{"frame_rate_hz", opt.style.frame_rate_hz},
                       {"n_frames", opt.style.n_frames},
                       {"bpm_choices", opt.style.bpm_choices},
                       {"p_ct", opt.style.p_ct},
                       {"p_ob", opt.style.p_ob},
                       {"p_bass_rest", opt.style.p_bass_rest},
                       {"p_restrike", opt.style.p_restrike},
                       {"hat_prob", opt.style.hat_prob}};
  manifest["songs"] = nlohmann::json::array();
  for (int id = 0; id < opt.n_songs; ++id) {
    const auto song = dataset_song(opt, id);
    const auto base = song_stem_name(id);
    save_grid((fs::path(dir) / (base + ".tok")).string(), symbolic_tokenize(song, layout));
    std::ofstream side(fs::path(dir) / (base + ".json"));
    if (!side) throw IoError("cannot write sidecar for " + base);
    side << to_json(song).dump();
    manifest["songs"].push_back({{"id", id},
                                 {"tokens", base + ".tok"},
                                 {"sidecar", base + ".json"},
                                 {"condition", song.condition_id},
                                 {"split", split_name(split_of(id))}});
  }
  std::ofstream os(fs::path(dir) / "manifest.json");
  if (!os) throw IoError("cannot write manifest in " + dir);
  os << manifest.dump(1);
}

struct DatasetEntry {
  int id = 0;
  int condition = 0;
  Split split = Split::train;
  std::string sidecar;
  TokenGrid tokens;
};

struct Dataset {
  std::string dir;
  LayoutSpec layout;
  nlohmann::json manifest;
  std::vector<DatasetEntry> songs;

  std::vector<const DatasetEntry*> split(Split s) const {
    std::vector<const DatasetEntry*> out;
    for (const auto& e : songs)
      if (e.split == s) out.push_back(&e);
    return out;
  }
};

inline Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream is(fs::path(dir) / "manifest.json");
  if (!is) throw IoError("no manifest.json in " + dir);
  Dataset ds;
  ds.dir = dir;
  ds.manifest = nlohmann::json::parse(is);
  if (ds.manifest.value("format_version", 0) != kDatasetFormatVersion)
    throw MalformedData(dir + ": unsupported dataset format");
  ds.layout = layout_from_json(ds.manifest.at("layout"));
  for (const auto& s : ds.manifest.at("songs")) {
    DatasetEntry e;
    e.id = s.at("id").get<int>();
    e.condition = s.at("condition").get<int>();
    const auto split = s.at("split").get<std::string>();
    e.split = split == "train" ? Split::train : split == "validation" ? Split::validation : Split::test;
    e.sidecar = (fs::path(dir) / s.at("sidecar").get<std::string>()).string();
    e.tokens = load_grid((fs::path(dir) / s.at("tokens").get<std::string>()).string());
    if (!e.tokens.layout().same_structure(ds.layout))
      throw LayoutMismatch(dir + ": song " + std::to_string(e.id) + " has a different layout");
    ds.songs.push_back(std::move(e));
  }
  return ds;
}

inline SymbolicSong load_sidecar(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return song_from_json(nlohmann::json::parse(is));
}

}  // namespace stemgen
