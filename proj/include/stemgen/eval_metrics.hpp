#pragma once

// Objective editing metrics: beat F-measure (BEAT), bass/chord harmonic
// match (HAR), per-stream preservation rate, and symbolic beat extraction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "stemgen/edit_conditioning.hpp"
#include "stemgen/error.hpp"
#include "stemgen/stem_layout.hpp"
#include "stemgen/synth_data.hpp"

namespace stemgen {

struct BeatScore {
  double f_measure = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  /// Estimated beats empty while the reference is not (silent stem).
  bool silent = false;
};

/// One-to-one greedy matching: each reference beat, in order, takes the
/// earliest unmatched estimate within +/- tolerance. With equal windows this
/// greedy order yields a maximum matching, so P and R swap with the arguments.
inline BeatScore beat_f_measure(std::span<const double> reference, std::span<const double> estimated,
                                double tolerance_s = 0.07) {
  if (!(tolerance_s > 0.0)) throw InvalidArgument("beat tolerance must be > 0");
  if (!std::is_sorted(reference.begin(), reference.end()) ||
      !std::is_sorted(estimated.begin(), estimated.end()))
    throw InvalidArgument("beat lists must be sorted");
  BeatScore s;
  if (reference.empty() && estimated.empty()) {
    s.f_measure = s.precision = s.recall = 1.0;
    return s;
  }
  if (reference.empty() || estimated.empty()) {
    s.silent = estimated.empty();
    return s;
  }
  std::vector<bool> used(estimated.size(), false);
  std::size_t hits = 0;
  for (double r : reference) {
    auto it = std::lower_bound(estimated.begin(), estimated.end(), r - tolerance_s);
    for (; it != estimated.end() && *it <= r + tolerance_s; ++it) {
      const auto i = static_cast<std::size_t>(it - estimated.begin());
      if (!used[i] && std::abs(*it - r) <= tolerance_s) {
        used[i] = true;
        ++hits;
        break;
      }
    }
  }
  s.precision = static_cast<double>(hits) / estimated.size();
  s.recall = static_cast<double>(hits) / reference.size();
  s.f_measure = hits == 0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

struct BassFrame {
  int pitch_class = -1;  // -1 when no pitch
  double confidence = 0.0;
  double loudness_db = -std::numeric_limits<double>::infinity();
};

struct ChordFrame {
  std::uint16_t pitch_classes = 0;  // bit k set when pitch class k is a chord tone
  double loudness_db = -std::numeric_limits<double>::infinity();
};

/// Fraction of gated frames whose bass pitch class is a chord tone. A frame
/// counts when the bass has a pitch with confidence above the threshold and
/// both stems are louder than the gate. Nullopt when no frame survives.
inline std::optional<double> harmonic_match(std::span<const BassFrame> bass,
                                            std::span<const ChordFrame> chords,
                                            double confidence_threshold = 0.75,
                                            double loudness_gate_db = -35.0) {
  if (bass.size() != chords.size()) throw InvalidArgument("bass and chord tracks differ in length");
  std::size_t counted = 0, hits = 0;
  for (std::size_t i = 0; i < bass.size(); ++i) {
    const auto& b = bass[i];
    const auto& c = chords[i];
    if (b.pitch_class < 0 || b.pitch_class > 11) continue;
    if (!(b.confidence > confidence_threshold)) continue;
    if (!(b.loudness_db >= loudness_gate_db) || !(c.loudness_db >= loudness_gate_db)) continue;
    ++counted;
    hits += (c.pitch_classes >> b.pitch_class) & 1u;
  }
  if (counted == 0) return std::nullopt;
  return static_cast<double>(hits) / counted;
}

/// Loudness proxy for symbolic stems: sounding frames sit at 0 dB, silent
/// ones at -inf.
inline constexpr double kSymbolicActiveDb = 0.0;

inline std::vector<BassFrame> symbolic_bass_track(const SymbolicSong& song, int n_frames, double frame_rate) {
  std::vector<BassFrame> out(n_frames);
  auto frame_of = [&](double t) { return static_cast<int>(std::lround(t * frame_rate)); };
  for (std::size_t i = 0; i < song.bass_events.size(); ++i) {
    const auto& e = song.bass_events[i];
    if (!e.active) continue;
    const int f0 = frame_of(e.time);
    const int f1 = i + 1 < song.bass_events.size() ? frame_of(song.bass_events[i + 1].time) : n_frames;
    for (int f = std::max(f0, 0); f < std::min(f1, n_frames); ++f)
      out[f] = {e.pitch_class, 1.0, kSymbolicActiveDb};
  }
  return out;
}

inline std::vector<ChordFrame> symbolic_chord_track(const SymbolicSong& song, int n_frames, double frame_rate) {
  std::vector<ChordFrame> out(n_frames);
  for (const auto& span : song.chords) {
    const int f0 = static_cast<int>(std::lround(span.start * frame_rate));
    const int f1 = static_cast<int>(std::lround(span.end * frame_rate));
    for (int f = std::max(f0, 0); f < std::min(f1, n_frames); ++f)
      out[f] = {span.chord.pitch_classes(), kSymbolicActiveDb};
  }
  return out;
}

/// HAR of a tokenized (default-layout) grid: bass from stream 0, chords as
/// read from the other stem.
inline std::optional<double> harmonic_match(const TokenGrid& grid) {
  const auto song = symbolic_detokenize(grid).song;
  const double fr = grid.layout().frame_rate_hz();
  const auto bass = symbolic_bass_track(song, grid.frames(), fr);
  const auto chords = symbolic_chord_track(song, grid.frames(), fr);
  return harmonic_match(bass, chords);
}

/// Kick and snare onset times, deduplicated within one frame.
inline std::vector<double> symbolic_beats(const SymbolicSong& song, double frame_rate) {
  std::vector<double> out;
  const double frame = 1.0 / frame_rate;
  for (const auto& e : song.drum_events) {
    if (e.cls != DrumClass::kick && e.cls != DrumClass::snare) continue;
    if (!out.empty() && e.time - out.back() < frame - 1e-9) continue;
    out.push_back(e.time);
  }
  return out;
}

inline std::vector<double> symbolic_beats(const TokenGrid& grid) {
  return symbolic_beats(symbolic_detokenize(grid).song, grid.layout().frame_rate_hz());
}

struct PreservationReport {
  /// Token-identical fraction per stream; masked streams included for reference.
  std::vector<double> per_stream;
  std::vector<bool> masked;

  /// Minimum over unmasked streams (1 when every stream is masked).
  double min_unmasked() const {
    double m = 1.0;
    for (std::size_t s = 0; s < per_stream.size(); ++s)
      if (!masked[s]) m = std::min(m, per_stream[s]);
    return m;
  }
};

inline PreservationReport preservation_rate(const TokenGrid& source, const TokenGrid& edited,
                                            const EditPlan& plan) {
  if (!source.layout().same_structure(edited.layout()) || source.frames() != edited.frames())
    throw InvalidArgument("preservation_rate: shape mismatch");
  PreservationReport r;
  r.masked = plan.masked_streams(source.layout());
  r.per_stream.assign(source.n_streams(), 1.0);
  if (source.frames() == 0) return r;
  for (int s = 0; s < source.n_streams(); ++s) {
    int same = 0;
    for (int t = 0; t < source.frames(); ++t) same += source.at(s, t) == edited.at(s, t);
    r.per_stream[s] = static_cast<double>(same) / source.frames();
  }
  return r;
}

}  // namespace stemgen
