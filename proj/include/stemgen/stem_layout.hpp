#pragma once

// Multi-stem, multi-stream token grid data model.
//
// A layout is an ordered list of stems; each stem owns one or more streams
// (RVQ stages). Streams are flattened in stem order, then stage order. Each
// stream has its own vocabulary: dense codebook ids in [0, codebook_size)
// followed by four reserved ids (PAD_DELAY, MASK, SEP, BOS).

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "stemgen/error.hpp"

namespace stemgen {

using Token = std::int32_t;

enum class Special : int { pad_delay = 0, mask = 1, sep = 2, bos = 3 };
inline constexpr int kNumSpecials = 4;

struct StemSpec {
  std::string name;
  int n_streams = 1;
  int codebook_size = 64;

  bool operator==(const StemSpec&) const = default;
};

enum class DelayRule {
  /// First stage of every stem undelayed, residual stages delayed 1..k.
  residual_stages,
  /// No delay anywhere.
  none,
};

struct StreamRef {
  std::string stem;
  int stage = 1;  // 1-based

  bool operator==(const StreamRef&) const = default;
};

class LayoutSpec {
 public:
  LayoutSpec() = default;

  const std::vector<StemSpec>& stems() const { return stems_; }
  double frame_rate_hz() const { return frame_rate_hz_; }
  const std::vector<int>& delays() const { return delays_; }

  int n_streams() const { return static_cast<int>(delays_.size()); }
  int n_stems() const { return static_cast<int>(stems_.size()); }
  int max_delay() const {
    return delays_.empty() ? 0 : *std::max_element(delays_.begin(), delays_.end());
  }

  int codebook_size(int stream) const { return stems_[stem_of_[stream]].codebook_size; }
  int vocab_size(int stream) const { return codebook_size(stream) + kNumSpecials; }
  Token special(int stream, Special s) const {
    return codebook_size(stream) + static_cast<int>(s);
  }
  bool is_special(int stream, Token t) const {
    return t >= codebook_size(stream) && t < vocab_size(stream);
  }
  bool is_codebook_id(int stream, Token t) const {
    return t >= 0 && t < codebook_size(stream);
  }

  /// Index of the stem owning `stream`.
  int stem_of(int stream) const { return stem_of_[stream]; }
  /// 1-based RVQ stage of `stream` within its stem.
  int stage_of(int stream) const { return stage_of_[stream]; }
  /// First flattened stream of stem `stem_idx`.
  int first_stream(int stem_idx) const { return first_stream_[stem_idx]; }

  std::optional<int> find_stem(const std::string& name) const {
    for (int i = 0; i < n_stems(); ++i)
      if (stems_[i].name == name) return i;
    return std::nullopt;
  }

  /// Same structure, ignoring frame rate (a downsampled grid keeps its
  /// structure but annotates a lower effective rate).
  bool same_structure(const LayoutSpec& o) const {
    return stems_ == o.stems_ && delays_ == o.delays_;
  }

  LayoutSpec with_frame_rate(double hz) const {
    LayoutSpec copy = *this;
    copy.frame_rate_hz_ = hz;
    return copy;
  }

  bool operator==(const LayoutSpec& o) const {
    return stems_ == o.stems_ && delays_ == o.delays_ &&
           frame_rate_hz_ == o.frame_rate_hz_;
  }

  friend LayoutSpec make_layout_with_delays(std::vector<StemSpec>, double,
                                            std::vector<int>);

 private:
  std::vector<StemSpec> stems_;
  double frame_rate_hz_ = 50.0;
  std::vector<int> delays_;
  std::vector<int> stem_of_;
  std::vector<int> stage_of_;
  std::vector<int> first_stream_;
};

namespace detail {

inline void check_stem_specs(const std::vector<StemSpec>& specs, double frame_rate) {
  if (specs.empty()) throw InvalidArgument("layout needs at least one stem");
  if (!(frame_rate > 0.0)) throw InvalidArgument("frame rate must be positive");
  std::set<std::string> names;
  for (const auto& s : specs) {
    if (s.name.empty()) throw InvalidArgument("stem name must not be empty");
    if (!names.insert(s.name).second)
      throw InvalidArgument("duplicate stem name '" + s.name + "'");
    if (s.n_streams < 1)
      throw InvalidArgument("stem '" + s.name + "' has zero streams");
    if (s.codebook_size < 2)
      throw InvalidArgument("stem '" + s.name + "' has codebook_size < 2");
  }
}

}  // namespace detail

/// Layout with explicit per-stream delays (any non-negative values).
inline LayoutSpec make_layout_with_delays(std::vector<StemSpec> specs, double frame_rate,
                                          std::vector<int> delays) {
  detail::check_stem_specs(specs, frame_rate);
  LayoutSpec out;
  out.stems_ = std::move(specs);
  out.frame_rate_hz_ = frame_rate;
  for (int si = 0; si < static_cast<int>(out.stems_.size()); ++si) {
    out.first_stream_.push_back(static_cast<int>(out.stem_of_.size()));
    for (int st = 1; st <= out.stems_[si].n_streams; ++st) {
      out.stem_of_.push_back(si);
      out.stage_of_.push_back(st);
    }
  }
  if (delays.size() != out.stem_of_.size())
    throw InvalidArgument("expected one delay per stream");
  for (int d : delays)
    if (d < 0) throw InvalidArgument("delays must be non-negative");
  out.delays_ = std::move(delays);
  return out;
}

inline LayoutSpec make_layout(std::vector<StemSpec> specs, double frame_rate = 50.0,
                              DelayRule rule = DelayRule::residual_stages) {
  detail::check_stem_specs(specs, frame_rate);
  std::vector<int> delays;
  for (const auto& s : specs)
    for (int st = 1; st <= s.n_streams; ++st)
      delays.push_back(rule == DelayRule::residual_stages ? st - 1 : 0);
  return make_layout_with_delays(std::move(specs), frame_rate, std::move(delays));
}

/// bass:1, drums:1, other:4 at 50 Hz with residual-stage delays [0,0,0,1,2,3].
inline LayoutSpec default_layout(int codebook_size = 64, double frame_rate = 50.0) {
  return make_layout({{"bass", 1, codebook_size},
                      {"drums", 1, codebook_size},
                      {"other", 4, codebook_size}},
                     frame_rate);
}

inline int stream_index(const LayoutSpec& layout, const std::string& stem, int stage) {
  auto idx = layout.find_stem(stem);
  if (!idx) throw InvalidArgument("unknown stem '" + stem + "'");
  const int n = layout.stems()[*idx].n_streams;
  if (stage < 1 || stage > n)
    throw InvalidArgument("stage " + std::to_string(stage) + " out of range for stem '" +
                          stem + "' (1.." + std::to_string(n) + ")");
  return layout.first_stream(*idx) + stage - 1;
}

inline StreamRef stream_ref(const LayoutSpec& layout, int stream) {
  if (stream < 0 || stream >= layout.n_streams())
    throw InvalidArgument("stream index " + std::to_string(stream) + " out of range");
  return {layout.stems()[layout.stem_of(stream)].name, layout.stage_of(stream)};
}

/// S parallel token streams over T frames, row-major (stream, frame).
class TokenGrid {
 public:
  TokenGrid() = default;
  TokenGrid(LayoutSpec layout, int frames, Token fill = 0)
      : layout_(std::move(layout)),
        frames_(frames),
        tokens_(static_cast<std::size_t>(layout_.n_streams()) * std::max(frames, 0), fill) {
    if (frames < 0) throw InvalidArgument("frame count must be non-negative");
  }
  TokenGrid(LayoutSpec layout, int frames, std::vector<Token> tokens)
      : layout_(std::move(layout)), frames_(frames), tokens_(std::move(tokens)) {
    if (frames < 0 ||
        tokens_.size() != static_cast<std::size_t>(layout_.n_streams()) * frames)
      throw InvalidArgument("token buffer does not match S x T");
  }

  const LayoutSpec& layout() const { return layout_; }
  int n_streams() const { return layout_.n_streams(); }
  int frames() const { return frames_; }

  Token at(int stream, int frame) const { return tokens_[index(stream, frame)]; }
  Token& at(int stream, int frame) { return tokens_[index(stream, frame)]; }

  const std::vector<Token>& data() const { return tokens_; }
  std::vector<Token> stream(int s) const {
    auto b = tokens_.begin() + static_cast<std::ptrdiff_t>(s) * frames_;
    return {b, b + frames_};
  }

  bool operator==(const TokenGrid& o) const {
    return frames_ == o.frames_ && layout_ == o.layout_ && tokens_ == o.tokens_;
  }

 private:
  std::size_t index(int stream, int frame) const {
    return static_cast<std::size_t>(stream) * frames_ + frame;
  }

  LayoutSpec layout_;
  int frames_ = 0;
  std::vector<Token> tokens_;
};

struct GridViolation {
  int stream = -1;
  int frame = -1;
  Token token = 0;
  std::string reason;
};

struct GridReport {
  bool ok = true;
  std::optional<GridViolation> first;
  std::size_t n_violations = 0;
};

/// Checks every token is a codebook id or a declared special for its stream.
/// Never throws.
inline GridReport validate_grid(const TokenGrid& grid) {
  GridReport report;
  const auto& layout = grid.layout();
  if (grid.data().size() != static_cast<std::size_t>(grid.n_streams()) * grid.frames()) {
    report.ok = false;
    report.n_violations = 1;
    report.first = GridViolation{-1, -1, 0, "token buffer size does not match S x T"};
    return report;
  }
  for (int s = 0; s < grid.n_streams(); ++s) {
    for (int t = 0; t < grid.frames(); ++t) {
      Token tok = grid.at(s, t);
      if (layout.is_codebook_id(s, tok) || layout.is_special(s, tok)) continue;
      if (!report.first)
        report.first = GridViolation{s, t, tok, "token outside codebook and special ids"};
      report.ok = false;
      ++report.n_violations;
    }
  }
  return report;
}

inline void require_valid(const TokenGrid& grid) {
  auto r = validate_grid(grid);
  if (!r.ok)
    throw MalformedData("invalid token grid at (stream " + std::to_string(r.first->stream) +
                        ", frame " + std::to_string(r.first->frame) + "): " +
                        r.first->reason);
}

}  // namespace stemgen
