#pragma once

// Masked-prefix conditioning for stem editing.
//
// An editing sequence is [prefix | SEP | body]: the prefix is the body
// subsampled by `downsample_factor` with the masked streams replaced by MASK,
// one separator frame follows, and the body is the full-rate grid the model
// learns to (re)generate. Loss is taken on body cells only.

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "stemgen/delay_codec.hpp"
#include "stemgen/error.hpp"
#include "stemgen/stem_layout.hpp"

namespace stemgen {

enum class Segment : std::uint8_t { body = 0, prefix = 1, separator = 2 };
inline constexpr int kNumSegments = 3;

struct EditPlan {
  /// Masked stem -> first masked stage (1-based). Stages [first, n_streams]
  /// are masked, so 1 masks the whole stem.
  std::map<std::string, int> masked;
  int downsample_factor = 5;

  bool empty() const { return masked.empty(); }

  std::vector<std::string> masked_stems() const {
    std::vector<std::string> out;
    for (const auto& [stem, first] : masked) out.push_back(stem);
    return out;
  }

  /// Masked stage numbers of `stem` in descending order, e.g. {4, 3}.
  std::vector<int> masked_stages(const LayoutSpec& layout, const std::string& stem) const {
    std::vector<int> out;
    auto it = masked.find(stem);
    if (it == masked.end()) return out;
    const int n = layout.stems()[layout.find_stem(stem).value()].n_streams;
    for (int st = n; st >= it->second; --st) out.push_back(st);
    return out;
  }

  std::vector<bool> masked_streams(const LayoutSpec& layout) const {
    std::vector<bool> out(layout.n_streams(), false);
    for (const auto& [stem, first] : masked) {
      const auto idx = layout.find_stem(stem);
      if (!idx) throw InvalidArgument("edit plan references unknown stem '" + stem + "'");
      const int n = layout.stems()[*idx].n_streams;
      for (int st = first; st <= n; ++st) out[stream_index(layout, stem, st)] = true;
    }
    return out;
  }

  bool operator==(const EditPlan&) const = default;
};

/// Throws InvalidArgument for unknown stems or bad stage ranges. Training
/// plans must mask one or two stems.
inline void validate_plan(const EditPlan& plan, const LayoutSpec& layout, bool training = false) {
  if (plan.downsample_factor < 1) throw InvalidArgument("downsample factor must be >= 1");
  for (const auto& [stem, first] : plan.masked) {
    const auto idx = layout.find_stem(stem);
    if (!idx) throw InvalidArgument("edit plan references unknown stem '" + stem + "'");
    const int n = layout.stems()[*idx].n_streams;
    if (first < 1 || first > n)
      throw InvalidArgument("masked stage range for '" + stem + "' is out of bounds");
  }
  if (training && (plan.masked.empty() || plan.masked.size() > 2))
    throw InvalidArgument("training edit plans mask 1 or 2 stems");
}

/// Parses a CLI mask argument: "drums", "other", "other:3-4" or "other:4".
/// The stage range must be a suffix ending at the stem's last stage.
inline std::pair<std::string, int> parse_mask_arg(const std::string& arg, const LayoutSpec& layout) {
  const auto colon = arg.find(':');
  const std::string stem = arg.substr(0, colon);
  const auto idx = layout.find_stem(stem);
  if (!idx) throw InvalidArgument("--mask: unknown stem '" + stem + "'");
  const int n = layout.stems()[*idx].n_streams;
  if (colon == std::string::npos) return {stem, 1};
  const std::string range = arg.substr(colon + 1);
  int lo = 0, hi = 0;
  try {
    const auto dash = range.find('-');
    if (dash == std::string::npos) {
      lo = hi = std::stoi(range);
    } else {
      lo = std::stoi(range.substr(0, dash));
      hi = std::stoi(range.substr(dash + 1));
    }
  } catch (const std::exception&) {
    throw InvalidArgument("--mask: cannot parse stage range '" + range + "'");
  }
  if (lo < 1 || lo > hi || hi > n)
    throw InvalidArgument("--mask: stage range '" + range + "' out of bounds for '" + stem + "'");
  if (hi != n)
    throw InvalidArgument("--mask: stage range must end at the last stage (" + std::to_string(n) +
                          ") of '" + stem + "'");
  return {stem, lo};
}

inline EditPlan plan_from_mask_args(const std::vector<std::string>& args, const LayoutSpec& layout,
                                    int downsample_factor = 5) {
  EditPlan plan;
  plan.downsample_factor = downsample_factor;
  for (const auto& a : args) {
    auto [stem, first] = parse_mask_arg(a, layout);
    auto [it, inserted] = plan.masked.emplace(stem, first);
    if (!inserted) it->second = std::min(it->second, first);
  }
  validate_plan(plan, layout);
  return plan;
}

/// Uniform stem count in {1, 2}, uniform stems without replacement, and for
/// multi-stream stems a uniform choice among the stage suffixes.
template <class Rng>
EditPlan sample_edit_plan(Rng& rng, const LayoutSpec& layout, int downsample_factor = 5) {
  EditPlan plan;
  plan.downsample_factor = downsample_factor;
  const int n_stems = layout.n_stems();
  const int count = std::min(n_stems, 1 + static_cast<int>(std::uniform_int_distribution<int>(0, 1)(rng)));
  std::vector<int> order(n_stems);
  for (int i = 0; i < n_stems; ++i) order[i] = i;
  for (int i = 0; i < count; ++i) {
    const int j = std::uniform_int_distribution<int>(i, n_stems - 1)(rng);
    std::swap(order[i], order[j]);
    const auto& stem = layout.stems()[order[i]];
    const int first = stem.n_streams == 1
                          ? 1
                          : std::uniform_int_distribution<int>(1, stem.n_streams)(rng);
    plan.masked.emplace(stem.name, first);
  }
  return plan;
}

/// Keeps frames 0, f, 2f, ...; output length floor(T / f) at rate / f.
inline TokenGrid downsample_grid(const TokenGrid& grid, int factor) {
  if (factor < 1) throw InvalidArgument("downsample factor must be >= 1");
  if (factor > grid.frames())
    throw InvalidArgument("downsample factor " + std::to_string(factor) + " exceeds grid length " +
                          std::to_string(grid.frames()));
  const int out_frames = grid.frames() / factor;
  TokenGrid out(grid.layout().with_frame_rate(grid.layout().frame_rate_hz() / factor), out_frames);
  for (int s = 0; s < grid.n_streams(); ++s)
    for (int k = 0; k < out_frames; ++k) out.at(s, k) = grid.at(s, k * factor);
  return out;
}

/// Prefix, separator and body concatenated in the undelayed domain.
struct ConditioningSequence {
  TokenGrid prefix;
  TokenGrid body;
  /// S x L tokens of [prefix | SEP | body], L = prefix.T + 1 + body.T.
  TokenGrid sequence;
  /// S x L, row-major; 1 on body cells.
  std::vector<std::uint8_t> loss_mask;
  std::vector<Segment> segments;

  int prefix_frames() const { return prefix.frames(); }
  int body_offset() const { return prefix.frames() + 1; }
};

inline ConditioningSequence build_conditioning(const TokenGrid& body, const EditPlan& plan) {
  const auto& layout = body.layout();
  validate_plan(plan, layout);
  const auto masked = plan.masked_streams(layout);

  ConditioningSequence out;
  out.prefix = downsample_grid(body, plan.downsample_factor);
  for (int s = 0; s < layout.n_streams(); ++s)
    if (masked[s])
      for (int k = 0; k < out.prefix.frames(); ++k)
        out.prefix.at(s, k) = layout.special(s, Special::mask);
  out.body = body;

  const int p = out.prefix.frames();
  const int len = p + 1 + body.frames();
  out.sequence = TokenGrid(layout, len);
  out.loss_mask.assign(static_cast<std::size_t>(layout.n_streams()) * len, 0);
  for (int s = 0; s < layout.n_streams(); ++s) {
    for (int k = 0; k < p; ++k) out.sequence.at(s, k) = out.prefix.at(s, k);
    out.sequence.at(s, p) = layout.special(s, Special::sep);
    for (int t = 0; t < body.frames(); ++t) {
      out.sequence.at(s, p + 1 + t) = body.at(s, t);
      out.loss_mask[static_cast<std::size_t>(s) * len + p + 1 + t] = 1;
    }
  }
  out.segments.assign(len, Segment::body);
  std::fill(out.segments.begin(), out.segments.begin() + p, Segment::prefix);
  out.segments[p] = Segment::separator;
  return out;
}

/// A model-ready example in the delayed domain.
struct TrainingExample {
  TokenGrid tokens;                    // S x L', delayed
  std::vector<std::uint8_t> loss_mask;  // S x L', PAD_DELAY cells are 0
  std::vector<Segment> segments;       // L'
  bool is_edit = false;
  EditPlan plan;
};

/// Applies the delay pattern to tokens and loss mask of an undelayed
/// sequence; segment flags follow the undelayed frame index and the tail is
/// flagged as body.
inline TrainingExample delay_sequence(const TokenGrid& tokens, const std::vector<std::uint8_t>& mask,
                                      const std::vector<Segment>& segments) {
  const auto& layout = tokens.layout();
  TrainingExample ex;
  ex.tokens = apply_delay(tokens);
  ex.loss_mask = shift_rows<std::uint8_t>(mask, tokens.frames(), layout.delays(),
                                          std::vector<std::uint8_t>(layout.n_streams(), 0));
  ex.segments = segments;
  ex.segments.resize(ex.tokens.frames(), Segment::body);
  return ex;
}

struct EditingConfig {
  double p_edit = 0.5;
  int downsample_factor = 5;
  /// Plain text-to-music crop (30 s at 50 Hz).
  int plain_crop_frames = 1500;
  /// Editing crop (25 s at 50 Hz); its prefix is edit_crop / factor frames.
  int edit_crop_frames = 1250;
};

inline TokenGrid crop_frames(const TokenGrid& grid, int start, int frames) {
  if (start < 0 || frames < 0 || start + frames > grid.frames())
    throw InvalidArgument("crop of " + std::to_string(frames) + " frames at " +
                          std::to_string(start) + " does not fit a grid of " +
                          std::to_string(grid.frames()) + " frames");
  TokenGrid out(grid.layout(), frames);
  for (int s = 0; s < grid.n_streams(); ++s)
    for (int t = 0; t < frames; ++t) out.at(s, t) = grid.at(s, start + t);
  return out;
}

/// With probability p_edit builds an editing example from the first
/// edit_crop_frames frames, otherwise a plain example from the first
/// plain_crop_frames frames. The result is delayed.
template <class Rng>
TrainingExample assemble_training_example(const TokenGrid& grid, Rng& rng,
                                          const EditingConfig& cfg = {}) {
  if (cfg.p_edit < 0.0 || cfg.p_edit > 1.0) throw InvalidArgument("p_edit must lie in [0, 1]");
  if (grid.frames() < cfg.downsample_factor)
    throw InvalidArgument("grid shorter than one downsample group");
  const bool edit = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.p_edit;
  if (edit) {
    if (grid.frames() < cfg.edit_crop_frames)
      throw InvalidArgument("grid too short for the editing crop (" +
                            std::to_string(cfg.edit_crop_frames) + " frames)");
    auto plan = sample_edit_plan(rng, grid.layout(), cfg.downsample_factor);
    auto cond = build_conditioning(crop_frames(grid, 0, cfg.edit_crop_frames), plan);
    auto ex = delay_sequence(cond.sequence, cond.loss_mask, cond.segments);
    ex.is_edit = true;
    ex.plan = std::move(plan);
    return ex;
  }
  if (grid.frames() < cfg.plain_crop_frames)
    throw InvalidArgument("grid too short for the plain crop (" +
                          std::to_string(cfg.plain_crop_frames) + " frames)");
  auto body = crop_frames(grid, 0, cfg.plain_crop_frames);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(body.n_streams()) * body.frames(), 1);
  return delay_sequence(body, mask, std::vector<Segment>(body.frames(), Segment::body));
}

/// Position index of each frame: body frames count up from 0, prefix frame k
/// sits at k * factor (the body frame it was sampled from), the separator at
/// the end of the prefix timeline.
inline std::vector<int> segment_positions(const std::vector<Segment>& segments, int factor) {
  std::vector<int> pos(segments.size());
  int body = 0, prefix = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    switch (segments[i]) {
      case Segment::prefix: pos[i] = factor * prefix++; break;
      case Segment::separator: pos[i] = factor * prefix; break;
      case Segment::body: pos[i] = body++; break;
    }
  }
  return pos;
}

}  // namespace stemgen
