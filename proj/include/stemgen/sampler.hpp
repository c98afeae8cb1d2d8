#pragma once

// Autoregressive decoding in the delayed domain.
//
// Every cell of the delayed sequence is either fixed (prefix, separator,
// PAD_DELAY), forced (probability 1 on a source token) or sampled from the
// model. Frames are decoded left to right; all cells of a frame are chosen
// from the logits computed on the frames before it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "stemgen/delay_codec.hpp"
#include "stemgen/edit_conditioning.hpp"
#include "stemgen/error.hpp"
#include "stemgen/rvq_codec.hpp"
#include "stemgen/transformer.hpp"

namespace stemgen {

struct DecodeParams {
  double temperature = 1.0;
  int top_k = 250;
  /// Classifier-free guidance scale, applied when a condition is given.
  double cfg_scale = 3.0;
  bool guidance = true;

  void validate() const {
    if (!(temperature > 0.0)) throw InvalidArgument("temperature must be > 0");
    if (top_k < 1) throw InvalidArgument("top_k must be >= 1");
  }
};

enum class EditMode { forced, free };

namespace detail {

enum class CellKind : std::uint8_t { fixed, forced, sampled };

/// Samples a codebook id from `logits[0 .. codebook_size)` (specials never
/// sampled) with temperature and top-k.
template <class Rng>
Token sample_codebook(const std::vector<double>& logits, int codebook_size,
                      const DecodeParams& p, Rng& rng) {
  std::vector<int> order(codebook_size);
  for (int i = 0; i < codebook_size; ++i) order[i] = i;
  const int k = std::min(p.top_k, codebook_size);
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
    return logits[a] > logits[b] || (logits[a] == logits[b] && a < b);
  });
  if (k == 1) return order[0];
  const double mx = logits[order[0]];
  std::vector<double> w(k);
  double z = 0.0;
  for (int i = 0; i < k; ++i) {
    w[i] = std::exp((logits[order[i]] - mx) / p.temperature);
    z += w[i];
  }
  double r = std::uniform_real_distribution<double>(0.0, z)(rng);
  for (int i = 0; i < k; ++i) {
    r -= w[i];
    if (r < 0.0) return order[i];
  }
  return order[0];
}

struct DecodeTask {
  TokenGrid tokens;  // delayed; fixed and forced cells pre-filled
  std::vector<CellKind> kinds;  // S x L'
  std::vector<Segment> segments;
  int condition = kNullCondition;
};

template <class Scalar>
TokenGrid run_decode(const Transformer<Scalar>& model, DecodeTask task, const DecodeParams& params,
                     std::uint64_t seed) {
  params.validate();
  const auto& layout = task.tokens.layout();
  const int n_streams = layout.n_streams();
  const int len = task.tokens.frames();
  if (len > model.config().max_frames)
    throw InvalidArgument("decode length " + std::to_string(len) + " exceeds max_frames " +
                          std::to_string(model.config().max_frames));
  std::mt19937_64 rng(seed);
  const bool guided = params.guidance && task.condition != kNullCondition && params.cfg_scale != 1.0;

  for (int j = 0; j < len; ++j) {
    bool needs_model = false;
    for (int s = 0; s < n_streams; ++s)
      needs_model |= task.kinds[static_cast<std::size_t>(s) * len + j] == CellKind::sampled;
    if (!needs_model) continue;

    std::vector<ModelInput> batch;
    ModelInput in{crop_frames(task.tokens, 0, j + 1),
                  std::vector<Segment>(task.segments.begin(), task.segments.begin() + j + 1),
                  task.condition};
    batch.push_back(in);
    if (guided) {
      in.condition = kNullCondition;
      batch.push_back(std::move(in));
    }
    const auto logits = model.forward(batch);
    for (int s = 0; s < n_streams; ++s) {
      const auto kind = task.kinds[static_cast<std::size_t>(s) * len + j];
      if (kind != CellKind::sampled) continue;
      const int vocab = layout.vocab_size(s);
      std::vector<double> row(vocab);
      for (int v = 0; v < vocab; ++v) {
        const double c = static_cast<double>(logits[s](j, v));
        row[v] = guided ? static_cast<double>(logits[s](j + 1 + j, v)) +
                              params.cfg_scale * (c - static_cast<double>(logits[s](j + 1 + j, v)))
                        : c;
      }
      task.tokens.at(s, j) = sample_codebook(row, layout.codebook_size(s), params, rng);
    }
  }
  return task.tokens;
}

}  // namespace detail

/// Text-to-music (or unconditional, with kNullCondition) generation of
/// `n_frames` frames. The result has the delay removed.
template <class Scalar>
TokenGrid generate(const Transformer<Scalar>& model, int condition, int n_frames,
                   const DecodeParams& params, std::uint64_t seed) {
  params.validate();
  const auto& layout = model.config().layout;
  if (n_frames < 1) throw InvalidArgument("n_frames must be >= 1");
  if (n_frames + layout.max_delay() > model.config().max_frames)
    throw InvalidArgument("n_frames + max delay exceeds max_frames");
  if (condition != kNullCondition && (condition < 0 || condition >= model.config().n_conditions))
    throw InvalidArgument("unknown condition id " + std::to_string(condition));

  detail::DecodeTask task;
  task.tokens = apply_delay(TokenGrid(layout, n_frames, 0));
  const int len = task.tokens.frames();
  task.kinds.assign(static_cast<std::size_t>(layout.n_streams()) * len, detail::CellKind::fixed);
  for (int s = 0; s < layout.n_streams(); ++s)
    for (int t = 0; t < n_frames; ++t)
      task.kinds[static_cast<std::size_t>(s) * len + t + layout.delays()[s]] = detail::CellKind::sampled;
  task.segments.assign(len, Segment::body);
  task.condition = condition;
  return remove_delay(detail::run_decode(model, std::move(task), params, seed));
}

/// Regenerates the masked streams of `source` given its masked prefix. In
/// forced mode unmasked streams are pinned to the source tokens at every
/// step; in free mode every body stream is sampled.
template <class Scalar>
TokenGrid edit(const Transformer<Scalar>& model, const TokenGrid& source, const EditPlan& plan,
               int condition, EditMode mode, const DecodeParams& params, std::uint64_t seed) {
  params.validate();
  const auto& layout = model.config().layout;
  if (!source.layout().same_structure(layout))
    throw LayoutMismatch("edit: source layout does not match the model layout");
  validate_plan(plan, layout);
  if (source.frames() < plan.downsample_factor)
    throw InvalidArgument("edit: source shorter than one downsample group");
  if (condition != kNullCondition && (condition < 0 || condition >= model.config().n_conditions))
    throw InvalidArgument("unknown condition id " + std::to_string(condition));
  require_valid(source);

  const auto masked = plan.masked_streams(layout);
  for (int s = 0; s < layout.n_streams(); ++s) {
    if (masked[s] && mode == EditMode::forced) continue;
    for (int t = 0; t < source.frames(); ++t)
      if (!layout.is_codebook_id(s, source.at(s, t)) && !masked[s])
        throw MalformedData("edit: unmasked source stream " + std::to_string(s) +
                            " holds a special id");
  }

  auto cond = build_conditioning(source, plan);
  detail::DecodeTask task;
  task.tokens = apply_delay(cond.sequence);
  const int len = task.tokens.frames();
  const int body0 = cond.body_offset();
  task.kinds.assign(static_cast<std::size_t>(layout.n_streams()) * len, detail::CellKind::fixed);
  for (int s = 0; s < layout.n_streams(); ++s) {
    const int d = layout.delays()[s];
    const bool pinned = mode == EditMode::forced && !masked[s];
    for (int t = 0; t < source.frames(); ++t) {
      const int j = body0 + t + d;
      auto& kind = task.kinds[static_cast<std::size_t>(s) * len + j];
      if (pinned) {
        kind = detail::CellKind::forced;  // source token already in place
      } else {
        kind = detail::CellKind::sampled;
        task.tokens.at(s, j) = 0;
      }
    }
  }
  task.segments = cond.segments;
  task.segments.resize(len, Segment::body);
  task.condition = condition;
  if (static_cast<int>(cond.sequence.frames()) + layout.max_delay() > model.config().max_frames)
    throw InvalidArgument("edit: prefix + body exceeds max_frames");

  auto decoded = remove_delay(detail::run_decode(model, std::move(task), params, seed));
  return crop_frames(decoded, body0, source.frames());
}

struct ExternalTokens {
  TokenGrid grid;  // absent stems hold MASK
  EditPlan plan;   // masks every absent stem
};

/// Encodes the provided stems with their codecs into a full-layout grid.
inline ExternalTokens tokenize_external(const std::map<std::string, FrameSequence>& stems,
                                        const std::map<std::string, CodebookSet>& codecs,
                                        const LayoutSpec& layout, int downsample_factor = 5) {
  if (stems.empty()) throw InvalidArgument("tokenize_external: no stems provided");
  int frames = -1;
  for (const auto& [name, seq] : stems) {
    if (!layout.find_stem(name)) throw InvalidArgument("tokenize_external: unknown stem '" + name + "'");
    if (frames >= 0 && seq.frames() != frames)
      throw InvalidArgument("tokenize_external: stems differ in length");
    frames = seq.frames();
  }
  if (frames < 1) throw InvalidArgument("tokenize_external: empty frame sequence");

  ExternalTokens out{TokenGrid(layout, frames), {}};
  out.plan.downsample_factor = downsample_factor;
  for (int si = 0; si < layout.n_stems(); ++si) {
    const auto& spec = layout.stems()[si];
    const int first = layout.first_stream(si);
    auto it = stems.find(spec.name);
    if (it == stems.end()) {
      for (int st = 0; st < spec.n_streams; ++st)
        for (int t = 0; t < frames; ++t)
          out.grid.at(first + st, t) = layout.special(first + st, Special::mask);
      out.plan.masked.emplace(spec.name, 1);
      continue;
    }
    auto cb = codecs.find(spec.name);
    if (cb == codecs.end())
      throw InvalidArgument("tokenize_external: missing codebooks for stem '" + spec.name + "'");
    if (cb->second.n_stages() != spec.n_streams || cb->second.codebook_size() != spec.codebook_size)
      throw LayoutMismatch("tokenize_external: codebooks for '" + spec.name +
                           "' do not match the layout");
    auto sub = rvq_encode(it->second, cb->second, spec.name, layout.frame_rate_hz());
    for (int st = 0; st < spec.n_streams; ++st)
      for (int t = 0; t < frames; ++t) out.grid.at(first + st, t) = sub.at(st, t);
  }
  if (out.plan.masked.size() > 2)
    throw InvalidArgument("tokenize_external: at most two stems may be absent");
  validate_plan(out.plan, layout);
  return out;
}

/// Single-stem view of `grid` (e.g. for rvq_decode of one stem).
inline TokenGrid extract_stem(const TokenGrid& grid, const std::string& stem) {
  const auto& layout = grid.layout();
  const auto idx = layout.find_stem(stem);
  if (!idx) throw InvalidArgument("unknown stem '" + stem + "'");
  const auto& spec = layout.stems()[*idx];
  TokenGrid out(make_layout({spec}, layout.frame_rate_hz()), grid.frames());
  for (int st = 0; st < spec.n_streams; ++st)
    for (int t = 0; t < grid.frames(); ++t)
      out.at(st, t) = grid.at(layout.first_stream(*idx) + st, t);
  return out;
}

}  // namespace stemgen
