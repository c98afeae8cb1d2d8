#pragma once

// Partial delay pattern: stream i is shifted right by its layout delay d_i,
// PAD_DELAY fills the head [0, d_i) and the tail [T + d_i, T + max_d) so that
// every stream of the delayed grid has length T + max_d.

#include <span>
#include <string>
#include <vector>

#include "stemgen/error.hpp"
#include "stemgen/stem_layout.hpp"

namespace stemgen {

/// Shifts rows of a row-major S x T buffer by per-row delays. Generic so the
/// same placement is used for tokens and for per-cell masks.
template <class T>
std::vector<T> shift_rows(std::span<const T> rows, int frames, std::span<const int> delays,
                          const std::vector<T>& pad_per_row) {
  int max_d = 0;
  for (int d : delays) max_d = std::max(max_d, d);
  const int out_frames = frames + max_d;
  const auto n_rows = delays.size();
  std::vector<T> out(n_rows * out_frames);
  for (std::size_t r = 0; r < n_rows; ++r) {
    const int d = delays[r];
    T* dst = out.data() + r * out_frames;
    for (int t = 0; t < out_frames; ++t) dst[t] = pad_per_row[r];
    for (int t = 0; t < frames; ++t) dst[t + d] = rows[r * frames + t];
  }
  return out;
}

inline TokenGrid apply_delay(const TokenGrid& grid) {
  const auto& layout = grid.layout();
  std::vector<Token> pads(layout.n_streams());
  for (int s = 0; s < layout.n_streams(); ++s) pads[s] = layout.special(s, Special::pad_delay);
  auto shifted = shift_rows<Token>(grid.data(), grid.frames(), layout.delays(), pads);
  return TokenGrid(layout, grid.frames() + layout.max_delay(), std::move(shifted));
}

/// Exact inverse of apply_delay. Throws MalformedData when PAD_DELAY sits
/// inside a payload region or a pad cell holds anything else.
inline TokenGrid remove_delay(const TokenGrid& delayed) {
  const auto& layout = delayed.layout();
  const int max_d = layout.max_delay();
  const int frames = delayed.frames() - max_d;
  if (frames < 0) throw MalformedData("delayed grid shorter than its maximum delay");
  TokenGrid out(layout, frames);
  for (int s = 0; s < layout.n_streams(); ++s) {
    const int d = layout.delays()[s];
    const Token pad = layout.special(s, Special::pad_delay);
    for (int t = 0; t < delayed.frames(); ++t) {
      const Token tok = delayed.at(s, t);
      const bool payload = t >= d && t < frames + d;
      if (payload) {
        if (tok == pad)
          throw MalformedData("PAD_DELAY inside payload at (stream " + std::to_string(s) +
                              ", frame " + std::to_string(t) + ")");
        out.at(s, t - d) = tok;
      } else if (tok != pad) {
        throw MalformedData("expected PAD_DELAY at (stream " + std::to_string(s) +
                            ", frame " + std::to_string(t) + ")");
      }
    }
  }
  return out;
}

}  // namespace stemgen
