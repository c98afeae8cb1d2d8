#pragma once

// Toy residual vector quantizer: stage s quantizes the residual left by
// stages 1..s-1 against its own codebook. Encoding is deterministic with ties
// resolved to the lowest code id.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stemgen/error.hpp"
#include "stemgen/stem_layout.hpp"

namespace stemgen {

/// T x dim real matrix, row-major.
struct FrameSequence {
  int dim = 0;
  std::vector<double> values;

  FrameSequence() = default;
  FrameSequence(int frames, int d) : dim(d), values(static_cast<std::size_t>(frames) * d, 0.0) {}

  int frames() const { return dim == 0 ? 0 : static_cast<int>(values.size() / dim); }
  std::span<double> frame(int t) { return {values.data() + static_cast<std::size_t>(t) * dim, static_cast<std::size_t>(dim)}; }
  std::span<const double> frame(int t) const {
    return {values.data() + static_cast<std::size_t>(t) * dim, static_cast<std::size_t>(dim)};
  }
};

/// n_stages x codebook_size x dim codewords.
class CodebookSet {
 public:
  CodebookSet() = default;
  CodebookSet(int n_stages, int codebook_size, int dim)
      : n_stages_(n_stages), codebook_size_(codebook_size), dim_(dim),
        values_(static_cast<std::size_t>(n_stages) * codebook_size * dim, 0.0) {
    if (n_stages < 1 || codebook_size < 2 || dim < 1)
      throw InvalidArgument("codebook set needs n_stages>=1, codebook_size>=2, dim>=1");
  }

  int n_stages() const { return n_stages_; }
  int codebook_size() const { return codebook_size_; }
  int dim() const { return dim_; }

  std::span<double> codeword(int stage, int code) {
    return {values_.data() + offset(stage, code), static_cast<std::size_t>(dim_)};
  }
  std::span<const double> codeword(int stage, int code) const {
    return {values_.data() + offset(stage, code), static_cast<std::size_t>(dim_)};
  }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  bool operator==(const CodebookSet&) const = default;

 private:
  std::size_t offset(int stage, int code) const {
    return (static_cast<std::size_t>(stage) * codebook_size_ + code) * dim_;
  }

  int n_stages_ = 0;
  int codebook_size_ = 0;
  int dim_ = 0;
  std::vector<double> values_;
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

inline int nearest_code(const CodebookSet& cb, int stage, std::span<const double> x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < cb.codebook_size(); ++k) {
    const double d = sq_dist(x, cb.codeword(stage, k));
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

}  // namespace detail

/// Encodes frames into an n_stages-stream single-stem grid.
inline TokenGrid rvq_encode(const FrameSequence& frames, const CodebookSet& codebooks,
                            const std::string& stem_name = "stem", double frame_rate = 50.0) {
  if (frames.frames() == 0) throw InvalidArgument("rvq_encode: empty frame sequence");
  if (frames.dim != codebooks.dim())
    throw InvalidArgument("rvq_encode: frame dim " + std::to_string(frames.dim) +
                          " != codebook dim " + std::to_string(codebooks.dim()));
  auto layout = make_layout({{stem_name, codebooks.n_stages(), codebooks.codebook_size()}},
                            frame_rate);
  TokenGrid grid(layout, frames.frames());
  std::vector<double> residual(frames.dim);
  for (int t = 0; t < frames.frames(); ++t) {
    auto f = frames.frame(t);
    residual.assign(f.begin(), f.end());
    for (int s = 0; s < codebooks.n_stages(); ++s) {
      const int code = detail::nearest_code(codebooks, s, residual);
      grid.at(s, t) = code;
      auto cw = codebooks.codeword(s, code);
      for (int i = 0; i < frames.dim; ++i) residual[i] -= cw[i];
    }
  }
  return grid;
}

/// Sums codewords of the first `n_stages_used` stages (all stages by default).
inline FrameSequence rvq_decode(const TokenGrid& grid, const CodebookSet& codebooks,
                                int n_stages_used = -1) {
  if (grid.n_streams() != codebooks.n_stages())
    throw LayoutMismatch("rvq_decode: grid has " + std::to_string(grid.n_streams()) +
                         " streams, codebooks have " + std::to_string(codebooks.n_stages()) +
                         " stages");
  if (n_stages_used < 0) n_stages_used = codebooks.n_stages();
  if (n_stages_used > codebooks.n_stages())
    throw InvalidArgument("rvq_decode: more stages requested than available");
  FrameSequence out(grid.frames(), codebooks.dim());
  for (int t = 0; t < grid.frames(); ++t) {
    auto dst = out.frame(t);
    for (int s = 0; s < n_stages_used; ++s) {
      const Token code = grid.at(s, t);
      if (code < 0 || code >= codebooks.codebook_size())
        throw MalformedData("rvq_decode: non-codebook token " + std::to_string(code) +
                            " at (stream " + std::to_string(s) + ", frame " +
                            std::to_string(t) + "); strip special ids first");
      auto cw = codebooks.codeword(s, code);
      for (int i = 0; i < codebooks.dim(); ++i) dst[i] += cw[i];
    }
  }
  return out;
}

/// Mean squared error per element between two equally shaped sequences.
inline double frame_mse(const FrameSequence& a, const FrameSequence& b) {
  if (a.dim != b.dim || a.values.size() != b.values.size())
    throw InvalidArgument("frame_mse: shape mismatch");
  if (a.values.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.values.size());
}

struct CodecFit {
  CodebookSet codebooks;
  /// Training reconstruction MSE after stages 1..s.
  std::vector<double> stage_mse;
  bool degenerate = false;
  std::vector<std::string> warnings;
};

struct KMeansOptions {
  int iterations = 10;
};

namespace detail {

// k-means++ seeding followed by Lloyd iterations. When `pin_zero` is set,
// centroid 0 is fixed at the origin so a stage can never increase the
// per-frame residual norm.
inline bool kmeans_stage(const std::vector<double>& points, int n, int dim, int k,
                         bool pin_zero, std::mt19937_64& rng, const KMeansOptions& opts,
                         std::span<double> centroids) {
  auto point = [&](int i) {
    return std::span<const double>(points.data() + static_cast<std::size_t>(i) * dim, dim);
  };
  auto centroid = [&](int c) {
    return std::span<double>(centroids.data() + static_cast<std::size_t>(c) * dim, dim);
  };

  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  auto refresh = [&](int c) {
    auto cw = centroid(c);
    for (int i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(point(i), cw));
  };

  int start = 0;
  if (pin_zero) {
    std::fill(centroid(0).begin(), centroid(0).end(), 0.0);
    refresh(0);
    start = 1;
  } else {
    std::uniform_int_distribution<int> pick(0, n - 1);
    auto p = point(pick(rng));
    std::copy(p.begin(), p.end(), centroid(0).begin());
    refresh(0);
    start = 1;
  }
  bool degenerate = false;
  for (int c = start; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    int chosen = 0;
    if (total <= 0.0) {
      degenerate = true;
      chosen = -1;
    } else {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      chosen = n - 1;
      for (int i = 0; i < n; ++i) {
        r -= d2[i];
        if (r < 0.0) {
          chosen = i;
          break;
        }
      }
    }
    if (chosen < 0) {
      auto src = centroid(0);
      std::copy(src.begin(), src.end(), centroid(c).begin());
    } else {
      auto p = point(chosen);
      std::copy(p.begin(), p.end(), centroid(c).begin());
    }
    refresh(c);
  }

  std::vector<int> assign(n, 0);
  std::vector<double> sums(static_cast<std::size_t>(k) * dim);
  std::vector<int> counts(k);
  for (int it = 0; it < opts.iterations; ++it) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = sq_dist(point(i), centroid(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      assign[i] = best;
      ++counts[best];
      auto p = point(i);
      for (int j = 0; j < dim; ++j) sums[static_cast<std::size_t>(best) * dim + j] += p[j];
    }
    for (int c = pin_zero ? 1 : 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      auto cw = centroid(c);
      for (int j = 0; j < dim; ++j)
        cw[j] = sums[static_cast<std::size_t>(c) * dim + j] / counts[c];
    }
  }
  return degenerate;
}

}  // namespace detail

/// Stage-wise k-means on successive residuals. Deterministic given seed.
inline CodecFit fit_codebooks(const FrameSequence& training, int n_stages, int codebook_size,
                              std::uint64_t seed, KMeansOptions opts = {}) {
  const int n = training.frames();
  const int dim = training.dim;
  if (n_stages < 1) throw InvalidArgument("fit_codebooks: n_stages must be >= 1");
  if (codebook_size < 2) throw InvalidArgument("fit_codebooks: codebook_size must be >= 2");
  if (n < codebook_size)
    throw InvalidArgument("fit_codebooks: need at least codebook_size (" +
                          std::to_string(codebook_size) + ") frames, got " +
                          std::to_string(n));
  for (double v : training.values)
    if (!std::isfinite(v)) throw InvalidArgument("fit_codebooks: non-finite training frame");

  CodecFit fit{CodebookSet(n_stages, codebook_size, dim), {}, false, {}};
  std::mt19937_64 rng(seed);
  std::vector<double> residual = training.values;
  for (int s = 0; s < n_stages; ++s) {
    std::span<double> stage_cw(fit.codebooks.values().data() +
                                   static_cast<std::size_t>(s) * codebook_size * dim,
                               static_cast<std::size_t>(codebook_size) * dim);
    const bool degenerate =
        detail::kmeans_stage(residual, n, dim, codebook_size, s > 0, rng, opts, stage_cw);
    if (degenerate && s == 0) {
      fit.degenerate = true;
      fit.warnings.push_back("stage 1: fewer distinct frames than codewords; "
                             "duplicate codewords used (single-cluster fallback)");
    }
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
      std::span<double> r(residual.data() + static_cast<std::size_t>(i) * dim, dim);
      const int code = detail::nearest_code(fit.codebooks, s, r);
      auto cw = fit.codebooks.codeword(s, code);
      for (int j = 0; j < dim; ++j) {
        r[j] -= cw[j];
        sq += r[j] * r[j];
      }
    }
    fit.stage_mse.push_back(sq / (static_cast<double>(n) * dim));
  }
  return fit;
}

// Codebook file: "SGCB" magic, then u32 version, n_stages, codebook_size, dim,
// then n_stages*codebook_size*dim little-endian float64 values, row-major.
inline constexpr std::uint32_t kCodebookFormatVersion = 1;

inline void save_codebooks(const std::string& path, const CodebookSet& cb) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os.write("SGCB", 4);
  const std::uint32_t header[4] = {kCodebookFormatVersion,
                                   static_cast<std::uint32_t>(cb.n_stages()),
                                   static_cast<std::uint32_t>(cb.codebook_size()),
                                   static_cast<std::uint32_t>(cb.dim())};
  os.write(reinterpret_cast<const char*>(header), sizeof(header));
  os.write(reinterpret_cast<const char*>(cb.values().data()),
           static_cast<std::streamsize>(cb.values().size() * sizeof(double)));
  if (!os) throw IoError("write failed for " + path);
}

inline CodebookSet load_codebooks(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[4];
  std::uint32_t header[4];
  is.read(magic, 4);
  is.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!is || std::memcmp(magic, "SGCB", 4) != 0) throw MalformedData(path + ": not a codebook file");
  if (header[0] != kCodebookFormatVersion) throw MalformedData(path + ": unsupported codebook version");
  CodebookSet cb(static_cast<int>(header[1]), static_cast<int>(header[2]),
                 static_cast<int>(header[3]));
  is.read(reinterpret_cast<char*>(cb.values().data()),
          static_cast<std::streamsize>(cb.values().size() * sizeof(double)));
  if (!is) throw MalformedData(path + ": truncated codebook payload");
  for (double v : cb.values())
    if (!std::isfinite(v)) throw MalformedData(path + ": non-finite codeword");
  return cb;
}

}  // namespace stemgen
