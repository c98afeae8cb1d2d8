#pragma once

// Decoder-only transformer over S parallel token streams.
//
// Frame t's input is the sum of one embedding per stream of the tokens at
// frame t-1 (BOS at t = 0), a sinusoidal position, a learned segment
// embedding and, at t = 0, the condition embedding. Pre-norm blocks with
// causal multi-head attention and a GELU MLP follow; one linear head per
// stream maps the final state at frame t to logits over that stream's
// vocabulary (codebook ids and specials). Backpropagation is hand written.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stemgen/edit_conditioning.hpp"
#include "stemgen/error.hpp"
#include "stemgen/model_config.hpp"
#include "stemgen/parameters.hpp"
#include "stemgen/stem_layout.hpp"

namespace stemgen {

struct ModelInput {
  TokenGrid tokens;               // delayed domain, S x T
  std::vector<Segment> segments;  // T
  int condition = kNullCondition;
};

struct LossReport {
  double total = 0.0;
  std::vector<double> per_stream;      // mean CE per stream (NaN if no cells)
  std::vector<std::size_t> per_stream_cells;
  std::size_t cells = 0;
};

/// Mean cross-entropy over cells with mask != 0. `logits[s]` holds one row
/// per (sequence, frame), `targets[b]`/`masks[b]` are S x T row-major. When
/// `dlogits` is given it receives d(total)/d(logits).
template <class Scalar>
LossReport cross_entropy(const std::vector<RowMatrix<Scalar>>& logits,
                         const std::vector<const TokenGrid*>& targets,
                         const std::vector<const std::vector<std::uint8_t>*>& masks,
                         std::vector<RowMatrix<Scalar>>* dlogits = nullptr) {
  const int n_streams = static_cast<int>(logits.size());
  const int batch = static_cast<int>(targets.size());
  if (batch == 0 || masks.size() != targets.size())
    throw InvalidArgument("cross_entropy: batch shape mismatch");
  const int frames = targets[0]->frames();
  LossReport rep;
  rep.per_stream.assign(n_streams, 0.0);
  rep.per_stream_cells.assign(n_streams, 0);
  for (int s = 0; s < n_streams; ++s) {
    if (logits[s].rows() != static_cast<Eigen::Index>(batch) * frames)
      throw InvalidArgument("cross_entropy: logits rows do not match batch x frames");
  }
  for (int b = 0; b < batch; ++b) {
    if (targets[b]->frames() != frames || targets[b]->n_streams() != n_streams ||
        masks[b]->size() != static_cast<std::size_t>(n_streams) * frames)
      throw InvalidArgument("cross_entropy: target/mask shape mismatch");
    for (auto m : *masks[b]) rep.cells += m != 0;
  }
  if (rep.cells == 0) throw InvalidArgument("cross_entropy: empty loss mask");

  if (dlogits) {
    dlogits->resize(n_streams);
    for (int s = 0; s < n_streams; ++s) (*dlogits)[s].setZero(logits[s].rows(), logits[s].cols());
  }
  const double inv_cells = 1.0 / static_cast<double>(rep.cells);
  for (int s = 0; s < n_streams; ++s) {
    const auto& L = logits[s];
    const int vocab = static_cast<int>(L.cols());
    for (int b = 0; b < batch; ++b) {
      for (int t = 0; t < frames; ++t) {
        if (!(*masks[b])[static_cast<std::size_t>(s) * frames + t]) continue;
        const Token target = targets[b]->at(s, t);
        if (target < 0 || target >= vocab)
          throw InvalidArgument("cross_entropy: target outside head vocabulary");
        const Eigen::Index row = static_cast<Eigen::Index>(b) * frames + t;
        const double mx = static_cast<double>(L.row(row).maxCoeff());
        double z = 0.0;
        for (int v = 0; v < vocab; ++v) z += std::exp(static_cast<double>(L(row, v)) - mx);
        const double lse = mx + std::log(z);
        const double ce = lse - static_cast<double>(L(row, target));
        rep.total += ce;
        rep.per_stream[s] += ce;
        ++rep.per_stream_cells[s];
        if (dlogits) {
          auto& D = (*dlogits)[s];
          for (int v = 0; v < vocab; ++v)
            D(row, v) = static_cast<Scalar>(std::exp(static_cast<double>(L(row, v)) - lse) * inv_cells);
          D(row, target) -= static_cast<Scalar>(inv_cells);
        }
      }
    }
  }
  rep.total *= inv_cells;
  for (int s = 0; s < n_streams; ++s)
    rep.per_stream[s] = rep.per_stream_cells[s]
                            ? rep.per_stream[s] / static_cast<double>(rep.per_stream_cells[s])
                            : std::numeric_limits<double>::quiet_NaN();
  return rep;
}

template <class Scalar>
class Transformer {
 public:
  using Mat = RowMatrix<Scalar>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  struct InitOptions {
    double stddev = 0.02;
    /// Zero heads give a uniform distribution over every stream vocabulary.
    bool zero_heads = true;
  };

  explicit Transformer(ModelConfig config) : cfg_(std::move(config)) {
    cfg_.validate();
    build_parameters();
    build_positions();
  }

  const ModelConfig& config() const { return cfg_; }
  ParameterSet<Scalar>& parameters() { return params_; }
  const ParameterSet<Scalar>& parameters() const { return params_; }

  void initialize(std::uint64_t seed, InitOptions opts = {}) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, opts.stddev);
    const double out_scale = 1.0 / std::sqrt(2.0 * cfg_.n_layers);
    for (const auto& info : params_.infos()) {
      auto m = params_.mat(params_.id(info.name));
      const auto& n = info.name;
      auto ends_with = [&](const char* suffix) {
        const std::string s(suffix);
        return n.size() >= s.size() && n.compare(n.size() - s.size(), s.size(), s) == 0;
      };
      if (ends_with(".g")) {
        m.setOnes();
      } else if (ends_with(".b") || ends_with("bqkv") || ends_with("bo") || ends_with("b1") ||
                 ends_with("b2")) {
        m.setZero();
      } else if (n.rfind("head.", 0) == 0 && opts.zero_heads) {
        m.setZero();
      } else {
        const double scale = (ends_with("wo") || ends_with("w2")) ? out_scale : 1.0;
        for (Eigen::Index i = 0; i < m.size(); ++i)
          m.data()[i] = static_cast<Scalar>(normal(rng) * scale);
      }
    }
  }

  /// Embedding row for `condition_id`; the learned NULL row when dropout is
  /// active or the id is kNullCondition.
  RowVec condition_embed(int condition_id, bool dropout_active) const {
    check_condition(condition_id);
    const int row = (dropout_active || condition_id == kNullCondition) ? cfg_.n_conditions
                                                                       : condition_id;
    return params_.mat(cond_emb_).row(row);
  }

  /// Input embeddings (T x d) of one sequence.
  Mat input_embeddings(const ModelInput& in) const {
    check_input(in);
    Mat x;
    embed({in}, x);
    return x;
  }

  /// Per-stream logits, one row per (sequence, frame): row b * T + t.
  std::vector<Mat> forward(const std::vector<ModelInput>& batch) const {
    Cache cache;
    return run_forward(batch, cache, false);
  }

  /// Forward pass plus loss; accumulates d(loss)/d(params) into `grad`
  /// (resized and zeroed by the caller or here when empty).
  LossReport loss_and_gradient(const std::vector<ModelInput>& batch,
                               const std::vector<const std::vector<std::uint8_t>*>& masks,
                               ParamVector<Scalar>& grad) const {
    Cache cache;
    auto logits = run_forward(batch, cache, true);
    std::vector<const TokenGrid*> targets;
    for (const auto& in : batch) targets.push_back(&in.tokens);
    std::vector<Mat> dlogits;
    auto rep = cross_entropy(logits, targets, masks, &dlogits);
    if (grad.size() != params_.size()) grad.assign(params_.size(), Scalar(0));
    backward(batch, cache, dlogits, grad);
    return rep;
  }

  LossReport loss(const std::vector<ModelInput>& batch,
                  const std::vector<const std::vector<std::uint8_t>*>& masks) const {
    auto logits = forward(batch);
    std::vector<const TokenGrid*> targets;
    for (const auto& in : batch) targets.push_back(&in.tokens);
    return cross_entropy(logits, targets, masks);
  }

 private:
  struct LayerIds {
    std::size_t ln1_g, ln1_b, wqkv, bqkv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
  };

  struct LayerCache {
    Mat xhat1, h1, qkv, attn, xhat2, h2, u, act;
    Vec rstd1, rstd2;
    std::vector<Mat> probs;  // per (sequence, head)
  };

  struct Cache {
    int batch = 0;
    int frames = 0;
    std::vector<LayerCache> layers;
    Mat xhatf, hf;
    Vec rstdf;
  };

  static constexpr double kLnEps = 1e-5;

  void build_parameters() {
    const int d = cfg_.d_model;
    const int ff = d * cfg_.ff_mult;
    const auto& layout = cfg_.layout;
    for (int s = 0; s < layout.n_streams(); ++s)
      tok_emb_.push_back(params_.add("tok_emb." + std::to_string(s), layout.vocab_size(s), d));
    seg_emb_ = params_.add("seg_emb", kNumSegments, d);
    cond_emb_ = params_.add("cond_emb", cfg_.n_conditions + 1, d);
    for (int l = 0; l < cfg_.n_layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      LayerIds ids{};
      ids.ln1_g = params_.add(p + "ln1.g", 1, d);
      ids.ln1_b = params_.add(p + "ln1.b", 1, d);
      ids.wqkv = params_.add(p + "attn.wqkv", d, 3 * d);
      ids.bqkv = params_.add(p + "attn.bqkv", 1, 3 * d);
      ids.wo = params_.add(p + "attn.wo", d, d);
      ids.bo = params_.add(p + "attn.bo", 1, d);
      ids.ln2_g = params_.add(p + "ln2.g", 1, d);
      ids.ln2_b = params_.add(p + "ln2.b", 1, d);
      ids.w1 = params_.add(p + "ff.w1", d, ff);
      ids.b1 = params_.add(p + "ff.b1", 1, ff);
      ids.w2 = params_.add(p + "ff.w2", ff, d);
      ids.b2 = params_.add(p + "ff.b2", 1, d);
      layers_.push_back(ids);
    }
    lnf_g_ = params_.add("lnf.g", 1, d);
    lnf_b_ = params_.add("lnf.b", 1, d);
    for (int s = 0; s < layout.n_streams(); ++s) {
      head_w_.push_back(params_.add("head." + std::to_string(s) + ".w", d, layout.vocab_size(s)));
      head_b_.push_back(params_.add("head." + std::to_string(s) + ".b", 1, layout.vocab_size(s)));
    }
  }

  void build_positions() {
    const int d = cfg_.d_model;
    // Prefix positions can reach factor * (max_frames / factor); cover max_frames.
    positions_.resize(cfg_.max_frames + 1, d);
    for (int p = 0; p <= cfg_.max_frames; ++p)
      for (int k = 0; k < d / 2; ++k) {
        const double freq = std::pow(10000.0, -2.0 * k / d);
        positions_(p, 2 * k) = static_cast<Scalar>(std::sin(p * freq));
        positions_(p, 2 * k + 1) = static_cast<Scalar>(std::cos(p * freq));
      }
  }

  void check_condition(int c) const {
    if (c != kNullCondition && (c < 0 || c >= cfg_.n_conditions))
      throw InvalidArgument("unknown condition id " + std::to_string(c));
  }

  void check_input(const ModelInput& in) const {
    if (!in.tokens.layout().same_structure(cfg_.layout))
      throw LayoutMismatch("model input layout does not match the model layout");
    if (in.tokens.frames() > cfg_.max_frames)
      throw InvalidArgument("sequence of " + std::to_string(in.tokens.frames()) +
                            " frames exceeds max_frames " + std::to_string(cfg_.max_frames));
    if (in.segments.size() != static_cast<std::size_t>(in.tokens.frames()))
      throw InvalidArgument("one segment flag per frame required");
    check_condition(in.condition);
    const auto& layout = cfg_.layout;
    for (int s = 0; s < layout.n_streams(); ++s)
      for (int t = 0; t < in.tokens.frames(); ++t) {
        const Token tok = in.tokens.at(s, t);
        if (tok < 0 || tok >= layout.vocab_size(s))
          throw MalformedData("model input token outside stream vocabulary");
      }
  }

  void embed(const std::vector<ModelInput>& batch, Mat& x) const {
    const int frames = batch[0].tokens.frames();
    const int d = cfg_.d_model;
    const auto& layout = cfg_.layout;
    x.setZero(static_cast<Eigen::Index>(batch.size()) * frames, d);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& in = batch[b];
      const auto pos = segment_positions(in.segments, cfg_.downsample_factor);
      for (int t = 0; t < frames; ++t) {
        auto row = x.row(static_cast<Eigen::Index>(b) * frames + t);
        row += positions_.row(std::min(pos[t], cfg_.max_frames));
        row += params_.mat(seg_emb_).row(static_cast<int>(in.segments[t]));
        for (int s = 0; s < layout.n_streams(); ++s) {
          const Token tok = t == 0 ? layout.special(s, Special::bos) : in.tokens.at(s, t - 1);
          row += params_.mat(tok_emb_[s]).row(tok);
        }
        if (t == 0) row += condition_embed(in.condition, false);
      }
    }
  }

  static void layer_norm(const Mat& x, const Eigen::Map<const Mat>& g,
                         const Eigen::Map<const Mat>& beta, Mat& xhat, Vec& rstd, Mat& y) {
    const Eigen::Index n = x.rows(), d = x.cols();
    xhat.resize(n, d);
    rstd.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar mean = x.row(i).mean();
      const Scalar var = (x.row(i).array() - mean).square().mean();
      rstd(i) = Scalar(1) / std::sqrt(var + Scalar(kLnEps));
      xhat.row(i) = (x.row(i).array() - mean) * rstd(i);
    }
    y = (xhat.array().rowwise() * g.row(0).array()).rowwise() + beta.row(0).array();
  }

  // dy -> dx; accumulates dgamma, dbeta.
  static Mat layer_norm_backward(const Mat& dy, const Mat& xhat, const Vec& rstd,
                                 const Eigen::Map<const Mat>& g, Eigen::Map<Mat> dg,
                                 Eigen::Map<Mat> db) {
    dg.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
    db.row(0) += dy.colwise().sum();
    Mat dxhat = dy.array().rowwise() * g.row(0).array();
    Mat dx(dy.rows(), dy.cols());
    const Scalar inv_d = Scalar(1) / static_cast<Scalar>(dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
      const Scalar m1 = dxhat.row(i).sum() * inv_d;
      const Scalar m2 = dxhat.row(i).dot(xhat.row(i)) * inv_d;
      dx.row(i) = rstd(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2).matrix();
    }
    return dx;
  }

  static Scalar gelu(Scalar u) {
    const Scalar c = static_cast<Scalar>(0.7978845608028654);
    return Scalar(0.5) * u * (Scalar(1) + std::tanh(c * (u + Scalar(0.044715) * u * u * u)));
  }
  static Scalar gelu_grad(Scalar u) {
    const Scalar c = static_cast<Scalar>(0.7978845608028654);
    const Scalar th = std::tanh(c * (u + Scalar(0.044715) * u * u * u));
    return Scalar(0.5) * (Scalar(1) + th) +
           Scalar(0.5) * u * (Scalar(1) - th * th) * c * (Scalar(1) + Scalar(3 * 0.044715) * u * u);
  }

  std::vector<Mat> run_forward(const std::vector<ModelInput>& batch, Cache& cache,
                               bool keep) const {
    if (batch.empty()) throw InvalidArgument("forward: empty batch");
    const int frames = batch[0].tokens.frames();
    for (const auto& in : batch) {
      check_input(in);
      if (in.tokens.frames() != frames)
        throw InvalidArgument("forward: all sequences in a batch need equal length");
    }
    const int d = cfg_.d_model;
    const int heads = cfg_.n_heads;
    const int dh = d / heads;
    const int nb = static_cast<int>(batch.size());
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    cache.batch = nb;
    cache.frames = frames;
    cache.layers.assign(keep ? cfg_.n_layers : 0, LayerCache{});

    Mat x;
    embed(batch, x);
    LayerCache scratch;
    for (int l = 0; l < cfg_.n_layers; ++l) {
      const auto& ids = layers_[l];
      LayerCache& c = keep ? cache.layers[l] : scratch;
      layer_norm(x, params_.mat(ids.ln1_g), params_.mat(ids.ln1_b), c.xhat1, c.rstd1, c.h1);
      c.qkv.noalias() = c.h1 * params_.mat(ids.wqkv);
      c.qkv.rowwise() += params_.mat(ids.bqkv).row(0);
      c.attn.setZero(x.rows(), d);
      if (keep) c.probs.assign(static_cast<std::size_t>(nb) * heads, Mat());
      Mat scores(frames, frames);
      for (int b = 0; b < nb; ++b) {
        const Eigen::Index r0 = static_cast<Eigen::Index>(b) * frames;
        for (int h = 0; h < heads; ++h) {
          auto q = c.qkv.block(r0, h * dh, frames, dh);
          auto k = c.qkv.block(r0, d + h * dh, frames, dh);
          auto v = c.qkv.block(r0, 2 * d + h * dh, frames, dh);
          scores.noalias() = (q * k.transpose()) * scale;
          for (int i = 0; i < frames; ++i) {
            const Scalar mx = scores.row(i).head(i + 1).maxCoeff();
            Scalar z = 0;
            for (int j = 0; j <= i; ++j) {
              const Scalar e = std::exp(scores(i, j) - mx);
              scores(i, j) = e;
              z += e;
            }
            scores.row(i).head(i + 1) /= z;
            for (int j = i + 1; j < frames; ++j) scores(i, j) = Scalar(0);
          }
          c.attn.block(r0, h * dh, frames, dh).noalias() = scores * v;
          if (keep) c.probs[static_cast<std::size_t>(b) * heads + h] = scores;
        }
      }
      Mat a = c.attn * params_.mat(ids.wo);
      a.rowwise() += params_.mat(ids.bo).row(0);
      x += a;
      layer_norm(x, params_.mat(ids.ln2_g), params_.mat(ids.ln2_b), c.xhat2, c.rstd2, c.h2);
      c.u.noalias() = c.h2 * params_.mat(ids.w1);
      c.u.rowwise() += params_.mat(ids.b1).row(0);
      c.act = c.u.unaryExpr([](Scalar v) { return gelu(v); });
      Mat f = c.act * params_.mat(ids.w2);
      f.rowwise() += params_.mat(ids.b2).row(0);
      x += f;
    }
    Mat xhatf, hf;
    Vec rstdf;
    layer_norm(x, params_.mat(lnf_g_), params_.mat(lnf_b_), xhatf, rstdf, hf);
    std::vector<Mat> logits(cfg_.layout.n_streams());
    for (int s = 0; s < cfg_.layout.n_streams(); ++s) {
      logits[s].noalias() = hf * params_.mat(head_w_[s]);
      logits[s].rowwise() += params_.mat(head_b_[s]).row(0);
    }
    if (keep) {
      cache.xhatf = std::move(xhatf);
      cache.hf = std::move(hf);
      cache.rstdf = std::move(rstdf);
    }
    return logits;
  }

  void backward(const std::vector<ModelInput>& batch, const Cache& cache,
                const std::vector<Mat>& dlogits, ParamVector<Scalar>& grad) const {
    const int d = cfg_.d_model;
    const int heads = cfg_.n_heads;
    const int dh = d / heads;
    const int frames = cache.frames;
    const int nb = cache.batch;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    const auto& layout = cfg_.layout;
    auto G = [&](std::size_t id) { return params_.mat(id, grad); };

    Mat dhf = Mat::Zero(cache.hf.rows(), d);
    for (int s = 0; s < layout.n_streams(); ++s) {
      G(head_w_[s]).noalias() += cache.hf.transpose() * dlogits[s];
      G(head_b_[s]).row(0) += dlogits[s].colwise().sum();
      dhf.noalias() += dlogits[s] * params_.mat(head_w_[s]).transpose();
    }
    Mat dx = layer_norm_backward(dhf, cache.xhatf, cache.rstdf, params_.mat(lnf_g_), G(lnf_g_),
                                 G(lnf_b_));

    Mat dscores(frames, frames);
    for (int l = cfg_.n_layers - 1; l >= 0; --l) {
      const auto& ids = layers_[l];
      const auto& c = cache.layers[l];
      // MLP
      G(ids.w2).noalias() += c.act.transpose() * dx;
      G(ids.b2).row(0) += dx.colwise().sum();
      Mat du = dx * params_.mat(ids.w2).transpose();
      for (Eigen::Index i = 0; i < du.size(); ++i) du.data()[i] *= gelu_grad(c.u.data()[i]);
      G(ids.w1).noalias() += c.h2.transpose() * du;
      G(ids.b1).row(0) += du.colwise().sum();
      Mat dh2 = du * params_.mat(ids.w1).transpose();
      dx += layer_norm_backward(dh2, c.xhat2, c.rstd2, params_.mat(ids.ln2_g), G(ids.ln2_g),
                                G(ids.ln2_b));
      // attention
      G(ids.wo).noalias() += c.attn.transpose() * dx;
      G(ids.bo).row(0) += dx.colwise().sum();
      Mat dattn = dx * params_.mat(ids.wo).transpose();
      Mat dqkv = Mat::Zero(c.qkv.rows(), 3 * d);
      for (int b = 0; b < nb; ++b) {
        const Eigen::Index r0 = static_cast<Eigen::Index>(b) * frames;
        for (int h = 0; h < heads; ++h) {
          const Mat& p = c.probs[static_cast<std::size_t>(b) * heads + h];
          auto q = c.qkv.block(r0, h * dh, frames, dh);
          auto k = c.qkv.block(r0, d + h * dh, frames, dh);
          auto v = c.qkv.block(r0, 2 * d + h * dh, frames, dh);
          auto dout = dattn.block(r0, h * dh, frames, dh);
          dqkv.block(r0, 2 * d + h * dh, frames, dh).noalias() = p.transpose() * dout;
          dscores.noalias() = dout * v.transpose();
          for (int i = 0; i < frames; ++i) {
            const Scalar dot = dscores.row(i).head(i + 1).dot(p.row(i).head(i + 1));
            for (int j = 0; j <= i; ++j) dscores(i, j) = p(i, j) * (dscores(i, j) - dot) * scale;
            for (int j = i + 1; j < frames; ++j) dscores(i, j) = Scalar(0);
          }
          dqkv.block(r0, h * dh, frames, dh).noalias() = dscores * k;
          dqkv.block(r0, d + h * dh, frames, dh).noalias() = dscores.transpose() * q;
        }
      }
      G(ids.wqkv).noalias() += c.h1.transpose() * dqkv;
      G(ids.bqkv).row(0) += dqkv.colwise().sum();
      Mat dh1 = dqkv * params_.mat(ids.wqkv).transpose();
      dx += layer_norm_backward(dh1, c.xhat1, c.rstd1, params_.mat(ids.ln1_g), G(ids.ln1_g),
                                G(ids.ln1_b));
    }

    // embeddings
    for (int b = 0; b < nb; ++b) {
      const auto& in = batch[b];
      for (int t = 0; t < frames; ++t) {
        auto row = dx.row(static_cast<Eigen::Index>(b) * frames + t);
        G(seg_emb_).row(static_cast<int>(in.segments[t])) += row;
        for (int s = 0; s < layout.n_streams(); ++s) {
          const Token tok = t == 0 ? layout.special(s, Special::bos) : in.tokens.at(s, t - 1);
          G(tok_emb_[s]).row(tok) += row;
        }
        if (t == 0) {
          const int crow = in.condition == kNullCondition ? cfg_.n_conditions : in.condition;
          G(cond_emb_).row(crow) += row;
        }
      }
    }
  }

  ModelConfig cfg_;
  ParameterSet<Scalar> params_;
  Mat positions_;
  std::vector<std::size_t> tok_emb_;
  std::size_t seg_emb_ = 0;
  std::size_t cond_emb_ = 0;
  std::vector<LayerIds> layers_;
  std::size_t lnf_g_ = 0, lnf_b_ = 0;
  std::vector<std::size_t> head_w_, head_b_;
};

}  // namespace stemgen
