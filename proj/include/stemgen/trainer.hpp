#pragma once

// Training loop: batch assembly (plain or editing examples), delayed
// sequences, cross-entropy, global-norm clipping and AdamW under a
// warmup + cosine schedule. Runs are bit-reproducible for a given seed.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stemgen/checkpoint.hpp"
#include "stemgen/edit_conditioning.hpp"
#include "stemgen/error.hpp"
#include "stemgen/model_config.hpp"
#include "stemgen/optimizer.hpp"
#include "stemgen/synth_data.hpp"
#include "stemgen/transformer.hpp"

namespace stemgen {

struct OptimizationConfig {
  std::int64_t steps = 20000;
  int batch_size = 32;
  double lr = 1e-4;
  std::int64_t warmup_steps = 500;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
  int precision = 32;
  std::int64_t log_every = 50;
  std::int64_t eval_every = 1000;
  std::int64_t checkpoint_every = 1000;
};

struct DataConfig {
  /// Held-out songs scored at each periodic evaluation (0 = all).
  int eval_songs = 200;
};

struct TrainConfig {
  ModelConfig model;
  DataConfig data;
  OptimizationConfig optimization;
  EditingConfig editing{0.5, 5, 60, 50};
};

inline nlohmann::json to_json(const TrainConfig& c) {
  auto model = to_json(c.model);
  model.erase("layout");
  const auto& o = c.optimization;
  return {{"model", model},
          {"data", {{"eval_songs", c.data.eval_songs}}},
          {"optimization",
           {{"steps", o.steps},
            {"batch_size", o.batch_size},
            {"lr", o.lr},
            {"warmup_steps", o.warmup_steps},
            {"weight_decay", o.weight_decay},
            {"beta1", o.beta1},
            {"beta2", o.beta2},
            {"grad_clip", o.grad_clip},
            {"seed", o.seed},
            {"precision", o.precision},
            {"log_every", o.log_every},
            {"eval_every", o.eval_every},
            {"checkpoint_every", o.checkpoint_every}}},
          {"editing",
           {{"p_edit", c.editing.p_edit},
            {"downsample_factor", c.editing.downsample_factor},
            {"plain_crop_frames", c.editing.plain_crop_frames},
            {"edit_crop_frames", c.editing.edit_crop_frames}}}};
}

/// Unknown keys are rejected so typos do not silently fall back to defaults.
inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  static const std::map<std::string, std::vector<std::string>> known = {
      {"model", {"d_model", "n_layers", "n_heads", "ff_mult", "n_conditions", "condition_dropout",
                 "max_frames", "downsample_factor"}},
      {"data", {"eval_songs"}},
      {"optimization", {"steps", "batch_size", "lr", "warmup_steps", "weight_decay", "beta1", "beta2",
                        "grad_clip", "seed", "precision", "log_every", "eval_every", "checkpoint_every"}},
      {"editing", {"p_edit", "downsample_factor", "plain_crop_frames", "edit_crop_frames"}}};
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto k = known.find(it.key());
    if (k == known.end()) throw InvalidArgument("config: unknown section '" + it.key() + "'");
    for (auto f = it->begin(); f != it->end(); ++f)
      if (std::find(k->second.begin(), k->second.end(), f.key()) == k->second.end())
        throw InvalidArgument("config: unknown key '" + it.key() + "." + f.key() + "'");
  }
  TrainConfig c;
  if (j.contains("model")) {
    const auto& m = j.at("model");
    c.model.d_model = m.value("d_model", c.model.d_model);
    c.model.n_layers = m.value("n_layers", c.model.n_layers);
    c.model.n_heads = m.value("n_heads", c.model.n_heads);
    c.model.ff_mult = m.value("ff_mult", c.model.ff_mult);
    c.model.n_conditions = m.value("n_conditions", c.model.n_conditions);
    c.model.condition_dropout = m.value("condition_dropout", c.model.condition_dropout);
    c.model.max_frames = m.value("max_frames", c.model.max_frames);
    c.model.downsample_factor = m.value("downsample_factor", c.model.downsample_factor);
  }
  if (j.contains("data")) c.data.eval_songs = j.at("data").value("eval_songs", c.data.eval_songs);
  if (j.contains("optimization")) {
    const auto& o = j.at("optimization");
    auto& d = c.optimization;
    d.steps = o.value("steps", d.steps);
    d.batch_size = o.value("batch_size", d.batch_size);
    d.lr = o.value("lr", d.lr);
    d.warmup_steps = o.value("warmup_steps", d.warmup_steps);
    d.weight_decay = o.value("weight_decay", d.weight_decay);
    d.beta1 = o.value("beta1", d.beta1);
    d.beta2 = o.value("beta2", d.beta2);
    d.grad_clip = o.value("grad_clip", d.grad_clip);
    d.seed = o.value("seed", d.seed);
    d.precision = o.value("precision", d.precision);
    d.log_every = o.value("log_every", d.log_every);
    d.eval_every = o.value("eval_every", d.eval_every);
    d.checkpoint_every = o.value("checkpoint_every", d.checkpoint_every);
  }
  if (j.contains("editing")) {
    const auto& e = j.at("editing");
    c.editing.p_edit = e.value("p_edit", c.editing.p_edit);
    c.editing.downsample_factor = e.value("downsample_factor", c.editing.downsample_factor);
    c.editing.plain_crop_frames = e.value("plain_crop_frames", c.editing.plain_crop_frames);
    c.editing.edit_crop_frames = e.value("edit_crop_frames", c.editing.edit_crop_frames);
  }
  if (c.optimization.precision != 32 && c.optimization.precision != 64)
    throw InvalidArgument("config: precision must be 32 or 64");
  if (c.optimization.steps < 1 || c.optimization.batch_size < 1)
    throw InvalidArgument("config: steps and batch_size must be positive");
  if (c.editing.downsample_factor != c.model.downsample_factor)
    throw InvalidArgument("config: editing.downsample_factor must equal model.downsample_factor");
  return c;
}

/// Entropy (nats) of the empirical token distribution of each stream.
inline std::vector<double> unigram_entropy(const std::vector<const TokenGrid*>& grids) {
  if (grids.empty()) throw InvalidArgument("unigram_entropy: no grids");
  const int n_streams = grids[0]->n_streams();
  std::vector<double> out(n_streams, 0.0);
  for (int s = 0; s < n_streams; ++s) {
    std::map<Token, std::size_t> counts;
    std::size_t total = 0;
    for (const auto* g : grids)
      for (int t = 0; t < g->frames(); ++t) {
        ++counts[g->at(s, t)];
        ++total;
      }
    for (const auto& [tok, n] : counts) {
      const double p = static_cast<double>(n) / total;
      out[s] -= p * std::log(p);
    }
  }
  return out;
}

struct HeldoutReport {
  std::vector<double> per_stream_ce;
  std::vector<double> unigram;
  double mean_ce = 0.0;
  std::size_t songs = 0;
};

/// Plain (non-editing) per-stream cross-entropy of the first `crop` frames
/// of each song, conditioned on the song's condition id.
template <class Scalar>
HeldoutReport evaluate_heldout(const Transformer<Scalar>& model,
                               const std::vector<const DatasetEntry*>& songs, int crop,
                               int batch_size = 32) {
  if (songs.empty()) throw InvalidArgument("evaluate_heldout: empty split");
  const auto& layout = model.config().layout;
  const int n_streams = layout.n_streams();
  HeldoutReport rep;
  rep.per_stream_ce.assign(n_streams, 0.0);
  std::vector<std::size_t> cells(n_streams, 0);
  std::vector<TokenGrid> crops;
  for (const auto* e : songs) crops.push_back(crop_frames(e->tokens, 0, crop));
  for (std::size_t i0 = 0; i0 < songs.size(); i0 += batch_size) {
    const std::size_t i1 = std::min(songs.size(), i0 + batch_size);
    std::vector<ModelInput> batch;
    std::vector<std::vector<std::uint8_t>> masks;
    for (std::size_t i = i0; i < i1; ++i) {
      std::vector<std::uint8_t> m(static_cast<std::size_t>(n_streams) * crop, 1);
      auto ex = delay_sequence(crops[i], m, std::vector<Segment>(crop, Segment::body));
      batch.push_back({std::move(ex.tokens), std::move(ex.segments), songs[i]->condition});
      masks.push_back(std::move(ex.loss_mask));
    }
    std::vector<const std::vector<std::uint8_t>*> mptr;
    for (const auto& m : masks) mptr.push_back(&m);
    const auto r = model.loss(batch, mptr);
    for (int s = 0; s < n_streams; ++s) {
      rep.per_stream_ce[s] += r.per_stream[s] * r.per_stream_cells[s];
      cells[s] += r.per_stream_cells[s];
    }
  }
  double total = 0.0;
  std::size_t all = 0;
  for (int s = 0; s < n_streams; ++s) {
    total += rep.per_stream_ce[s];
    all += cells[s];
    rep.per_stream_ce[s] /= static_cast<double>(cells[s]);
  }
  rep.mean_ce = total / static_cast<double>(all);
  std::vector<const TokenGrid*> ptrs;
  for (const auto& c : crops) ptrs.push_back(&c);
  rep.unigram = unigram_entropy(ptrs);
  rep.songs = songs.size();
  return rep;
}

struct StepRecord {
  std::int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  std::vector<double> per_stream;
};

struct TrainOptions {
  /// Stop (and checkpoint) after this step, keeping the full schedule.
  std::optional<std::int64_t> stop_after;
  /// Continue from this checkpoint (must carry optimizer state).
  std::optional<std::string> resume_from;
  bool quiet = false;
  std::function<void(const StepRecord&)> on_step;
};

template <class Scalar>
struct TrainResult {
  ModelCheckpoint<Scalar> checkpoint;
  std::vector<StepRecord> history;
  std::optional<HeldoutReport> last_eval;
};

namespace detail {

template <class Scalar>
std::vector<std::uint8_t> weight_decay_mask(const ParameterSet<Scalar>& params) {
  std::vector<std::uint8_t> mask(params.size(), 0);
  for (const auto& info : params.infos()) {
    const auto& n = info.name;
    const bool matrix = n.ends_with(".w") || n.ends_with("wqkv") || n.ends_with("wo") ||
                        n.ends_with("w1") || n.ends_with("w2");
    if (matrix) std::fill(mask.begin() + info.offset, mask.begin() + info.offset + info.size(), 1);
  }
  return mask;
}

/// Pads every example to the longest one with PAD_DELAY frames (mask 0).
inline void pad_batch(std::vector<TrainingExample>& batch) {
  int longest = 0;
  for (const auto& ex : batch) longest = std::max(longest, ex.tokens.frames());
  for (auto& ex : batch) {
    const int len = ex.tokens.frames();
    if (len == longest) continue;
    const auto& layout = ex.tokens.layout();
    TokenGrid g(layout, longest);
    std::vector<std::uint8_t> m(static_cast<std::size_t>(layout.n_streams()) * longest, 0);
    for (int s = 0; s < layout.n_streams(); ++s)
      for (int t = 0; t < longest; ++t) {
        g.at(s, t) = t < len ? ex.tokens.at(s, t) : layout.special(s, Special::pad_delay);
        if (t < len) m[static_cast<std::size_t>(s) * longest + t] = ex.loss_mask[static_cast<std::size_t>(s) * len + t];
      }
    ex.tokens = std::move(g);
    ex.loss_mask = std::move(m);
    ex.segments.resize(longest, Segment::body);
  }
}

inline std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void rng_from_string(std::mt19937_64& rng, const std::string& s) {
  std::istringstream is(s);
  is >> rng;
  if (!is) throw MalformedData("checkpoint: bad rng state");
}

}  // namespace detail

struct BatchDraw {
  std::vector<TrainingExample> examples;  // padded to a common length
  std::vector<int> conditions;            // kNullCondition where dropped
  std::size_t dropped = 0;
};

/// Samples songs uniformly with replacement, applies condition dropout and
/// assembles (plain or editing) examples.
template <class Rng>
BatchDraw draw_batch(const std::vector<const DatasetEntry*>& songs, int batch_size, double condition_dropout,
                     const EditingConfig& editing, Rng& rng) {
  if (songs.empty()) throw InvalidArgument("draw_batch: no songs");
  std::bernoulli_distribution drop(condition_dropout);
  std::uniform_int_distribution<std::size_t> pick(0, songs.size() - 1);
  BatchDraw out;
  for (int b = 0; b < batch_size; ++b) {
    const auto* song = songs[pick(rng)];
    const bool dropped = drop(rng);
    out.dropped += dropped;
    out.conditions.push_back(dropped ? kNullCondition : song->condition);
    out.examples.push_back(assemble_training_example(song->tokens, rng, editing));
  }
  detail::pad_batch(out.examples);
  return out;
}

/// Trains on the dataset's train split. Writes metrics.jsonl and
/// checkpoint.sgck under `out_dir` when it is non-empty.
template <class Scalar>
TrainResult<Scalar> train(const TrainConfig& config, const Dataset& dataset, const std::string& out_dir,
                          const TrainOptions& options = {}) {
  namespace fs = std::filesystem;
  ModelConfig mc = config.model;
  mc.layout = dataset.layout;
  mc.validate();
  const auto& opt = config.optimization;
  const int seq_len = std::max(config.editing.plain_crop_frames,
                               config.editing.edit_crop_frames / config.editing.downsample_factor + 1 +
                                   config.editing.edit_crop_frames) +
                      mc.layout.max_delay();
  if (seq_len > mc.max_frames) throw InvalidArgument("training sequences exceed max_frames");

  const auto train_split = dataset.split(Split::train);
  auto val_split = dataset.split(Split::validation);
  if (train_split.empty()) throw InvalidArgument("dataset has no training songs");
  if (config.data.eval_songs > 0 && val_split.size() > static_cast<std::size_t>(config.data.eval_songs))
    val_split.resize(config.data.eval_songs);
  for (const auto* e : train_split) {
    if (e->condition < 0 || e->condition >= mc.n_conditions)
      throw LayoutMismatch("dataset condition ids exceed model n_conditions");
  }

  TrainResult<Scalar> result{ModelCheckpoint<Scalar>{Transformer<Scalar>(mc), AdamWState<Scalar>{}, 0, {}, {}},
                             {}, std::nullopt};
  auto& ck = result.checkpoint;
  std::mt19937_64 rng(opt.seed);
  if (options.resume_from) {
    ck = load_checkpoint<Scalar>(*options.resume_from);
    if (!ck.model.config().layout.same_structure(mc.layout))
      throw LayoutMismatch("resume checkpoint layout differs from dataset layout");
    if (!ck.optimizer) ck.optimizer = AdamWState<Scalar>{};
    detail::rng_from_string(rng, ck.rng_state);
  } else {
    ck.model.initialize(opt.seed);
    ck.rng_state = detail::rng_to_string(rng);
  }
  ck.extra["train_config"] = to_json(config);

  std::ofstream log;
  std::string ck_path;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    log.open(fs::path(out_dir) / "metrics.jsonl", std::ios::app);
    if (!log) throw IoError("cannot open metrics log in " + out_dir);
    ck_path = (fs::path(out_dir) / "checkpoint.sgck").string();
  }
  auto emit = [&](const nlohmann::json& j) {
    if (log) log << j.dump() << '\n' << std::flush;
  };

  AdamWOptions adam{opt.lr, opt.beta1, opt.beta2, 1e-8, opt.weight_decay};
  const auto decay = detail::weight_decay_mask(ck.model.parameters());
  const auto& model_cfg = ck.model.config();
  ParamVector<Scalar> grad;
  const auto t0 = std::chrono::steady_clock::now();
  const std::int64_t last = options.stop_after ? std::min(*options.stop_after, opt.steps) : opt.steps;

  auto run_eval = [&](std::int64_t step) {
    if (val_split.empty()) return;
    auto rep = evaluate_heldout(ck.model, val_split, config.editing.plain_crop_frames);
    emit({{"eval_step", step}, {"heldout_ce", rep.per_stream_ce}, {"unigram", rep.unigram}, {"mean_ce", rep.mean_ce}});
    result.last_eval = std::move(rep);
  };

  for (std::int64_t step = ck.step + 1; step <= last; ++step) {
    auto draw = draw_batch(train_split, opt.batch_size, model_cfg.condition_dropout, config.editing, rng);
    std::vector<ModelInput> batch;
    std::vector<const std::vector<std::uint8_t>*> masks;
    for (std::size_t b = 0; b < draw.examples.size(); ++b) {
      batch.push_back({draw.examples[b].tokens, draw.examples[b].segments, draw.conditions[b]});
      masks.push_back(&draw.examples[b].loss_mask);
    }
    std::fill(grad.begin(), grad.end(), Scalar(0));
    const auto rep = ck.model.loss_and_gradient(batch, masks, grad);
    if (!std::isfinite(rep.total)) {
      if (!out_dir.empty()) {
        ck.rng_state = detail::rng_to_string(rng);
        save_checkpoint((fs::path(out_dir) / "diverged.sgck").string(), ck, true);
      }
      throw NumericalError("non-finite loss at step " + std::to_string(step));
    }
    const double gnorm = clip_global_norm(grad, opt.grad_clip);
    const double lr = warmup_cosine_lr(opt.lr, step, opt.warmup_steps, opt.steps);
    ck.optimizer->step(ck.model.parameters().values(), grad, adam, lr, decay);
    ck.step = step;

    StepRecord rec{step, lr, rep.total, gnorm, rep.per_stream};
    result.history.push_back(rec);
    if (options.on_step) options.on_step(rec);
    if (opt.log_every > 0 && (step % opt.log_every == 0 || step == last)) {
      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      emit({{"step", step}, {"lr", lr}, {"loss", rep.total}, {"grad_norm", gnorm},
            {"per_stream", rep.per_stream}, {"elapsed_s", elapsed}});
      if (!options.quiet)
        std::fprintf(stderr, "step %lld  loss %.4f  lr %.2e  |g| %.3f  %.1fs\n",
                     static_cast<long long>(step), rep.total, lr, gnorm, elapsed);
    }
    if (opt.eval_every > 0 && step % opt.eval_every == 0) run_eval(step);
    if (!ck_path.empty() && opt.checkpoint_every > 0 && step % opt.checkpoint_every == 0) {
      ck.rng_state = detail::rng_to_string(rng);
      save_checkpoint(ck_path, ck);
    }
  }
  ck.rng_state = detail::rng_to_string(rng);
  if (!ck_path.empty()) save_checkpoint(ck_path, ck);
  return result;
}

}  // namespace stemgen
