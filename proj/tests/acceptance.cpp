// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// writes the measured values to <work>/acceptance.json.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stemgen/stemgen.hpp"

using namespace stemgen;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  nlohmann::json values = nlohmann::json::object();
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------

Outcome delay_round_trip() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n_streams = uni(1, 6);
    std::vector<StemSpec> stems;
    for (int left = n_streams, k = 0; left > 0; ++k) {
      const int n = uni(1, left);
      stems.push_back({"s" + std::to_string(k), n, uni(2, 64)});
      left -= n;
    }
    std::vector<int> delays(n_streams);
    for (auto& d : delays) d = uni(0, 4);
    const auto layout = make_layout_with_delays(stems, 50.0, delays);
    TokenGrid g(layout, uni(1, 64));
    for (int s = 0; s < g.n_streams(); ++s)
      for (int t = 0; t < g.frames(); ++t) g.at(s, t) = uni(0, layout.codebook_size(s) - 1);
    const auto back = remove_delay(apply_delay(g));
    failures += !(back.frames() == g.frames() && back.data() == g.data());
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && secs < 10.0, fmt("1000 grids, %d mismatches, %.3f s", failures, secs),
          {{"mismatches", failures}, {"seconds", secs}}};
}

Outcome mask_plan_distribution() {
  const auto layout = default_layout();
  std::mt19937_64 rng(77);
  const int n = 100000;
  int one = 0, other_masked = 0;
  std::map<std::string, int> single;
  std::map<int, int> suffix;
  for (int i = 0; i < n; ++i) {
    const auto plan = sample_edit_plan(rng, layout);
    if (plan.masked.size() == 1) {
      ++one;
      ++single[plan.masked.begin()->first];
    }
    if (auto it = plan.masked.find("other"); it != plan.masked.end()) {
      ++other_masked;
      ++suffix[it->second];
    }
  }
  const double p1 = static_cast<double>(one) / n;
  bool ok = std::abs(p1 - 0.5) <= 0.01;
  std::string d = fmt("P(1 stem)=%.4f", p1);
  nlohmann::json v = {{"p_one", p1}};
  for (const char* s : {"bass", "drums", "other"}) {
    const double p = static_cast<double>(single[s]) / n;
    ok &= std::abs(p - 1.0 / 6.0) <= 0.01;
    d += fmt(", P(%s only)=%.4f", s, p);
    v[std::string("p_only_") + s] = p;
  }
  for (int first = 1; first <= 4; ++first) {
    const double p = static_cast<double>(suffix[first]) / other_masked;
    ok &= std::abs(p - 0.25) <= 0.02;
    d += fmt(", P(other from %d)=%.4f", first, p);
    v["p_other_from_" + std::to_string(first)] = p;
  }
  return {ok, d, v};
}

Outcome full_scale_shapes() {
  const auto layout = default_layout();
  const TokenGrid g(layout, 1250, 0);
  const auto prefix = downsample_grid(g, 5);
  const bool delays_ok = layout.delays() == std::vector<int>{0, 0, 0, 1, 2, 3};
  const bool ok = prefix.frames() == 250 && layout.n_streams() == 6 && delays_ok &&
                  prefix.layout().frame_rate_hz() == 10.0;
  return {ok,
          fmt("prefix %d frames at %.0f Hz, %d streams, delays %s", prefix.frames(),
              prefix.layout().frame_rate_hz(), layout.n_streams(), delays_ok ? "[0,0,0,1,2,3]" : "wrong"),
          {{"prefix_frames", prefix.frames()}, {"streams", layout.n_streams()}}};
}

Outcome gradient_check() {
  ModelConfig c;
  c.d_model = 16;
  c.n_layers = 1;
  c.n_heads = 2;
  c.ff_mult = 2;
  c.layout = default_layout(12, 8.0);
  c.n_conditions = 4;
  c.max_frames = 32;
  Transformer<double> m(c);
  Transformer<double>::InitOptions init;
  init.stddev = 0.3;
  init.zero_heads = false;
  m.initialize(5, init);
  std::mt19937_64 rng(6);
  std::vector<ModelInput> batch;
  std::vector<std::vector<std::uint8_t>> masks;
  for (int b = 0; b < 2; ++b) {
    const int frames = 9;
    ModelInput in{TokenGrid(c.layout, frames), std::vector<Segment>(frames, Segment::body), b == 0 ? 2 : kNullCondition};
    for (int s = 0; s < c.layout.n_streams(); ++s)
      for (int t = 0; t < frames; ++t) in.tokens.at(s, t) = static_cast<Token>(rng() % c.layout.vocab_size(s));
    in.segments[0] = in.segments[1] = Segment::prefix;
    in.segments[2] = Segment::separator;
    batch.push_back(std::move(in));
    masks.emplace_back(static_cast<std::size_t>(c.layout.n_streams()) * frames, 1);
  }
  std::vector<const std::vector<std::uint8_t>*> mp = {&masks[0], &masks[1]};
  ParamVector<double> grad;
  m.loss_and_gradient(batch, mp, grad);
  auto& values = m.parameters().values();
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (grad[i] != 0.0) idx.push_back(i);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min<std::size_t>(idx.size(), 50));
  double worst = 0.0;
  const double h = 1e-5;
  for (auto i : idx) {
    const double orig = values[i];
    values[i] = orig + h;
    const double lp = m.loss(batch, mp).total;
    values[i] = orig - h;
    const double lm = m.loss(batch, mp).total;
    values[i] = orig;
    const double num = (lp - lm) / (2 * h);
    worst = std::max(worst, std::abs(num - grad[i]) / std::max(std::abs(num) + std::abs(grad[i]), 1e-8));
  }
  return {idx.size() >= 20 && worst <= 1e-3, fmt("%zu parameters, max relative error %.2e", idx.size(), worst),
          {{"parameters", idx.size()}, {"max_rel_error", worst}}};
}

Outcome rvq_monotonicity(const Dataset& ds) {
  const auto train = ds.split(Split::train);
  const auto test = ds.split(Split::test);
  int bad = 0;
  nlohmann::json curves = nlohmann::json::array();
  for (int k = 0; k < 10; ++k) {
    std::mt19937_64 rng(1000 + k);
    FrameSequence fit_frames, held;
    auto append = [&](FrameSequence& dst, const DatasetEntry* e) {
      const auto f = render_stem_features(load_sidecar(e->sidecar), "other", ds.layout.frame_rate_hz(), 0.05, rng);
      dst.dim = f.dim;
      dst.values.insert(dst.values.end(), f.values.begin(), f.values.end());
    };
    for (int i = 0; i < 100; ++i) append(fit_frames, train[(k * 100 + i) % train.size()]);
    for (int i = 0; i < 50; ++i) append(held, test[(k * 50 + i) % test.size()]);
    const auto fit = fit_codebooks(fit_frames, 4, 64, 2000 + k);
    const auto codes = rvq_encode(held, fit.codebooks);
    std::vector<double> mse;
    for (int s = 1; s <= 4; ++s) mse.push_back(frame_mse(held, rvq_decode(codes, fit.codebooks, s)));
    for (int s = 1; s < 4; ++s) bad += mse[s] > mse[s - 1];
    curves.push_back(mse);
  }
  return {bad == 0,
          fmt("10 fits, %d increases; first fit held-out MSE %.4f %.4f %.4f %.4f", bad, curves[0][0].get<double>(),
              curves[0][1].get<double>(), curves[0][2].get<double>(), curves[0][3].get<double>()),
          {{"heldout_mse", curves}, {"increases", bad}}};
}

Outcome metric_oracles() {
  int ok = 0, total = 0;
  auto check = [&](bool c) { ok += c; ++total; };
  {
    const std::vector<double> b = {0.5, 1.0, 1.5};
    check(beat_f_measure(b, b).f_measure == 1.0);
    const std::vector<double> ref = {1.0, 2.0, 3.0};
    check(beat_f_measure(ref, std::vector<double>{}).f_measure == 0.0);
    const auto s = beat_f_measure(ref, std::vector<double>{1.05, 2.2, 3.0}, 0.07);
    check(s.precision == 2.0 / 3.0 && s.recall == 2.0 / 3.0 && s.f_measure == 2.0 / 3.0);
  }
  {
    std::vector<BassFrame> bass;
    std::vector<ChordFrame> chords;
    for (int r = 0; r < 12; ++r) {
      const Chord c{r, r % 3 == 0};
      bass.push_back({c.root, 1.0, 0.0});
      chords.push_back({c.pitch_classes(), 0.0});
    }
    check(harmonic_match(bass, chords) == 1.0);
    bass.clear();
    chords.clear();
    for (int r = 0; r < 12; ++r)
      for (int pc = 0; pc < 12; ++pc) {
        bass.push_back({pc, 1.0, 0.0});
        chords.push_back({Chord{r, r % 2 == 1}.pitch_classes(), 0.0});
      }
    check(harmonic_match(bass, chords) == 0.25);
    for (auto& b : bass) b.loudness_db = -60.0;
    check(!harmonic_match(bass, chords).has_value());
  }
  return {ok == total, fmt("%d/%d worked examples exact", ok, total), {{"exact", ok}, {"total", total}}};
}

// ---------------------------------------------------------------------------

struct Trained {
  std::optional<ModelCheckpoint<float>> checkpoint;
  HeldoutReport test;
  double train_seconds = 0.0;
  std::int64_t steps = 0;
};

TrainConfig acceptance_config(int steps) {
  TrainConfig c;
  c.model.d_model = 128;
  c.model.n_layers = 3;
  c.model.n_heads = 4;
  c.model.ff_mult = 4;
  c.model.max_frames = 64;
  c.optimization.steps = steps;
  c.optimization.batch_size = 32;
  c.optimization.lr = 3e-3;
  c.optimization.warmup_steps = 100;
  c.optimization.log_every = 250;
  c.optimization.eval_every = 1000;
  c.optimization.checkpoint_every = 1000;
  c.optimization.seed = 1;
  c.data.eval_songs = 200;
  return c;
}

Outcome learning(const Dataset& ds, const fs::path& run_dir, int steps, bool reuse, Trained& out) {
  const auto cfg = acceptance_config(steps);
  const auto ck_path = run_dir / "checkpoint.sgck";
  const auto t0 = Clock::now();
  bool finite = true;
  if (reuse && fs::exists(ck_path)) {
    out.checkpoint.emplace(load_checkpoint<float>(ck_path.string()));
  } else {
    fs::remove_all(run_dir);
    try {
      out.checkpoint.emplace(std::move(train<float>(cfg, ds, run_dir.string()).checkpoint));
    } catch (const NumericalError& e) {
      std::fprintf(stderr, "%s\n", e.what());
      finite = false;
    }
  }
  out.train_seconds = seconds_since(t0);
  out.steps = finite ? out.checkpoint->step : 0;
  if (!finite) return {false, "training diverged", {}};
  out.test = evaluate_heldout(out.checkpoint->model, ds.split(Split::test), cfg.editing.plain_crop_frames);
  bool ok = out.train_seconds <= 1800.0 || reuse;
  double worst = 0.0;
  std::string d;
  for (std::size_t s = 0; s < out.test.per_stream_ce.size(); ++s) {
    const double ratio = out.test.per_stream_ce[s] / out.test.unigram[s];
    worst = std::max(worst, ratio);
    ok &= ratio <= 0.8;
    d += fmt("%s%.3f/%.3f", s ? " " : "", out.test.per_stream_ce[s], out.test.unigram[s]);
  }
  return {ok,
          fmt("CE/unigram per stream %s (worst ratio %.3f), %lld steps in %.0f s", d.c_str(), worst,
              static_cast<long long>(out.steps), out.train_seconds),
          {{"ce", out.test.per_stream_ce},
           {"unigram", out.test.unigram},
           {"worst_ratio", worst},
           {"steps", out.steps},
           {"train_seconds", out.train_seconds}}};
}

constexpr int kEditFrames = 50;

struct EditCase {
  const DatasetEntry* song;
  TokenGrid source;
  SymbolicSong symbolic;
};

std::vector<EditCase> edit_cases(const Dataset& ds, std::size_t n) {
  std::vector<EditCase> out;
  for (const auto* e : ds.split(Split::test)) {
    if (out.size() == n) break;
    out.push_back({e, crop_frames(e->tokens, 0, kEditFrames), load_sidecar(e->sidecar)});
  }
  return out;
}

std::vector<double> beats_before(const std::vector<double>& beats, double end) {
  std::vector<double> out;
  for (double b : beats)
    if (b < end - 1e-9) out.push_back(b);
  return out;
}

Outcome forced_preservation(const Transformer<float>& model, const std::vector<EditCase>& cases) {
  std::mt19937_64 rng(606);
  int perfect = 0;
  double worst = 1.0;
  for (int run = 0; run < 100; ++run) {
    const auto& c = cases[run % cases.size()];
    const auto plan = sample_edit_plan(rng, model.config().layout, model.config().downsample_factor);
    const auto edited = edit(model, c.source, plan, c.song->condition, EditMode::forced, DecodeParams{}, 9000 + run);
    const double p = preservation_rate(c.source, edited, plan).min_unmasked();
    worst = std::min(worst, p);
    perfect += p == 1.0;
  }
  return {perfect == 100, fmt("%d/100 runs with preservation 1.0 (minimum %.4f)", perfect, worst),
          {{"perfect_runs", perfect}, {"min_preservation", worst}}};
}

Outcome bass_harmony(const Transformer<float>& model, const std::vector<EditCase>& cases) {
  const auto& layout = model.config().layout;
  const auto plan = plan_from_mask_args({"bass"}, layout, model.config().downsample_factor);
  std::vector<double> har, base;
  std::mt19937_64 rng(707);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const auto edited = edit(model, c.source, plan, c.song->condition, EditMode::forced, DecodeParams{}, 7000 + i);
    if (auto h = harmonic_match(edited)) har.push_back(*h);
    for (int draw = 0; draw < 20; ++draw) {
      auto random_bass = c.source;
      for (int t = 0; t < random_bass.frames(); ++t)
        random_bass.at(0, t) = static_cast<Token>(rng() % layout.codebook_size(0));
      if (auto h = harmonic_match(random_bass)) base.push_back(*h);
    }
  }
  const double h = mean(har), b = mean(base);
  return {h >= 0.80 && std::abs(b - 0.25) <= 0.05,
          fmt("HAR %.3f over %zu songs, random-token bass %.3f", h, har.size(), b),
          {{"har", h}, {"har_songs", har.size()}, {"random_baseline", b}}};
}

Outcome drum_rhythm(const Transformer<float>& model, const std::vector<EditCase>& cases) {
  const auto& layout = model.config().layout;
  const auto plan = plan_from_mask_args({"drums"}, layout, model.config().downsample_factor);
  const double fr = layout.frame_rate_hz();
  const double end = kEditFrames / fr;
  std::vector<double> f, count_matched, uniform_tokens;
  int silent = 0;
  std::mt19937_64 rng(808);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const auto ref = beats_before(c.symbolic.beat_grid, end);
    const auto edited = edit(model, c.source, plan, c.song->condition, EditMode::forced, DecodeParams{}, 8000 + i);
    const auto s = beat_f_measure(ref, symbolic_beats(edited));
    f.push_back(s.f_measure);
    silent += s.silent;

    const auto onsets = symbolic_beats(c.source).size();
    std::vector<int> frames(kEditFrames);
    std::iota(frames.begin(), frames.end(), 0);
    for (int draw = 0; draw < 20; ++draw) {
      std::shuffle(frames.begin(), frames.end(), rng);
      std::vector<double> est;
      for (std::size_t k = 0; k < onsets; ++k) est.push_back(frames[k] / fr);
      std::sort(est.begin(), est.end());
      count_matched.push_back(beat_f_measure(ref, est).f_measure);

      auto random_drums = c.source;
      for (int t = 0; t < random_drums.frames(); ++t)
        random_drums.at(1, t) = static_cast<Token>(rng() % layout.codebook_size(1));
      uniform_tokens.push_back(beat_f_measure(ref, symbolic_beats(random_drums)).f_measure);
    }
  }
  const double fm = mean(f), b = mean(count_matched), u = mean(uniform_tokens);
  return {fm >= 0.80 && b <= 0.30,
          fmt("BEAT %.3f over %zu songs (%d silent), random onsets %.3f, random tokens %.3f", fm, f.size(), silent,
              b, u),
          {{"beat", fm}, {"silent", silent}, {"random_onsets_baseline", b}, {"random_tokens_baseline", u}}};
}

Outcome residual_detail(const Transformer<float>& model, const std::vector<EditCase>& cases) {
  const auto& layout = model.config().layout;
  const auto plan = plan_from_mask_args({"other:2-4"}, layout, model.config().downsample_factor);
  const int first = stream_index(layout, "other", 1);
  int kept = 0, changed = 0, bars = 0, bars_same = 0;
  const int runs = 100;
  for (int run = 0; run < runs; ++run) {
    const auto& c = cases[run % cases.size()];
    const auto edited = edit(model, c.source, plan, c.song->condition, EditMode::forced, DecodeParams{}, 5000 + run);
    bool same_first = true, any_change = false;
    for (int t = 0; t < kEditFrames; ++t) {
      same_first &= edited.at(first, t) == c.source.at(first, t);
      for (int s = first + 1; s < first + 4; ++s) any_change |= edited.at(s, t) != c.source.at(s, t);
    }
    kept += same_first;
    changed += any_change;
    const auto src = symbolic_detokenize(c.source).song;
    const auto out = symbolic_detokenize(edited).song;
    for (const auto& span : c.symbolic.chords) {
      if (span.start >= kEditFrames / layout.frame_rate_hz() - 1e-9) break;
      ++bars;
      const auto want = chord_at(src, span.start);
      const auto got = chord_at(out, span.start);
      bars_same += want && got && *want == *got;
    }
  }
  const double change_rate = static_cast<double>(changed) / runs;
  const double bar_rate = static_cast<double>(bars_same) / bars;
  return {kept == runs && change_rate >= 0.95 && bar_rate >= 0.90,
          fmt("other:1 kept in %d/%d runs, stages 2-4 changed in %.0f%%, chord matches in %.1f%% of %d bars", kept,
              runs, 100 * change_rate, 100 * bar_rate, bars),
          {{"first_stage_kept", kept}, {"changed_rate", change_rate}, {"bar_match_rate", bar_rate}, {"bars", bars}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stemgen acceptance run"};
  std::string work = "acceptance_work";
  int steps = 6000;
  int songs = 10000;
  int edit_songs = 100;
  bool reuse = false;
  app.add_option("--work", work, "scratch directory")->capture_default_str();
  app.add_option("--steps", steps, "training steps")->capture_default_str();
  app.add_option("--songs", songs, "dataset size")->capture_default_str();
  app.add_option("--edit-songs", edit_songs, "held-out songs used by the editing checks")->capture_default_str();
  app.add_flag("--reuse", reuse, "reuse an existing dataset and checkpoint in the work directory");
  CLI11_PARSE(app, argc, argv);

  const fs::path root(work);
  fs::create_directories(root);
  const auto ds_dir = root / "dataset";
  if (!reuse || !fs::exists(ds_dir / "manifest.json")) {
    fs::remove_all(ds_dir);
    DatasetOptions opt;
    opt.n_songs = songs;
    opt.style.p_ct = 1.0;
    opt.style.p_ob = 1.0;
    write_dataset(ds_dir.string(), opt);
  }
  const auto ds = load_dataset(ds_dir.string());

  std::vector<std::pair<int, Outcome>> results;
  auto run = [&](int id, const char* name, const std::function<Outcome()>& f) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what(), {}};
    }
    o.values["seconds"] = seconds_since(t0);
    std::printf("criterion %2d: %s  %-26s %s\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    results.emplace_back(id, std::move(o));
  };

  run(1, "delay round trip", delay_round_trip);
  run(2, "mask-plan distribution", mask_plan_distribution);
  run(3, "full-scale shapes", full_scale_shapes);
  run(4, "gradient check", gradient_check);

  Trained trained;
  run(5, "learning", [&] { return learning(ds, root / "lm", steps, reuse, trained); });
  const bool have_model = trained.steps > 0;
  const auto cases = edit_cases(ds, static_cast<std::size_t>(edit_songs));
  auto with_model = [&](auto f) {
    return [&, f]() -> Outcome {
      if (!have_model) return {false, "no trained model", {}};
      return f(trained.checkpoint->model, cases);
    };
  };
  run(6, "forced-mode preservation", with_model(forced_preservation));
  run(7, "cross-stem harmony", with_model(bass_harmony));
  run(8, "cross-stem rhythm", with_model(drum_rhythm));
  run(9, "residual-detail editing", with_model(residual_detail));
  run(10, "RVQ monotonicity", [&] { return rvq_monotonicity(ds); });
  run(11, "metric oracles", metric_oracles);

  nlohmann::json report = nlohmann::json::object();
  int failed = 0;
  for (const auto& [id, o] : results) {
    report[std::to_string(id)] = {{"pass", o.pass}, {"detail", o.detail}, {"values", o.values}};
    failed += !o.pass;
  }
  std::ofstream(root / "acceptance.json") << report.dump(2) << '\n';
  std::printf("%d/%zu criteria passed\n", static_cast<int>(results.size()) - failed, results.size());
  return failed == 0 ? 0 : 1;
}
