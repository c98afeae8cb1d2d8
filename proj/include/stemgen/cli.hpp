#pragma once

// Command-line front end. Every subcommand writes its outputs plus a
// run manifest (config hash, seed, format versions) and maps errors to
// the exit codes in ErrorKind.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stemgen/stemgen.hpp"

namespace stemgen::cli {

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

struct Env {
  std::filesystem::path output_root;  // prefix for relative output paths
  LogLevel log_level = LogLevel::info;
};

inline Env read_env() {
  Env env;
  if (const char* root = std::getenv("STEMGEN_OUTPUT_ROOT"); root && *root) env.output_root = root;
  if (const char* lvl = std::getenv("STEMGEN_LOG_LEVEL"); lvl && *lvl) {
    const std::string s = lvl;
    if (s == "quiet") env.log_level = LogLevel::quiet;
    else if (s == "info") env.log_level = LogLevel::info;
    else if (s == "debug") env.log_level = LogLevel::debug;
    else throw InvalidArgument("STEMGEN_LOG_LEVEL must be quiet, info or debug");
  }
  return env;
}

inline std::string out_path(const Env& env, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !env.output_root.empty()) path = env.output_root / path;
  return path.string();
}

/// FNV-1a, stable across platforms and runs.
inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline void write_manifest(const std::string& path, const std::string& command, const nlohmann::json& config,
                           std::uint64_t seed) {
  nlohmann::json m = {{"command", command},
                      {"config", config},
                      {"config_hash", fnv1a_hex(config.dump())},
                      {"seed", seed},
                      {"formats",
                       {{"grid", kGridFormatVersion},
                        {"checkpoint", kCheckpointFormatVersion},
                        {"codebooks", kCodebookFormatVersion},
                        {"dataset", kDatasetFormatVersion}}}};
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << m.dump(2) << '\n';
}

inline void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

inline void require_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path);
}

inline nlohmann::json decode_json(const DecodeParams& p) {
  return {{"temperature", p.temperature}, {"top_k", p.top_k}, {"cfg_scale", p.cfg_scale}, {"guidance", p.guidance}};
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  int songs = 10000;
  std::uint64_t seed = 7;
  int frames = 60;
  double frame_rate = 8.0;
  int codebook = 64;
};

inline int run_synth(const Env& env, const SynthArgs& a) {
  if (a.codebook < 25) throw InvalidArgument("--codebook must be >= 25 for the symbolic token codes");
  DatasetOptions opt;
  opt.n_songs = a.songs;
  opt.seed = a.seed;
  opt.codebook_size = a.codebook;
  opt.style.n_frames = a.frames;
  opt.style.frame_rate_hz = a.frame_rate;
  const auto dir = out_path(env, a.out);
  write_dataset(dir, opt);
  write_manifest((std::filesystem::path(dir) / "run.json").string(), "synth-data",
                 {{"songs", a.songs}, {"frames", a.frames}, {"frame_rate", a.frame_rate}, {"codebook", a.codebook}},
                 a.seed);
  if (env.log_level >= LogLevel::info) std::cout << "wrote " << a.songs << " songs to " << dir << '\n';
  return 0;
}

struct CodecArgs {
  std::string dataset;
  std::string stem = "other";
  std::string out;
  int stages = 4;
  int codebook = 64;
  int songs = 500;
  double noise = 0.05;
  std::uint64_t seed = 0;
};

inline int run_train_codec(const Env& env, const CodecArgs& a) {
  require_file((std::filesystem::path(a.dataset) / "manifest.json").string());
  const auto ds = load_dataset(a.dataset);
  const auto train_songs = ds.split(Split::train);
  const auto test_songs = ds.split(Split::test);
  std::mt19937_64 rng(a.seed);
  auto collect = [&](const std::vector<const DatasetEntry*>& songs, std::size_t limit) {
    FrameSequence all;
    for (std::size_t i = 0; i < songs.size() && i < limit; ++i) {
      const auto song = load_sidecar(songs[i]->sidecar);
      auto f = render_stem_features(song, a.stem, ds.layout.frame_rate_hz(), a.noise, rng);
      if (all.dim == 0) all.dim = f.dim;
      all.values.insert(all.values.end(), f.values.begin(), f.values.end());
    }
    return all;
  };
  const auto training = collect(train_songs, static_cast<std::size_t>(a.songs));
  const auto heldout = collect(test_songs, 50);
  auto fit = fit_codebooks(training, a.stages, a.codebook, a.seed);
  for (const auto& w : fit.warnings) std::cerr << "warning: " << w << '\n';
  const auto path = out_path(env, a.out);
  ensure_parent(path);
  save_codebooks(path, fit.codebooks);
  nlohmann::json report = {{"train_stage_mse", fit.stage_mse}};
  if (heldout.frames() > 0) {
    const auto grid = rvq_encode(heldout, fit.codebooks, a.stem, ds.layout.frame_rate_hz());
    std::vector<double> mse;
    for (int s = 1; s <= a.stages; ++s) mse.push_back(frame_mse(heldout, rvq_decode(grid, fit.codebooks, s)));
    report["heldout_mse_by_stages"] = mse;
  }
  write_manifest(path + ".run.json", "train-codec",
                 {{"dataset", a.dataset}, {"stem", a.stem}, {"stages", a.stages}, {"codebook", a.codebook},
                  {"songs", a.songs}, {"noise", a.noise}, {"report", report}},
                 a.seed);
  if (env.log_level >= LogLevel::info) std::cout << report.dump(2) << '\n';
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string dataset;
  std::string out;
  std::optional<std::string> resume;
  std::optional<int> precision;
  std::optional<std::int64_t> steps;
  std::optional<std::uint64_t> seed;
};

inline int run_train_lm(const Env& env, const TrainArgs& a) {
  require_file(a.config);
  std::ifstream is(a.config);
  TrainConfig cfg;
  try {
    cfg = train_config_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  if (a.precision) cfg.optimization.precision = *a.precision;
  if (a.steps) cfg.optimization.steps = *a.steps;
  if (a.seed) cfg.optimization.seed = *a.seed;
  if (cfg.optimization.precision != 32 && cfg.optimization.precision != 64)
    throw InvalidArgument("precision must be 32 or 64");
  require_file((std::filesystem::path(a.dataset) / "manifest.json").string());
  const auto ds = load_dataset(a.dataset);
  const auto dir = out_path(env, a.out);
  std::filesystem::create_directories(dir);
  write_manifest((std::filesystem::path(dir) / "run.json").string(), "train-lm", to_json(cfg),
                 cfg.optimization.seed);
  TrainOptions opts;
  opts.resume_from = a.resume;
  opts.quiet = env.log_level == LogLevel::quiet;
  nlohmann::json summary;
  auto finish = [&](const auto& result) {
    const auto& ck = result.checkpoint;
    summary = {{"step", ck.step}, {"checkpoint", (std::filesystem::path(dir) / "checkpoint.sgck").string()}};
    if (!result.history.empty()) summary["final_loss"] = result.history.back().loss;
    const auto test = ds.split(Split::test);
    if (!test.empty()) {
      const auto rep = evaluate_heldout(ck.model, test, cfg.editing.plain_crop_frames);
      summary["test_ce"] = rep.per_stream_ce;
      summary["test_unigram"] = rep.unigram;
    }
  };
  if (cfg.optimization.precision == 64)
    finish(train<double>(cfg, ds, dir, opts));
  else
    finish(train<float>(cfg, ds, dir, opts));
  std::ofstream(std::filesystem::path(dir) / "summary.json") << summary.dump(2) << '\n';
  if (env.log_level >= LogLevel::info) std::cout << summary.dump(2) << '\n';
  return 0;
}

struct GenerateArgs {
  std::string checkpoint;
  std::string out;
  int cond = kNullCondition;
  int frames = 60;
  std::uint64_t seed = 0;
  DecodeParams decode;
};

template <class Scalar>
TokenGrid generate_with(const GenerateArgs& a) {
  const auto ck = load_checkpoint<Scalar>(a.checkpoint);
  return generate(ck.model, a.cond, a.frames, a.decode, a.seed);
}

inline int run_generate(const Env& env, const GenerateArgs& a) {
  require_file(a.checkpoint);
  const auto grid = checkpoint_precision(a.checkpoint) == 64 ? generate_with<double>(a) : generate_with<float>(a);
  const auto path = out_path(env, a.out);
  ensure_parent(path);
  save_grid(path, grid);
  write_manifest(path + ".run.json", "generate",
                 {{"checkpoint", a.checkpoint}, {"cond", a.cond}, {"frames", a.frames}, {"decode", decode_json(a.decode)}},
                 a.seed);
  if (env.log_level >= LogLevel::info) std::cout << "wrote " << path << '\n';
  return 0;
}

struct EditArgs {
  std::string checkpoint;
  std::string in;
  std::string out;
  std::vector<std::string> mask;
  std::string mode = "forced";
  int cond = kNullCondition;
  std::uint64_t seed = 0;
  DecodeParams decode;
};

template <class Scalar>
TokenGrid edit_with(const EditArgs& a, const TokenGrid& source) {
  const auto ck = load_checkpoint<Scalar>(a.checkpoint);
  const auto& layout = ck.model.config().layout;
  if (!source.layout().same_structure(layout))
    throw LayoutMismatch(a.in + ": token layout does not match the checkpoint layout");
  const auto plan = plan_from_mask_args(a.mask, layout, ck.model.config().downsample_factor);
  const auto mode = a.mode == "free" ? EditMode::free : EditMode::forced;
  return edit(ck.model, source, plan, a.cond, mode, a.decode, a.seed);
}

inline int run_edit(const Env& env, const EditArgs& a) {
  require_file(a.checkpoint);
  require_file(a.in);
  if (a.mode != "forced" && a.mode != "free") throw InvalidArgument("--mode must be forced or free");
  const auto source = load_grid(a.in);
  const auto grid = checkpoint_precision(a.checkpoint) == 64 ? edit_with<double>(a, source)
                                                             : edit_with<float>(a, source);
  const auto path = out_path(env, a.out);
  ensure_parent(path);
  save_grid(path, grid);
  write_manifest(path + ".run.json", "edit",
                 {{"checkpoint", a.checkpoint}, {"in", a.in}, {"mask", a.mask}, {"mode", a.mode},
                  {"cond", a.cond}, {"decode", decode_json(a.decode)}},
                 a.seed);
  if (env.log_level >= LogLevel::info) std::cout << "wrote " << path << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string dataset;
  std::string checkpoint;
  std::string task = "t2m";
  std::string out = "report.json";
  int songs = 50;
  std::uint64_t seed = 0;
  DecodeParams decode;
};

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Standard error of the mean; NaN below two samples.
inline double stderr_of(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

inline nlohmann::json number_or_null(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

template <class Scalar>
nlohmann::json evaluate_with(const EvaluateArgs& a, const Dataset& ds) {
  const auto ck = load_checkpoint<Scalar>(a.checkpoint);
  const auto& model = ck.model;
  if (!model.config().layout.same_structure(ds.layout))
    throw LayoutMismatch("dataset layout does not match the checkpoint layout");
  auto test = ds.split(Split::test);
  if (test.empty()) throw InvalidArgument("dataset has no test songs");
  if (a.songs > 0 && test.size() > static_cast<std::size_t>(a.songs)) test.resize(a.songs);
  nlohmann::json report = {{"task", a.task}, {"songs", test.size()}, {"checkpoint_step", ck.step}};
  if (a.task == "t2m") {
    const auto rep = evaluate_heldout(model, test, test.front()->tokens.frames());
    report["per_stream_ce"] = rep.per_stream_ce;
    report["unigram"] = rep.unigram;
    report["mean_ce"] = rep.mean_ce;
    return report;
  }
  const std::string stem = a.task.substr(5);
  const auto plan = plan_from_mask_args({stem}, ds.layout, model.config().downsample_factor);
  std::vector<double> har, beat, pres;
  std::size_t silent = 0;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto* e = test[i];
    const auto edited = edit(model, e->tokens, plan, e->condition, EditMode::forced, a.decode, a.seed + i);
    const auto song = load_sidecar(e->sidecar);
    const auto h = harmonic_match(edited);
    const auto b = beat_f_measure(song.beat_grid, symbolic_beats(edited));
    const auto p = preservation_rate(e->tokens, edited, plan).min_unmasked();
    if (h) har.push_back(*h);
    beat.push_back(b.f_measure);
    silent += b.silent;
    pres.push_back(p);
    rows.push_back({{"song", e->id},
                    {"har", h ? nlohmann::json(*h) : nlohmann::json(nullptr)},
                    {"beat", b.f_measure},
                    {"beat_silent", b.silent},
                    {"preservation", p}});
  }
  for (const auto& [name, v] : {std::pair{"har", &har}, std::pair{"beat", &beat}, std::pair{"preservation", &pres}}) {
    report[name] = number_or_null(mean_of(*v));
    report[std::string(name) + "_stderr"] = number_or_null(stderr_of(*v));
  }
  report["har_songs"] = har.size();
  report["beat_silent"] = silent;
  report["rows"] = rows;
  return report;
}

inline int run_evaluate(const Env& env, const EvaluateArgs& a) {
  static const std::vector<std::string> tasks = {"t2m", "edit:bass", "edit:drums", "edit:other"};
  if (std::find(tasks.begin(), tasks.end(), a.task) == tasks.end())
    throw InvalidArgument("--task must be one of t2m, edit:bass, edit:drums, edit:other");
  require_file(a.checkpoint);
  require_file((std::filesystem::path(a.dataset) / "manifest.json").string());
  const auto ds = load_dataset(a.dataset);
  const auto report = checkpoint_precision(a.checkpoint) == 64 ? evaluate_with<double>(a, ds)
                                                               : evaluate_with<float>(a, ds);
  const auto path = out_path(env, a.out);
  ensure_parent(path);
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << report.dump(2) << '\n';
  write_manifest(path + ".run.json", "evaluate",
                 {{"dataset", a.dataset}, {"checkpoint", a.checkpoint}, {"task", a.task}, {"songs", a.songs},
                  {"decode", decode_json(a.decode)}},
                 a.seed);
  if (env.log_level < LogLevel::info) return 0;
  std::cout << std::fixed << std::setprecision(4);
  if (a.task == "t2m") {
    std::cout << "stream        CE   unigram\n";
    for (std::size_t s = 0; s < report["per_stream_ce"].size(); ++s)
      std::cout << std::setw(6) << s << std::setw(10) << report["per_stream_ce"][s].get<double>() << std::setw(10)
                << report["unigram"][s].get<double>() << '\n';
  } else {
    auto cell = [&](const std::string& k) {
      std::ostringstream c;
      c << std::fixed << std::setprecision(3);
      if (report[k].is_null()) c << "n/a";
      else c << report[k].get<double>();
      if (!report[k + "_stderr"].is_null()) c << " +- " << report[k + "_stderr"].get<double>();
      return c.str();
    };
    std::cout << std::left << std::setw(12) << "task" << std::setw(18) << "HAR" << std::setw(18) << "BEAT"
              << "PRES\n"
              << std::setw(12) << a.task << std::setw(18) << cell("har") << std::setw(18) << cell("beat")
              << cell("preservation") << '\n'
              << report["songs"].get<std::size_t>() << " songs, HAR gated on " << report["har_songs"].get<std::size_t>()
              << ", " << report["beat_silent"].get<std::size_t>() << " with no detected beats\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

inline void print_layout(std::ostream& os, const LayoutSpec& layout) {
  os << "frame rate " << layout.frame_rate_hz() << " Hz, " << layout.n_streams() << " streams, max delay "
     << layout.max_delay() << '\n';
  for (int s = 0; s < layout.n_streams(); ++s) {
    const auto ref = stream_ref(layout, s);
    os << "  stream " << s << "  " << ref.stem << ':' << ref.stage << "  codebook "
       << layout.codebook_size(s) << "  delay " << layout.delays()[s] << '\n';
  }
}

inline std::string token_text(const LayoutSpec& layout, int s, Token t) {
  if (layout.is_codebook_id(s, t)) return std::to_string(t);
  if (t == layout.special(s, Special::pad_delay)) return "P";
  if (t == layout.special(s, Special::mask)) return "M";
  if (t == layout.special(s, Special::sep)) return "S";
  if (t == layout.special(s, Special::bos)) return "B";
  return "?" + std::to_string(t);
}

inline int run_inspect(const std::string& path, int max_frames) {
  require_file(path);
  auto& os = std::cout;
  if (std::filesystem::is_directory(path)) {
    const auto ds = load_dataset(path);
    os << "dataset " << path << ": " << ds.songs.size() << " songs (train " << ds.split(Split::train).size()
       << ", validation " << ds.split(Split::validation).size() << ", test " << ds.split(Split::test).size()
       << ")\n";
    print_layout(os, ds.layout);
    return 0;
  }
  std::ifstream is(path, std::ios::binary);
  char magic[8] = {};
  is.read(magic, 8);
  const std::string head(magic, static_cast<std::size_t>(is.gcount()));
  if (head.starts_with("SGCK")) {
    const int bits = checkpoint_precision(path);
    auto show = [&](const auto& ck) {
      const auto& cfg = ck.model.config();
      os << "checkpoint " << path << " (" << bits << "-bit), step " << ck.step << ", "
         << ck.model.parameters().size() << " parameters, optimizer state "
         << (ck.optimizer ? "present" : "absent") << '\n';
      os << "d_model " << cfg.d_model << ", layers " << cfg.n_layers << ", heads " << cfg.n_heads << ", conditions "
         << cfg.n_conditions << ", max_frames " << cfg.max_frames << '\n';
      print_layout(os, cfg.layout);
    };
    if (bits == 64) show(load_checkpoint<double>(path));
    else show(load_checkpoint<float>(path));
    return 0;
  }
  if (head.starts_with("SGCB")) {
    const auto cb = load_codebooks(path);
    os << "codebooks " << path << ": " << cb.n_stages() << " stages x " << cb.codebook_size() << " codes, dim "
       << cb.dim() << '\n';
    return 0;
  }
  const auto grid = load_grid(path);
  const auto& layout = grid.layout();
  print_layout(os, layout);
  os << grid.frames() << " frames\n";
  const auto rep = validate_grid(grid);
  if (!rep.ok)
    os << rep.n_violations << " invalid cells, first at stream " << rep.first->stream << " frame " << rep.first->frame
       << ": " << rep.first->reason << '\n';
  const int shown = std::min(grid.frames(), max_frames);
  for (int s = 0; s < grid.n_streams(); ++s) {
    const auto ref = stream_ref(layout, s);
    std::ostringstream name;
    name << ref.stem << ':' << ref.stage;
    os << std::left << std::setw(10) << name.str() << std::right;
    for (int t = 0; t < shown; ++t) os << std::setw(4) << token_text(layout, s, grid.at(s, t));
    if (shown < grid.frames()) os << " ...";
    os << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

inline void add_decode_flags(CLI::App* cmd, DecodeParams& p) {
  cmd->add_option("--temperature", p.temperature, "sampling temperature")->capture_default_str();
  cmd->add_option("--top-k", p.top_k, "top-k truncation")->capture_default_str();
  cmd->add_option("--cfg", p.cfg_scale, "classifier-free guidance scale")->capture_default_str();
}

/// Runs one invocation; returns the process exit code.
inline int dispatch(int argc, const char* const* argv) {
  CLI::App app{"Multi-stem token music generation and editing"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "stemgen 1.0");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth-data", "write a synthetic multi-stem dataset");
  c_synth->add_option("--out", synth.out, "dataset directory")->required();
  c_synth->add_option("-n,--n,--songs", synth.songs, "number of songs")->capture_default_str()->check(CLI::PositiveNumber);
  c_synth->add_option("--seed", synth.seed)->capture_default_str();
  c_synth->add_option("--frames", synth.frames, "frames per song")->capture_default_str()->check(CLI::PositiveNumber);
  c_synth->add_option("--frame-rate", synth.frame_rate)->capture_default_str()->check(CLI::PositiveNumber);
  c_synth->add_option("--codebook", synth.codebook)->capture_default_str();

  CodecArgs codec;
  auto* c_codec = app.add_subcommand("train-codec", "fit RVQ codebooks on rendered stem features");
  c_codec->add_option("--dataset", codec.dataset)->required();
  c_codec->add_option("--out", codec.out, "codebook file")->required();
  c_codec->add_option("--stem", codec.stem)->capture_default_str()->check(CLI::IsMember({"bass", "drums", "other"}));
  c_codec->add_option("--stages", codec.stages)->capture_default_str()->check(CLI::PositiveNumber);
  c_codec->add_option("--codebook", codec.codebook)->capture_default_str();
  c_codec->add_option("--songs", codec.songs, "training songs to render")->capture_default_str();
  c_codec->add_option("--noise", codec.noise)->capture_default_str();
  c_codec->add_option("--seed", codec.seed)->capture_default_str();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train-lm", "train the token language model");
  c_train->add_option("--config", tr.config, "JSON config")->required();
  c_train->add_option("--dataset", tr.dataset)->required();
  c_train->add_option("--out", tr.out, "run directory")->required();
  c_train->add_option("--resume", tr.resume, "checkpoint to continue from");
  c_train->add_option("--precision", tr.precision)->check(CLI::IsMember({32, 64}));
  c_train->add_option("--steps", tr.steps);
  c_train->add_option("--seed", tr.seed);

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "sample a new song");
  c_gen->add_option("--checkpoint", gen.checkpoint)->required();
  c_gen->add_option("--out", gen.out, "token file")->required();
  c_gen->add_option("--cond", gen.cond, "condition id (-1 = none)")->capture_default_str();
  c_gen->add_option("--frames", gen.frames)->capture_default_str();
  c_gen->add_option("--seed", gen.seed)->capture_default_str();
  add_decode_flags(c_gen, gen.decode);

  EditArgs ed;
  auto* c_edit = app.add_subcommand("edit", "regenerate masked stems of a token file");
  c_edit->add_option("--checkpoint", ed.checkpoint)->required();
  c_edit->add_option("--in", ed.in, "source token file")->required();
  c_edit->add_option("--out", ed.out, "token file")->required();
  c_edit->add_option("--mask", ed.mask, "stem or stem:a-b suffix (repeatable)")->required();
  c_edit->add_option("--mode", ed.mode)->capture_default_str()->check(CLI::IsMember({"forced", "free"}));
  c_edit->add_option("--cond", ed.cond)->capture_default_str();
  c_edit->add_option("--seed", ed.seed)->capture_default_str();
  add_decode_flags(c_edit, ed.decode);

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "score a checkpoint on the test split");
  c_eval->add_option("--dataset", ev.dataset)->required();
  c_eval->add_option("--checkpoint", ev.checkpoint)->required();
  c_eval->add_option("--task", ev.task)->capture_default_str();
  c_eval->add_option("--out", ev.out, "JSON report")->capture_default_str();
  c_eval->add_option("--songs", ev.songs, "test songs (0 = all)")->capture_default_str();
  c_eval->add_option("--seed", ev.seed)->capture_default_str();
  add_decode_flags(c_eval, ev.decode);

  std::string inspect_path;
  int inspect_frames = 32;
  auto* c_inspect = app.add_subcommand("inspect", "print a token file, checkpoint, codebook file or dataset");
  c_inspect->add_option("path", inspect_path)->required();
  c_inspect->add_option("--frames", inspect_frames, "frames to print")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::invalid_argument);
  }

  try {
    const Env env = read_env();
    if (*c_synth) return run_synth(env, synth);
    if (*c_codec) return run_train_codec(env, codec);
    if (*c_train) return run_train_lm(env, tr);
    if (*c_gen) return run_generate(env, gen);
    if (*c_edit) return run_edit(env, ed);
    if (*c_eval) return run_evaluate(env, ev);
    if (*c_inspect) return run_inspect(inspect_path, inspect_frames);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::malformed_data);
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::io);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace stemgen::cli
