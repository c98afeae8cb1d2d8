#pragma once

// Token-grid file format (text, one record per line):
//
//   STEMGRID 1
//   frame_rate <hz>
//   stems <n>
//   stem <name> <n_streams> <codebook_size>      (n lines, in stream order)
//   delays <d_0> ... <d_{S-1}>
//   frames <T>
//   <T tokens of stream 0>
//   ...
//   <T tokens of stream S-1>
//
// Tokens are decimal integers separated by single spaces. Special ids are
// stored as their numeric value (codebook_size + {0 pad, 1 mask, 2 sep, 3 bos}).

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

#include "stemgen/error.hpp"
#include "stemgen/stem_layout.hpp"

namespace stemgen {

inline constexpr int kGridFormatVersion = 1;

inline void write_grid(std::ostream& os, const TokenGrid& grid) {
  const auto& layout = grid.layout();
  os << "STEMGRID " << kGridFormatVersion << '\n';
  os << "frame_rate " << std::setprecision(17) << layout.frame_rate_hz() << '\n';
  os << "stems " << layout.n_stems() << '\n';
  for (const auto& s : layout.stems())
    os << "stem " << s.name << ' ' << s.n_streams << ' ' << s.codebook_size << '\n';
  os << "delays";
  for (int d : layout.delays()) os << ' ' << d;
  os << '\n' << "frames " << grid.frames() << '\n';
  for (int s = 0; s < grid.n_streams(); ++s) {
    for (int t = 0; t < grid.frames(); ++t) os << (t ? " " : "") << grid.at(s, t);
    os << '\n';
  }
}

inline TokenGrid read_grid(std::istream& is) {
  auto expect = [&](const std::string& key) {
    std::string word;
    if (!(is >> word) || word != key)
      throw MalformedData("token grid: expected '" + key + "', got '" + word + "'");
  };
  expect("STEMGRID");
  int version = 0;
  if (!(is >> version) || version != kGridFormatVersion)
    throw MalformedData("token grid: unsupported format version");
  double rate = 0;
  expect("frame_rate");
  is >> rate;
  int n_stems = 0;
  expect("stems");
  is >> n_stems;
  if (!is || n_stems < 1) throw MalformedData("token grid: bad stem count");
  std::vector<StemSpec> specs(n_stems);
  int total_streams = 0;
  for (auto& s : specs) {
    expect("stem");
    is >> s.name >> s.n_streams >> s.codebook_size;
    if (!is || s.n_streams < 1) throw MalformedData("token grid: bad stem record");
    total_streams += s.n_streams;
  }
  expect("delays");
  std::vector<int> delays(total_streams);
  for (auto& d : delays) is >> d;
  int frames = 0;
  expect("frames");
  is >> frames;
  if (!is || frames < 0) throw MalformedData("token grid: bad header");
  LayoutSpec layout;
  try {
    layout = make_layout_with_delays(std::move(specs), rate, std::move(delays));
  } catch (const InvalidArgument& e) {
    throw MalformedData(std::string("token grid: ") + e.what());
  }
  TokenGrid grid(layout, frames);
  for (int s = 0; s < grid.n_streams(); ++s)
    for (int t = 0; t < frames; ++t) {
      if (!(is >> grid.at(s, t))) throw MalformedData("token grid: truncated payload");
      if (grid.at(s, t) < 0 || grid.at(s, t) >= layout.vocab_size(s))
        throw MalformedData("token grid: token " + std::to_string(grid.at(s, t)) + " out of range at stream " +
                            std::to_string(s) + ", frame " + std::to_string(t));
    }
  return grid;
}

inline void save_grid(const std::string& path, const TokenGrid& grid) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  write_grid(os, grid);
  if (!os) throw IoError("write failed for " + path);
}

inline TokenGrid load_grid(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return read_grid(is);
}

inline nlohmann::json layout_to_json(const LayoutSpec& layout) {
  nlohmann::json j;
  j["frame_rate_hz"] = layout.frame_rate_hz();
  j["delays"] = layout.delays();
  for (const auto& s : layout.stems())
    j["stems"].push_back({{"name", s.name},
                          {"n_streams", s.n_streams},
                          {"codebook_size", s.codebook_size}});
  return j;
}

inline LayoutSpec layout_from_json(const nlohmann::json& j) {
  std::vector<StemSpec> specs;
  for (const auto& s : j.at("stems"))
    specs.push_back({s.at("name").get<std::string>(), s.at("n_streams").get<int>(),
                     s.at("codebook_size").get<int>()});
  return make_layout_with_delays(std::move(specs), j.at("frame_rate_hz").get<double>(),
                                 j.at("delays").get<std::vector<int>>());
}

}  // namespace stemgen
