#pragma once

// Checkpoint container (binary, little-endian):
//
//   "SGCK" magic
//   u32 format version
//   u32 scalar width in bytes (4 = float32, 8 = float64)
//   u64 metadata length, then UTF-8 JSON metadata:
//       {"model": <ModelConfig>, "step": n, "rng_state": "...", "extra": {...}}
//   u32 array count, then per array:
//       u32 name length, name bytes, u32 rows, u32 cols, rows*cols scalars
//
// Model parameters use their own names; optimizer moments are stored as
// "adamw.m" / "adamw.v" (1 x N) with the step in metadata "adamw_t".

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stemgen/error.hpp"
#include "stemgen/model_config.hpp"
#include "stemgen/optimizer.hpp"
#include "stemgen/transformer.hpp"

namespace stemgen {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

template <class Scalar>
struct ModelCheckpoint {
  Transformer<Scalar> model;
  std::optional<AdamWState<Scalar>> optimizer;
  std::int64_t step = 0;
  std::string rng_state;
  nlohmann::json extra = nlohmann::json::object();
};

namespace detail {

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw MalformedData("checkpoint: truncated");
  return v;
}

template <class Scalar>
void put_array(std::ostream& os, const std::string& name, std::uint32_t rows, std::uint32_t cols,
               const Scalar* data) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put(os, rows);
  put(os, cols);
  os.write(reinterpret_cast<const char*>(data),
           static_cast<std::streamsize>(sizeof(Scalar) * rows * cols));
}

struct RawArray {
  std::uint32_t rows = 0, cols = 0;
  std::vector<char> bytes;
};

struct RawCheckpoint {
  std::uint32_t scalar_bytes = 0;
  nlohmann::json meta;
  std::vector<std::pair<std::string, RawArray>> arrays;
};

inline RawCheckpoint read_raw(const std::string& path) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SGCK", 4) != 0) throw MalformedData(path + ": not a checkpoint");
  if (get<std::uint32_t>(is) != kCheckpointFormatVersion)
    throw MalformedData(path + ": unsupported checkpoint version");
  RawCheckpoint raw;
  raw.scalar_bytes = get<std::uint32_t>(is);
  if (raw.scalar_bytes != 4 && raw.scalar_bytes != 8)
    throw MalformedData(path + ": unsupported scalar width");
  const auto meta_len = get<std::uint64_t>(is);
  std::string meta(meta_len, '\0');
  is.read(meta.data(), static_cast<std::streamsize>(meta_len));
  if (!is) throw MalformedData(path + ": truncated metadata");
  raw.meta = nlohmann::json::parse(meta);
  const auto n = get<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto len = get<std::uint32_t>(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    RawArray a;
    a.rows = get<std::uint32_t>(is);
    a.cols = get<std::uint32_t>(is);
    a.bytes.resize(static_cast<std::size_t>(a.rows) * a.cols * raw.scalar_bytes);
    is.read(a.bytes.data(), static_cast<std::streamsize>(a.bytes.size()));
    if (!is) throw MalformedData(path + ": truncated array " + name);
    raw.arrays.emplace_back(std::move(name), std::move(a));
  }
  return raw;
}

}  // namespace detail

/// 32 or 64, read from the header without loading arrays.
inline int checkpoint_precision(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SGCK", 4) != 0) throw MalformedData(path + ": not a checkpoint");
  detail::get<std::uint32_t>(is);
  return static_cast<int>(detail::get<std::uint32_t>(is)) * 8;
}

/// `allow_non_finite` is for diagnostic dumps of a diverged run; such files
/// are rejected by load_checkpoint.
template <class Scalar>
void save_checkpoint(const std::string& path, const ModelCheckpoint<Scalar>& ck, bool allow_non_finite = false) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  const auto& params = ck.model.parameters();
  if (!allow_non_finite)
    for (Scalar v : params.values())
      if (!std::isfinite(static_cast<double>(v)))
        throw NumericalError("refusing to save a checkpoint with non-finite parameters");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  nlohmann::json meta = {{"model", to_json(ck.model.config())},
                         {"step", ck.step},
                         {"rng_state", ck.rng_state},
                         {"extra", ck.extra}};
  if (ck.optimizer) meta["adamw_t"] = ck.optimizer->t;
  const std::string meta_s = meta.dump();
  os.write("SGCK", 4);
  detail::put<std::uint32_t>(os, kCheckpointFormatVersion);
  detail::put<std::uint32_t>(os, sizeof(Scalar));
  detail::put<std::uint64_t>(os, meta_s.size());
  os.write(meta_s.data(), static_cast<std::streamsize>(meta_s.size()));
  const bool with_opt = ck.optimizer && ck.optimizer->m.size() == params.size();
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(params.infos().size() + (with_opt ? 2 : 0)));
  for (const auto& info : params.infos())
    detail::put_array(os, info.name, static_cast<std::uint32_t>(info.rows),
                      static_cast<std::uint32_t>(info.cols), params.values().data() + info.offset);
  if (with_opt) {
    const auto n = static_cast<std::uint32_t>(params.size());
    detail::put_array(os, "adamw.m", 1u, n, ck.optimizer->m.data());
    detail::put_array(os, "adamw.v", 1u, n, ck.optimizer->v.data());
  }
  if (!os) throw IoError("write failed for " + path);
}

template <class Scalar>
ModelCheckpoint<Scalar> load_checkpoint(const std::string& path) {
  auto raw = detail::read_raw(path);
  if (raw.scalar_bytes != sizeof(Scalar))
    throw InvalidArgument(path + ": checkpoint precision is " + std::to_string(raw.scalar_bytes * 8) +
                          "-bit");
  ModelCheckpoint<Scalar> ck{Transformer<Scalar>(model_config_from_json(raw.meta.at("model"))),
                             std::nullopt, raw.meta.value("step", std::int64_t{0}),
                             raw.meta.value("rng_state", std::string{}),
                             raw.meta.value("extra", nlohmann::json::object())};
  auto& params = ck.model.parameters();
  std::vector<bool> seen(params.infos().size(), false);
  std::vector<Scalar> m, v;
  for (auto& [name, a] : raw.arrays) {
    const Scalar* data = reinterpret_cast<const Scalar*>(a.bytes.data());
    if (name == "adamw.m" || name == "adamw.v") {
      if (a.cols != params.size()) throw MalformedData(path + ": optimizer state size mismatch");
      (name == "adamw.m" ? m : v).assign(data, data + a.cols);
      continue;
    }
    const auto id = params.id(name);
    const auto& info = params.infos()[id];
    if (static_cast<int>(a.rows) != info.rows || static_cast<int>(a.cols) != info.cols)
      throw MalformedData(path + ": shape mismatch for " + name);
    std::memcpy(params.values().data() + info.offset, data, a.bytes.size());
    seen[id] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) throw MalformedData(path + ": missing array " + params.infos()[i].name);
  for (Scalar x : params.values())
    if (!std::isfinite(static_cast<double>(x))) throw MalformedData(path + ": non-finite parameter");
  if (!m.empty() && !v.empty())
    ck.optimizer = AdamWState<Scalar>{std::move(m), std::move(v), raw.meta.value("adamw_t", std::int64_t{0})};
  return ck;
}

}  // namespace stemgen
