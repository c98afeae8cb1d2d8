#pragma once

#include <string>

#include <json.hpp>

#include "stemgen/error.hpp"
#include "stemgen/grid_io.hpp"
#include "stemgen/stem_layout.hpp"

namespace stemgen {

/// Condition id used for unconditional generation and condition dropout.
inline constexpr int kNullCondition = -1;

struct ModelConfig {
  int d_model = 128;
  int n_layers = 4;
  int n_heads = 4;
  int ff_mult = 4;
  LayoutSpec layout = default_layout();
  int n_conditions = 4;
  double condition_dropout = 0.1;
  int max_frames = 2048;
  /// Prefix frame k is positioned at k * downsample_factor.
  int downsample_factor = 5;

  void validate() const {
    if (d_model < 1 || n_layers < 1 || n_heads < 1 || ff_mult < 1)
      throw InvalidArgument("model sizes must be positive");
    if (d_model % n_heads != 0) throw InvalidArgument("d_model must be divisible by n_heads");
    if (d_model % 2 != 0) throw InvalidArgument("d_model must be even (sinusoidal positions)");
    if (n_conditions < 1) throw InvalidArgument("n_conditions must be >= 1");
    if (condition_dropout < 0.0 || condition_dropout > 1.0)
      throw InvalidArgument("condition_dropout must lie in [0, 1]");
    if (max_frames < 1) throw InvalidArgument("max_frames must be positive");
    if (downsample_factor < 1) throw InvalidArgument("downsample_factor must be >= 1");
  }
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"d_model", c.d_model},
          {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},
          {"ff_mult", c.ff_mult},
          {"layout", layout_to_json(c.layout)},
          {"n_conditions", c.n_conditions},
          {"condition_dropout", c.condition_dropout},
          {"max_frames", c.max_frames},
          {"downsample_factor", c.downsample_factor}};
}

/// Missing keys keep their defaults.
inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d_model = j.value("d_model", c.d_model);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.ff_mult = j.value("ff_mult", c.ff_mult);
  if (j.contains("layout")) c.layout = layout_from_json(j.at("layout"));
  c.n_conditions = j.value("n_conditions", c.n_conditions);
  c.condition_dropout = j.value("condition_dropout", c.condition_dropout);
  c.max_frames = j.value("max_frames", c.max_frames);
  c.downsample_factor = j.value("downsample_factor", c.downsample_factor);
  c.validate();
  return c;
}

}  // namespace stemgen
