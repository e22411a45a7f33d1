#pragma once

// JSON views of the configuration structs. The apply_* functions update
// only the keys present and reject unknown ones, so a partial file layers
// over defaults.

#include <cstdint>
#include <set>
#include <string>

#include <json.hpp>

#include "orient/encoder.hpp"
#include "orient/error.hpp"
#include "orient/model.hpp"
#include "orient/synth.hpp"
#include "orient/tiling.hpp"
#include "orient/training.hpp"

namespace orient {

using json = nlohmann::json;

inline const char* to_string(CroppingMode m) { return m == CroppingMode::dynamic ? "dynamic" : "global_only"; }
inline const char* to_string(HeadMode m) { return m == HeadMode::multi_layer ? "multi_layer" : "single_layer"; }

inline CroppingMode parse_cropping_mode(const std::string& s) {
  if (s == "dynamic") return CroppingMode::dynamic;
  if (s == "global_only") return CroppingMode::global_only;
  throw InputError("unknown cropping_mode '" + s + "' (expected dynamic or global_only)");
}

inline HeadMode parse_head_mode(const std::string& s) {
  if (s == "multi_layer") return HeadMode::multi_layer;
  if (s == "single_layer") return HeadMode::single_layer;
  throw InputError("unknown head_mode '" + s + "' (expected multi_layer or single_layer)");
}

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw InputError(std::string(what) + " config must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw InputError(std::string("unknown ") + what + " config key '" + k + "'");
  }
}

template <class T>
void read_key(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(std::string("config key '") + key + "' has the wrong type");
  }
}

inline void read_range(const json& j, const char* key, IntRange& r) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
    throw InputError(std::string("config key '") + key + "' must be [lo, hi] integers");
  }
  r = {v[0].get<int>(), v[1].get<int>()};
}

inline void read_range(const json& j, const char* key, RealRange& r) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw InputError(std::string("config key '") + key + "' must be [lo, hi] numbers");
  }
  r = {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace detail

inline json to_json(const EncoderConfig& c) {
  return {{"tile_px", c.tile_px}, {"patch_px", c.patch_px}, {"dim", c.dim},
          {"layers", c.layers},   {"heads", c.heads},       {"mlp_hidden", c.mlp_hidden}};
}

inline void apply_json(const json& j, EncoderConfig& c) {
  detail::reject_unknown(j, {"tile_px", "patch_px", "dim", "layers", "heads", "mlp_hidden"}, "encoder");
  detail::read_key(j, "tile_px", c.tile_px);
  detail::read_key(j, "patch_px", c.patch_px);
  detail::read_key(j, "dim", c.dim);
  detail::read_key(j, "layers", c.layers);
  detail::read_key(j, "heads", c.heads);
  detail::read_key(j, "mlp_hidden", c.mlp_hidden);
}

inline json to_json(const TrainConfig& c) {
  return {{"encoder", to_json(c.encoder)},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"weight_decay", c.weight_decay},
          {"clip_norm", c.clip_norm},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"cropping_mode", to_string(c.cropping_mode)},
          {"head_mode", to_string(c.head_mode)},
          {"max_tiles", c.max_tiles},
          {"threads", c.threads}};
}

inline void apply_json(const json& j, TrainConfig& c) {
  detail::reject_unknown(j,
                         {"encoder", "learning_rate", "beta1", "beta2", "eps", "weight_decay", "clip_norm",
                          "max_epochs", "patience", "batch_size", "seed", "cropping_mode", "head_mode", "max_tiles",
                          "threads"},
                         "train");
  if (j.contains("encoder")) apply_json(j.at("encoder"), c.encoder);
  detail::read_key(j, "learning_rate", c.learning_rate);
  detail::read_key(j, "beta1", c.beta1);
  detail::read_key(j, "beta2", c.beta2);
  detail::read_key(j, "eps", c.eps);
  detail::read_key(j, "weight_decay", c.weight_decay);
  detail::read_key(j, "clip_norm", c.clip_norm);
  detail::read_key(j, "max_epochs", c.max_epochs);
  detail::read_key(j, "patience", c.patience);
  detail::read_key(j, "batch_size", c.batch_size);
  detail::read_key(j, "seed", c.seed);
  detail::read_key(j, "max_tiles", c.max_tiles);
  detail::read_key(j, "threads", c.threads);
  std::string s;
  if (j.contains("cropping_mode")) {
    detail::read_key(j, "cropping_mode", s);
    c.cropping_mode = parse_cropping_mode(s);
  }
  if (j.contains("head_mode")) {
    detail::read_key(j, "head_mode", s);
    c.head_mode = parse_head_mode(s);
  }
}

inline json to_json(const SynthConfig& c) {
  auto ir = [](IntRange r) { return json::array({r.lo, r.hi}); };
  auto rr = [](RealRange r) { return json::array({r.lo, r.hi}); };
  return {{"canvas_w", ir(c.canvas_w)},
          {"aspect", rr(c.aspect)},
          {"margin_left", ir(c.margin_left)},
          {"margin_right", ir(c.margin_right)},
          {"margin_top", ir(c.margin_top)},
          {"margin_bottom", ir(c.margin_bottom)},
          {"line_height", ir(c.line_height)},
          {"line_gap", ir(c.line_gap)},
          {"glyph_w", ir(c.glyph_w)},
          {"line_fill", rr(c.line_fill)},
          {"descender_prob", c.descender_prob},
          {"header_prob", c.header_prob},
          {"fields_prob", c.fields_prob},
          {"noise_amplitude", c.noise_amplitude}};
}

inline void apply_json(const json& j, SynthConfig& c) {
  detail::reject_unknown(j,
                         {"canvas_w", "aspect", "margin_left", "margin_right", "margin_top", "margin_bottom",
                          "line_height", "line_gap", "glyph_w", "line_fill", "descender_prob", "header_prob",
                          "fields_prob", "noise_amplitude"},
                         "synth");
  detail::read_range(j, "canvas_w", c.canvas_w);
  detail::read_range(j, "aspect", c.aspect);
  detail::read_range(j, "margin_left", c.margin_left);
  detail::read_range(j, "margin_right", c.margin_right);
  detail::read_range(j, "margin_top", c.margin_top);
  detail::read_range(j, "margin_bottom", c.margin_bottom);
  detail::read_range(j, "line_height", c.line_height);
  detail::read_range(j, "line_gap", c.line_gap);
  detail::read_range(j, "glyph_w", c.glyph_w);
  detail::read_range(j, "line_fill", c.line_fill);
  detail::read_key(j, "descender_prob", c.descender_prob);
  detail::read_key(j, "header_prob", c.header_prob);
  detail::read_key(j, "fields_prob", c.fields_prob);
  detail::read_key(j, "noise_amplitude", c.noise_amplitude);
}

template <class Config>
Config config_from_json(const json& j) {
  Config c;
  apply_json(j, c);
  return c;
}

}  // namespace orient
