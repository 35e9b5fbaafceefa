#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "stlane/nn_core.hpp"

namespace stlane {

enum class AttentionVariant { tem, st, stfc };
enum class Extractor { lstm, gru };

AttentionVariant parse_variant(const std::string& s);
Extractor parse_extractor(const std::string& s);
const char* variant_name(AttentionVariant v);
const char* extractor_name(Extractor e);
std::string model_name(AttentionVariant v, Extractor e);  // e.g. "ST_Att-UNet_LSTM"

// Everything that determines the network. The paper geometry is 128x256 with
// frames=5; reduced geometries keep the topology (H,W divisible by 16,
// channel schedule divided by channel_div).
struct ModelConfig {
  AttentionVariant variant = AttentionVariant::st;
  Extractor extractor = Extractor::lstm;
  int frames = 5;
  int64_t height = 128;
  int64_t width = 256;
  int channel_div = 1;
  bool stream_hidden = false;  // carry hidden state across sequences at inference

  int64_t map_h() const { return height / 16; }
  int64_t map_w() const { return width / 16; }
  int64_t hidden_size() const { return map_h() * map_w(); }
  std::array<int64_t, 4> channels() const {
    const int64_t d = channel_div;
    return {64 / d, 128 / d, 256 / d, 512 / d};
  }
  void validate() const;  // throws std::invalid_argument
  bool operator==(const ModelConfig&) const = default;
};

enum class LayerKind { conv, maxpool, upsample, attention_layer, recurrent };

// One row of the layer schedule, shapes evaluated at the config geometry.
struct LayerRow {
  std::string name;
  LayerKind kind = LayerKind::conv;
  ConvSpec conv;  // valid when kind == conv
  int64_t in_c = 0, in_h = 0, in_w = 0;
  int64_t out_c = 0, out_h = 0, out_w = 0;
  std::string group;  // encoder | attention | decoder
};

std::vector<LayerRow> layer_schedule(const ModelConfig& cfg);

// Deterministic init: conv/linear weights fan-in scaled normal, biases zero
// except the LSTM forget bias (1.0); Tem/ST attention weights start at 1.0
// (neutral pass-through).
template <class T>
ParamStore<T> init_parameters(const ModelConfig& cfg, uint64_t seed);

}  // namespace stlane
