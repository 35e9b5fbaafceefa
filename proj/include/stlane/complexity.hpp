#pragma once

#include <string>
#include <vector>

#include "stlane/config.hpp"

namespace stlane {

struct LayerComplexity {
  std::string name;
  std::string group;  // encoder | attention | decoder
  int64_t params = 0;
  int64_t macs = 0;  // already multiplied by per-frame count where applicable
};

// Analytic trainable-parameter and MAC totals. MAC convention: conv
// H_out*W_out*C_out*C_in*kh*kw, linear D_in*D_out, LSTM 8*D^2 (GRU 6*D^2) per
// step; bias, activations, pooling and upsampling count zero. Encoder and
// attention run once per frame, the output conv and decoder once per
// sequence.
struct ComplexityReport {
  std::vector<LayerComplexity> rows;
  int64_t total_params = 0;
  int64_t total_macs = 0;
  int64_t backbone_params = 0;            // encoder + decoder only
  int64_t backbone_single_frame_macs = 0; // encoder once + decoder once
  int64_t encoder_macs_per_frame = 0;
  int64_t attention_macs_per_frame = 0;   // excludes the once-per-sequence output conv
  int64_t decoder_macs = 0;

  double params_m() const { return static_cast<double>(total_params) / 1e6; }
  double macs_g() const { return static_cast<double>(total_macs) / 1e9; }

  std::string table() const;
  std::string key_values() const;
};

ComplexityReport analyze_complexity(const ModelConfig& cfg);
ComplexityReport count_params(const ModelConfig& cfg);
ComplexityReport count_macs(const ModelConfig& cfg);

}  // namespace stlane
