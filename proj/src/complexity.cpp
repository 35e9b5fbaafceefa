#include "stlane/complexity.hpp"

#include <iomanip>
#include <sstream>

namespace stlane {
namespace {

int64_t conv_params(const ConvSpec& s) {
  return (s.in_channels * s.kh * s.kw + 1) * s.out_channels;
}

int64_t conv_macs_once(const LayerRow& r) {
  return r.out_h * r.out_w * r.conv.out_channels * r.conv.in_channels * r.conv.kh * r.conv.kw;
}

}  // namespace

ComplexityReport analyze_complexity(const ModelConfig& cfg) {
  const auto rows = layer_schedule(cfg);
  const int64_t d = cfg.hidden_size();
  const int64_t n = cfg.frames;
  ComplexityReport rep;

  for (const auto& row : rows) {
    LayerComplexity lc;
    lc.name = row.name;
    lc.group = row.group;
    switch (row.kind) {
      case LayerKind::conv: {
        lc.params = conv_params(row.conv);
        const int64_t once = conv_macs_once(row);
        // encoder convs and the attention input conv run per frame; the
        // attention output conv and decoder run once per sequence
        const bool per_frame = row.group == "encoder" || row.name == "In_Attention_Conv_5_1";
        lc.macs = per_frame ? once * n : once;
        break;
      }
      case LayerKind::attention_layer: {
        switch (cfg.variant) {
          case AttentionVariant::tem:
            lc.params = 1;
            lc.macs = d * n;  // scalar broadcast multiply per frame
            break;
          case AttentionVariant::st:
            lc.params = d;
            lc.macs = d * n;  // elementwise multiply per frame
            break;
          case AttentionVariant::stfc:
            lc.params = d * d + d;
            lc.macs = d * d * n;  // affine map per frame
            break;
        }
        break;
      }
      case LayerKind::recurrent: {
        const int64_t gates = cfg.extractor == Extractor::lstm ? 4 : 3;
        lc.params = gates * (d * d + d * d + d);
        lc.macs = gates * 2 * d * d * n;
        break;
      }
      default:
        break;  // pooling/upsampling: zero params, zero MACs
    }
    rep.rows.push_back(lc);
  }

  for (const auto& lc : rep.rows) {
    rep.total_params += lc.params;
    rep.total_macs += lc.macs;
    if (lc.group != "attention") rep.backbone_params += lc.params;
    if (lc.group == "encoder") rep.encoder_macs_per_frame += lc.macs / n;
    if (lc.group == "decoder") rep.decoder_macs += lc.macs;
    if (lc.group == "attention" && lc.name != "Out_Attention_Conv_5_2")
      rep.attention_macs_per_frame += lc.macs / n;
  }
  rep.backbone_single_frame_macs = rep.encoder_macs_per_frame + rep.decoder_macs;
  return rep;
}

ComplexityReport count_params(const ModelConfig& cfg) { return analyze_complexity(cfg); }
ComplexityReport count_macs(const ModelConfig& cfg) { return analyze_complexity(cfg); }

std::string ComplexityReport::table() const {
  std::ostringstream os;
  os << std::left << std::setw(26) << "layer" << std::setw(11) << "group" << std::right
     << std::setw(12) << "params" << std::setw(16) << "macs" << "\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(26) << r.name << std::setw(11) << r.group << std::right
       << std::setw(12) << r.params << std::setw(16) << r.macs << "\n";
  }
  os << std::left << std::setw(37) << "total" << std::right << std::setw(12) << total_params
     << std::setw(16) << total_macs << "\n";
  os << std::fixed << std::setprecision(3);
  os << "params_m " << params_m() << "  macs_g " << macs_g() << "\n";
  return os.str();
}

std::string ComplexityReport::key_values() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  os << "total_params=" << total_params << "\n";
  os << "params_m=" << params_m() << "\n";
  os << "total_macs=" << total_macs << "\n";
  os << "macs_g=" << macs_g() << "\n";
  os << "backbone_params=" << backbone_params << "\n";
  os << "backbone_single_frame_macs=" << backbone_single_frame_macs << "\n";
  os << "backbone_single_frame_macs_g="
     << static_cast<double>(backbone_single_frame_macs) / 1e9 << "\n";
  os << "encoder_macs_per_frame=" << encoder_macs_per_frame << "\n";
  os << "attention_macs_per_frame=" << attention_macs_per_frame << "\n";
  os << "decoder_macs=" << decoder_macs << "\n";
  return os.str();
}

}  // namespace stlane
