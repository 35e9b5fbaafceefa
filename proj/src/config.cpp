#include "stlane/config.hpp"

#include <cmath>
#include <stdexcept>

#include "stlane/prng.hpp"

namespace stlane {

AttentionVariant parse_variant(const std::string& s) {
  if (s == "tem") return AttentionVariant::tem;
  if (s == "st") return AttentionVariant::st;
  if (s == "stfc") return AttentionVariant::stfc;
  throw std::invalid_argument("unknown attention variant: " + s + " (expected tem|st|stfc)");
}

Extractor parse_extractor(const std::string& s) {
  if (s == "lstm") return Extractor::lstm;
  if (s == "gru") return Extractor::gru;
  throw std::invalid_argument("unknown extractor: " + s + " (expected lstm|gru)");
}

const char* variant_name(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::tem: return "tem";
    case AttentionVariant::st: return "st";
    default: return "stfc";
  }
}

const char* extractor_name(Extractor e) { return e == Extractor::lstm ? "lstm" : "gru"; }

std::string model_name(AttentionVariant v, Extractor e) {
  std::string a = v == AttentionVariant::tem ? "Tem_Att"
                  : v == AttentionVariant::st ? "ST_Att"
                                              : "STFC_Att";
  return a + "-UNet_" + (e == Extractor::lstm ? "LSTM" : "GRU");
}

void ModelConfig::validate() const {
  if (frames < 1) throw std::invalid_argument("config: frames must be >= 1");
  if (height < 16 || width < 16 || height % 16 || width % 16)
    throw std::invalid_argument("config: height/width must be positive multiples of 16");
  if (channel_div < 1 || 64 % channel_div)
    throw std::invalid_argument("config: channel_div must divide 64");
}

namespace {

ConvSpec conv3x3(std::string name, int64_t cin, int64_t cout) {
  ConvSpec s;
  s.in_channels = cin;
  s.out_channels = cout;
  s.kh = s.kw = 3;
  s.ph = s.pw = 1;
  s.relu = true;
  s.name = std::move(name);
  return s;
}

ConvSpec conv1x1(std::string name, int64_t cin, int64_t cout) {
  ConvSpec s;
  s.in_channels = cin;
  s.out_channels = cout;
  s.kh = s.kw = 1;
  s.ph = s.pw = 0;
  s.relu = false;
  s.name = std::move(name);
  return s;
}

}  // namespace

std::vector<LayerRow> layer_schedule(const ModelConfig& cfg) {
  cfg.validate();
  const auto c = cfg.channels();
  const int64_t d = cfg.hidden_size();
  std::vector<LayerRow> rows;
  int64_t h = cfg.height, w = cfg.width;

  auto push_conv = [&](const ConvSpec& spec, const char* group) {
    LayerRow r;
    r.name = spec.name;
    r.kind = LayerKind::conv;
    r.conv = spec;
    r.in_c = spec.in_channels;
    r.in_h = h;
    r.in_w = w;
    r.out_c = spec.out_channels;
    r.out_h = conv_out_extent(h, spec.kh, spec.ph, spec.stride);
    r.out_w = conv_out_extent(w, spec.kw, spec.pw, spec.stride);
    r.group = group;
    rows.push_back(r);
  };
  auto push_pool = [&](std::string name, int64_t ch) {
    LayerRow r;
    r.name = std::move(name);
    r.kind = LayerKind::maxpool;
    r.in_c = r.out_c = ch;
    r.in_h = h;
    r.in_w = w;
    h /= 2;
    w /= 2;
    r.out_h = h;
    r.out_w = w;
    r.group = "encoder";
    rows.push_back(r);
  };
  auto push_up = [&](std::string name, int64_t ch) {
    LayerRow r;
    r.name = std::move(name);
    r.kind = LayerKind::upsample;
    r.in_c = r.out_c = ch;
    r.in_h = h;
    r.in_w = w;
    h *= 2;
    w *= 2;
    r.out_h = h;
    r.out_w = w;
    r.group = "decoder";
    rows.push_back(r);
  };

  // encoder
  push_conv(conv3x3("In_Conv_1", 3, c[0]), "encoder");
  push_conv(conv3x3("In_Conv_2", c[0], c[0]), "encoder");
  const int64_t down_in[4] = {c[0], c[1], c[2], c[3]};
  const int64_t down_out[4] = {c[1], c[2], c[3], c[3]};
  for (int b = 0; b < 4; ++b) {
    const std::string i = std::to_string(b + 1);
    push_pool("Maxpool_" + i, down_in[b]);
    push_conv(conv3x3("Down_Conv_" + i + "_1", down_in[b], down_out[b]), "encoder");
    push_conv(conv3x3("Down_Conv_" + i + "_2", down_out[b], down_out[b]), "encoder");
  }

  // attention module
  push_conv(conv1x1("In_Attention_Conv_5_1", c[3], 1), "attention");
  for (int k = 1; k <= 3; ++k) {
    LayerRow r;
    r.name = "AttentionLayer_" + std::to_string(k);
    r.kind = LayerKind::attention_layer;
    r.in_c = r.out_c = d;
    r.in_h = r.in_w = r.out_h = r.out_w = 1;
    r.group = "attention";
    rows.push_back(r);
  }
  {
    LayerRow r;
    r.name = cfg.extractor == Extractor::lstm ? "LSTM" : "GRU";
    r.kind = LayerKind::recurrent;
    r.in_c = r.out_c = d;
    r.in_h = r.in_w = r.out_h = r.out_w = 1;
    r.group = "attention";
    rows.push_back(r);
  }
  push_conv(conv1x1("Out_Attention_Conv_5_2", 1, c[3]), "attention");

  // decoder
  const int64_t up_in[4] = {2 * c[3], 2 * c[2], 2 * c[1], 2 * c[0]};
  const int64_t up_out[4] = {c[2], c[1], c[0], c[0]};
  for (int b = 0; b < 4; ++b) {
    const std::string blk = std::to_string(4 - b);  // blocks 4,3,2,1
    push_up("UpsamplingBilinear2D_" + std::to_string(b + 1), up_in[b] / 2);
    push_conv(conv3x3("Up_Conv_" + blk + "_1", up_in[b], up_out[b]), "decoder");
    push_conv(conv3x3("Up_Conv_" + blk + "_2", up_out[b], up_out[b]), "decoder");
  }
  push_conv(conv1x1("Out_Conv", c[0], 2), "decoder");
  return rows;
}

namespace {

template <class T>
void fill_normal(TensorT<T>& t, SplitMix64& rng, double scale) {
  for (auto& v : t.data) v = static_cast<T>(rng.normal() * scale);
}

template <class T>
void add_gate(ParamStore<T>& ps, const std::string& prefix, const char* gate, int64_t d,
              SplitMix64& rng, double forget_bias) {
  auto& p = ps.add(prefix + ".P_" + gate, {d, d});
  fill_normal(p.value, rng, 1.0 / std::sqrt(static_cast<double>(d)));
  auto& q = ps.add(prefix + ".Q_" + gate, {d, d});
  fill_normal(q.value, rng, 1.0 / std::sqrt(static_cast<double>(d)));
  auto& b = ps.add(prefix + ".b_" + gate, {d});
  b.value.fill(static_cast<T>(forget_bias));
}

}  // namespace

template <class T>
ParamStore<T> init_parameters(const ModelConfig& cfg, uint64_t seed) {
  const auto rows = layer_schedule(cfg);
  const int64_t d = cfg.hidden_size();
  SplitMix64 rng(SplitMix64::derive(seed, 0x706172616d73ull));  // "params" stream
  ParamStore<T> ps;
  for (const auto& row : rows) {
    switch (row.kind) {
      case LayerKind::conv: {
        const auto& s = row.conv;
        auto& wparam = ps.add(row.name + ".weight", {s.out_channels, s.in_channels, s.kh, s.kw});
        fill_normal(wparam.value, rng,
                    1.0 / std::sqrt(static_cast<double>(s.in_channels * s.kh * s.kw)));
        ps.add(row.name + ".bias", {s.out_channels});
        break;
      }
      case LayerKind::attention_layer: {
        switch (cfg.variant) {
          case AttentionVariant::tem:
            ps.add(row.name + ".weight", {1}).value.fill(T(1));
            break;
          case AttentionVariant::st:
            ps.add(row.name + ".weight", {d}).value.fill(T(1));
            break;
          case AttentionVariant::stfc: {
            auto& wparam = ps.add(row.name + ".weight", {d, d});
            fill_normal(wparam.value, rng, 1.0 / std::sqrt(static_cast<double>(d)));
            ps.add(row.name + ".bias", {d});
            break;
          }
        }
        break;
      }
      case LayerKind::recurrent: {
        if (cfg.extractor == Extractor::lstm) {
          add_gate(ps, "LSTM", "f", d, rng, 1.0);  // forget bias 1: retain memory at init
          add_gate(ps, "LSTM", "i", d, rng, 0.0);
          add_gate(ps, "LSTM", "c", d, rng, 0.0);
          add_gate(ps, "LSTM", "o", d, rng, 0.0);
        } else {
          add_gate(ps, "GRU", "r", d, rng, 0.0);
          add_gate(ps, "GRU", "z", d, rng, 0.0);
          add_gate(ps, "GRU", "h", d, rng, 0.0);
        }
        break;
      }
      default: break;  // pools/upsamples carry no parameters
    }
  }
  return ps;
}

template ParamStore<float> init_parameters<float>(const ModelConfig&, uint64_t);
template ParamStore<double> init_parameters<double>(const ModelConfig&, uint64_t);

}  // namespace stlane
