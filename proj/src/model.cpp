#include "stlane/model.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stlane {

template <class T>
ForwardResult<T> SequenceModel<T>::forward(const std::vector<TensorT<T>>& frames,
                                           ForwardCache<T>* cache) {
  if (static_cast<int>(frames.size()) != cfg_.frames)
    throw std::invalid_argument("forward: expected " + std::to_string(cfg_.frames) +
                                " frames, got " + std::to_string(frames.size()));
  for (size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (f.rank() != 3 || f.dim(0) != 3 || f.dim(1) != cfg_.height || f.dim(2) != cfg_.width)
      throw std::invalid_argument("forward: frame " + std::to_string(i) + " has shape " +
                                  shape_str(f.shape) + ", expected 3x" +
                                  std::to_string(cfg_.height) + "x" + std::to_string(cfg_.width));
    for (T v : f.data)
      if (!(v >= T(0) && v <= T(1)))
        throw std::invalid_argument("forward: frame " + std::to_string(i) +
                                    " has values outside [0,1]");
  }

  const int n = cfg_.frames;
  if (cache) {
    cache->encoders.resize(static_cast<size_t>(n));
    cache->k_in.resize(static_cast<size_t>(n));
  }

  std::vector<TensorT<T>> xs;
  xs.reserve(static_cast<size_t>(n));
  std::array<TensorT<T>, 4> last_skips;
  for (int i = 0; i < n; ++i) {
    EncoderOutput<T> enc = encode_frame(frames[static_cast<size_t>(i)], params_, cfg_,
                                        cache ? &cache->encoders[static_cast<size_t>(i)] : nullptr);
    xs.push_back(reduce_bottleneck(enc.bottleneck, params_,
                                   cache ? &cache->k_in[static_cast<size_t>(i)] : nullptr));
    if (i == n - 1) last_skips = std::move(enc.skips);
  }

  const int64_t d = cfg_.hidden_size();
  TensorT<T> h0 = (cfg_.stream_hidden && streaming_) ? stream_state_.h : TensorT<T>({d});
  TensorT<T> c0 = (cfg_.stream_hidden && streaming_) ? stream_state_.c : TensorT<T>({d});

  ForwardResult<T> out;
  RecurrentState<T> final_state;
  TensorT<T> x_out =
      attention_forward(xs, h0, c0, cfg_.variant, cfg_.extractor, params_, cfg_.map_h(),
                        cfg_.map_w(), &out.trace, cache ? &cache->attention : nullptr,
                        &final_state);
  if (cfg_.stream_hidden) {
    stream_state_ = final_state;
    streaming_ = true;
  }

  out.logits = decode(x_out, last_skips, params_, cfg_, cache ? &cache->decoder : nullptr);
  if (!out.logits.all_finite()) throw std::runtime_error("forward: non-finite logits");
  return out;
}

template <class T>
void SequenceModel<T>::backward(const TensorT<T>& dlogits, ForwardCache<T>& cache) {
  TensorT<T> d_x_out;
  std::array<TensorT<T>, 4> d_skips;
  decode_backward(dlogits, params_, cfg_, cache.decoder, d_x_out, d_skips);

  std::vector<TensorT<T>> d_xs =
      attention_backward(d_x_out, cfg_.variant, cfg_.extractor, params_, cache.attention);

  const int n = cfg_.frames;
  auto& k_in_w = params_.at("In_Attention_Conv_5_1.weight");
  ConvSpec k_in_spec;
  k_in_spec.in_channels = k_in_w.value.dim(1);
  k_in_spec.out_channels = 1;
  k_in_spec.kh = k_in_spec.kw = 1;
  k_in_spec.ph = k_in_spec.pw = 0;
  k_in_spec.name = "In_Attention_Conv_5_1";

  for (int i = n - 1; i >= 0; --i) {
    TensorT<T> d_map =
        d_xs[static_cast<size_t>(i)].reshaped({int64_t(1), cfg_.map_h(), cfg_.map_w()});
    TensorT<T> d_bottleneck =
        conv2d_backward(d_map, k_in_spec, k_in_w.value, cache.k_in[static_cast<size_t>(i)],
                        k_in_w.grad, &params_.at("In_Attention_Conv_5_1.bias").grad);
    encode_frame_backward(d_bottleneck, i == n - 1 ? &d_skips : nullptr, params_, cfg_,
                          cache.encoders[static_cast<size_t>(i)]);
  }
}

template <class T>
LaneMask predict_mask(const TensorT<T>& logits) {
  if (logits.rank() != 3 || logits.dim(0) != 2)
    throw std::invalid_argument("predict_mask: expected 2xHxW logits, got " +
                                shape_str(logits.shape));
  const int64_t h = logits.dim(1), w = logits.dim(2);
  LaneMask mask(h, w);
  const T* bg = logits.ptr();
  const T* lane = logits.ptr() + h * w;
  for (int64_t i = 0; i < h * w; ++i) mask.data[static_cast<size_t>(i)] = lane[i] > bg[i] ? 1 : 0;
  return mask;
}

namespace {

constexpr char kMagic[8] = {'S', 'T', 'L', 'A', 'N', 'E', '0', '1'};

void put_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

std::string config_line(const ModelConfig& cfg) {
  std::ostringstream os;
  os << "config variant=" << variant_name(cfg.variant)
     << " extractor=" << extractor_name(cfg.extractor) << " frames=" << cfg.frames
     << " height=" << cfg.height << " width=" << cfg.width << " channel_div=" << cfg.channel_div
     << " stream_hidden=" << (cfg.stream_hidden ? 1 : 0);
  return os.str();
}

ModelConfig parse_config_line(const std::string& line) {
  std::istringstream is(line);
  std::string tag;
  is >> tag;
  if (tag != "config") throw std::runtime_error("checkpoint: manifest missing config line");
  ModelConfig cfg;
  std::string kv;
  while (is >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::runtime_error("checkpoint: bad config token " + kv);
    const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
    if (key == "variant")
      cfg.variant = parse_variant(val);
    else if (key == "extractor")
      cfg.extractor = parse_extractor(val);
    else if (key == "frames")
      cfg.frames = std::stoi(val);
    else if (key == "height")
      cfg.height = std::stoll(val);
    else if (key == "width")
      cfg.width = std::stoll(val);
    else if (key == "channel_div")
      cfg.channel_div = std::stoi(val);
    else if (key == "stream_hidden")
      cfg.stream_hidden = val == "1";
    else
      throw std::runtime_error("checkpoint: unknown config key " + key);
  }
  return cfg;
}

}  // namespace

void save_checkpoint(const ParamStore<float>& params, const ModelConfig& cfg,
                     const std::filesystem::path& path) {
  std::ostringstream manifest;
  manifest << config_line(cfg) << "\n";
  uint64_t offset = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    manifest << "param " << p.name << " " << shape_str(p.value.shape) << " " << offset << "\n";
    offset += static_cast<uint64_t>(p.value.numel()) * 4;
  }
  const std::string mtext = manifest.str();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  os.write(kMagic, 8);
  put_u64(os, mtext.size());
  os.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& v = params[i].value;
    static_assert(sizeof(float) == 4);
    os.write(reinterpret_cast<const char*>(v.ptr()),
             static_cast<std::streamsize>(v.numel() * 4));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

std::pair<ParamStore<float>, ModelConfig> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  const uint64_t mlen = get_u64(is);
  std::string mtext(mlen, '\0');
  is.read(mtext.data(), static_cast<std::streamsize>(mlen));
  if (!is) throw std::runtime_error("checkpoint: truncated manifest in " + path.string());

  std::istringstream ms(mtext);
  std::string line;
  if (!std::getline(ms, line)) throw std::runtime_error("checkpoint: empty manifest");
  const ModelConfig cfg = parse_config_line(line);

  // Expected census from the config echo.
  ParamStore<float> expected = init_parameters<float>(cfg, 0);

  ParamStore<float> out;
  uint64_t expect_offset = 0;
  while (std::getline(ms, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag, name, shape_text;
    uint64_t offset = 0;
    ls >> tag >> name >> shape_text >> offset;
    if (tag != "param" || !ls)
      throw std::runtime_error("checkpoint: malformed manifest line: " + line);
    if (!expected.contains(name))
      throw std::runtime_error("checkpoint: unknown parameter name " + name);
    std::vector<int64_t> shape;
    std::istringstream ss(shape_text);
    std::string dim;
    while (std::getline(ss, dim, 'x')) shape.push_back(std::stoll(dim));
    if (shape != expected.at(name).value.shape)
      throw std::runtime_error("checkpoint: shape mismatch for " + name + ": " + shape_text +
                               " vs expected " + shape_str(expected.at(name).value.shape));
    if (offset != expect_offset)
      throw std::runtime_error("checkpoint: bad payload offset for " + name);
    auto& p = out.add(name, shape);
    is.read(reinterpret_cast<char*>(p.value.ptr()),
            static_cast<std::streamsize>(p.value.numel() * 4));
    if (!is) throw std::runtime_error("checkpoint: truncated payload at " + name);
    expect_offset += static_cast<uint64_t>(p.value.numel()) * 4;
  }
  for (size_t i = 0; i < expected.size(); ++i) {
    if (!out.contains(expected[i].name))
      throw std::runtime_error("checkpoint: manifest missing parameter " + expected[i].name);
  }
  return {std::move(out), cfg};
}

namespace {

ActivationMap channel_mean(const std::string& name, const Tensor& t) {
  ActivationMap m;
  m.name = name;
  m.height = t.dim(1);
  m.width = t.dim(2);
  m.values.assign(static_cast<size_t>(m.height * m.width), 0.0f);
  const int64_t plane = m.height * m.width;
  for (int64_t c = 0; c < t.dim(0); ++c)
    for (int64_t i = 0; i < plane; ++i)
      m.values[static_cast<size_t>(i)] += t.data[static_cast<size_t>(c * plane + i)];
  for (auto& v : m.values) v /= static_cast<float>(t.dim(0));
  return m;
}

}  // namespace

std::vector<ActivationMap> visualize_activation(SequenceModel<float>& model,
                                                const std::vector<Tensor>& frames,
                                                const std::string& stage) {
  ForwardCache<float> cache;
  ForwardResult<float> result = model.forward(frames, &cache);
  const int n = model.config().frames;

  // encoder stages: per-frame maps from the block's final conv output
  int conv_idx = -1;
  if (stage == "In_ConvBlock") conv_idx = 1;
  if (stage == "Down_ConvBlock_1") conv_idx = 3;
  if (stage == "Down_ConvBlock_2") conv_idx = 5;
  if (stage == "Down_ConvBlock_3") conv_idx = 7;
  if (stage == "Down_ConvBlock_4") conv_idx = 9;
  std::vector<ActivationMap> maps;
  if (conv_idx >= 0) {
    for (int i = 0; i < n; ++i)
      maps.push_back(channel_mean(
          stage + "_frame" + std::to_string(i + 1),
          cache.encoders[static_cast<size_t>(i)].conv[static_cast<size_t>(conv_idx)].output));
    return maps;
  }
  if (stage == "Up_ConvBlock_4") conv_idx = 1;
  if (stage == "Up_ConvBlock_3") conv_idx = 3;
  if (stage == "Up_ConvBlock_2") conv_idx = 5;
  if (stage == "Up_ConvBlock_1") conv_idx = 7;
  if (conv_idx >= 0) {
    maps.push_back(channel_mean(stage, cache.decoder.conv[static_cast<size_t>(conv_idx)].output));
    return maps;
  }
  if (stage == "Out_ConvBlock") {
    maps.push_back(channel_mean(stage, result.logits));
    return maps;
  }
  if (stage == "Attention") {
    for (int i = 0; i < n; ++i) {
      ActivationMap m;
      m.name = "Attention_frame" + std::to_string(i + 1);
      m.height = model.config().map_h();
      m.width = model.config().map_w();
      const auto& w = result.trace.w[static_cast<size_t>(i)];
      m.values.assign(w.data.begin(), w.data.end());
      maps.push_back(std::move(m));
    }
    return maps;
  }
  throw std::invalid_argument("visualize_activation: unknown stage " + stage);
}

template class SequenceModel<float>;
template class SequenceModel<double>;
template LaneMask predict_mask<float>(const TensorT<float>&);
template LaneMask predict_mask<double>(const TensorT<double>&);

}  // namespace stlane
