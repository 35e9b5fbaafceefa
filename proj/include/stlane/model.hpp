#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "stlane/attention.hpp"
#include "stlane/backbone.hpp"
#include "stlane/config.hpp"

namespace stlane {

template <class T>
struct ForwardCache {
  std::vector<EncoderCache<T>> encoders;  // one per frame
  std::vector<Conv2dCache<T>> k_in;       // one per frame
  AttentionCache<T> attention;
  DecoderCache<T> decoder;
};

template <class T>
struct ForwardResult {
  TensorT<T> logits;  // 2 x H x W, channel 0 background / 1 lane
  AttentionTrace<T> trace;
};

// Sequence-to-one model: encode N frames, attention+extractor over their
// reduced bottlenecks, decode with the last frame's skips.
template <class T>
class SequenceModel {
public:
  SequenceModel(ModelConfig cfg, uint64_t seed)
      : cfg_(std::move(cfg)), params_(init_parameters<T>(cfg_, seed)) {
    cfg_.validate();
  }
  SequenceModel(ModelConfig cfg, ParamStore<T> params)
      : cfg_(std::move(cfg)), params_(std::move(params)) {
    cfg_.validate();
  }

  ForwardResult<T> forward(const std::vector<TensorT<T>>& frames,
                           ForwardCache<T>* cache = nullptr);
  // Accumulates parameter gradients; frames are processed in reverse order.
  void backward(const TensorT<T>& dlogits, ForwardCache<T>& cache);

  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }
  void reset_stream() { streaming_ = false; }

private:
  ModelConfig cfg_;
  ParamStore<T> params_;
  RecurrentState<T> stream_state_;
  bool streaming_ = false;
};

// Per-pixel argmax over the two channels; ties go to background.
template <class T>
LaneMask predict_mask(const TensorT<T>& logits);

// Checkpoint: magic "STLANE01", length-prefixed UTF-8 manifest (config echo +
// one line per parameter with shape and payload byte offset), then raw
// little-endian float32 blobs in manifest order.
void save_checkpoint(const ParamStore<float>& params, const ModelConfig& cfg,
                     const std::filesystem::path& path);
std::pair<ParamStore<float>, ModelConfig> load_checkpoint(const std::filesystem::path& path);

// Channel-mean activation maps for a named Table stage ("In_ConvBlock",
// "Down_ConvBlock_1".."4": one map per frame; "Up_ConvBlock_4".."1",
// "Out_ConvBlock": a single map; "Attention": per-frame attention weights
// over the bottleneck grid).
struct ActivationMap {
  std::string name;
  int64_t height = 0, width = 0;
  std::vector<float> values;
};
std::vector<ActivationMap> visualize_activation(SequenceModel<float>& model,
                                                const std::vector<Tensor>& frames,
                                                const std::string& stage);

}  // namespace stlane
