#pragma once

#include <vector>

#include "stlane/tensor.hpp"

namespace stlane {

struct LossConfig {
  double lane_weight = 1.0;        // w_l
  double background_weight = 1.0;  // w_nl
  double epsilon = 1e-7;           // log clamp
};

template <class T>
struct LossResult {
  double loss = 0.0;
  TensorT<T> dlogits;  // 2 x H x W
};

// Lane-channel probability of the two-channel logits (channel softmax).
template <class T>
TensorT<T> lane_probability(const TensorT<T>& logits);

// Mean over pixels of -[w_l y log p + w_nl (1-y) log(1-p)] with p clamped to
// [eps, 1-eps]; the gradient is w.r.t. the logits behind the channel softmax.
template <class T>
LossResult<T> weighted_bce(const TensorT<T>& lane_prob, const LaneMask& target,
                           const LossConfig& cfg);

// Normalized inverse class frequency: w_l = P/(2 P_lane), w_nl = P/(2 P_bg).
LossConfig class_weights_from_masks(const std::vector<LaneMask>& masks);

struct ConfusionCounts {
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  int64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

ConfusionCounts confusion(const LaneMask& pred, const LaneMask& gt);

struct SegMetrics {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
};

// Zero-denominator conventions: precision/recall 0 when undefined, f1 0 when
// precision+recall is 0.
SegMetrics metrics(const ConfusionCounts& c);

struct PRCurveConfig {
  int thresholds = 100;    // V
  bool fixed_grid = false; // default: order-statistic thresholds of the map
};

// Area under the per-frame PR curve: anchor (recall 0, precision 1), V
// threshold points descending, and a final all-positive point; AP is the sum
// of precision weighted by recall increments.
template <class T>
double average_precision(const TensorT<T>& lane_prob, const LaneMask& gt,
                         const PRCurveConfig& cfg = {});

template <class T>
double mean_average_precision(const std::vector<TensorT<T>>& probs,
                              const std::vector<LaneMask>& gts, const PRCurveConfig& cfg = {});

}  // namespace stlane
