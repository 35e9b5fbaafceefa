#include "stlane/loss_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stlane {

template <class T>
TensorT<T> lane_probability(const TensorT<T>& logits) {
  if (logits.rank() != 3 || logits.dim(0) != 2)
    throw std::invalid_argument("lane_probability: expected 2xHxW logits");
  const int64_t plane = logits.dim(1) * logits.dim(2);
  TensorT<T> p({logits.dim(1), logits.dim(2)});
  const T* bg = logits.ptr();
  const T* lane = logits.ptr() + plane;
  for (int64_t i = 0; i < plane; ++i) {
    // softmax over two channels == sigmoid of the logit difference
    const double d = static_cast<double>(lane[i]) - static_cast<double>(bg[i]);
    p.data[static_cast<size_t>(i)] = static_cast<T>(1.0 / (1.0 + std::exp(-d)));
  }
  return p;
}

template <class T>
LossResult<T> weighted_bce(const TensorT<T>& lane_prob, const LaneMask& target,
                           const LossConfig& cfg) {
  if (lane_prob.rank() != 2 || lane_prob.dim(0) != target.height ||
      lane_prob.dim(1) != target.width)
    throw std::invalid_argument("weighted_bce: probability/mask shape mismatch: " +
                                shape_str(lane_prob.shape) + " vs " +
                                std::to_string(target.height) + "x" +
                                std::to_string(target.width));
  const int64_t m = lane_prob.numel();
  const double eps = cfg.epsilon;
  LossResult<T> out;
  out.dlogits = TensorT<T>({2, target.height, target.width});
  T* dbg = out.dlogits.ptr();
  T* dlane = out.dlogits.ptr() + m;

  double loss = 0.0;
  for (int64_t i = 0; i < m; ++i) {
    const double p = static_cast<double>(lane_prob.data[static_cast<size_t>(i)]);
    const double pc = std::clamp(p, eps, 1.0 - eps);
    const bool y = target.data[static_cast<size_t>(i)] != 0;
    double dp = 0.0;
    if (y) {
      loss -= cfg.lane_weight * std::log(pc);
      if (p > eps && p < 1.0 - eps) dp = -cfg.lane_weight / p;
    } else {
      loss -= cfg.background_weight * std::log(1.0 - pc);
      if (p > eps && p < 1.0 - eps) dp = cfg.background_weight / (1.0 - p);
    }
    const double g = dp * p * (1.0 - p) / static_cast<double>(m);
    dlane[i] = static_cast<T>(g);
    dbg[i] = static_cast<T>(-g);
  }
  out.loss = loss / static_cast<double>(m);
  return out;
}

LossConfig class_weights_from_masks(const std::vector<LaneMask>& masks) {
  if (masks.empty()) throw std::invalid_argument("class_weights: empty dataset");
  int64_t lane = 0, total = 0;
  for (const auto& m : masks) {
    lane += m.lane_count();
    total += m.numel();
  }
  if (lane == 0) throw std::invalid_argument("class_weights: dataset has no lane pixels");
  if (lane == total) throw std::invalid_argument("class_weights: dataset has no background");
  LossConfig cfg;
  cfg.lane_weight = static_cast<double>(total) / (2.0 * static_cast<double>(lane));
  cfg.background_weight = static_cast<double>(total) / (2.0 * static_cast<double>(total - lane));
  return cfg;
}

ConfusionCounts confusion(const LaneMask& pred, const LaneMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw std::invalid_argument("confusion: mask shape mismatch");
  ConfusionCounts c;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] != 0, g = gt.data[i] != 0;
    if (p && g)
      ++c.tp;
    else if (p && !g)
      ++c.fp;
    else if (!p && g)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

SegMetrics metrics(const ConfusionCounts& c) {
  SegMetrics m;
  const int64_t total = c.total();
  m.accuracy = total ? static_cast<double>(c.tp + c.tn) / static_cast<double>(total) : 0.0;
  m.precision = (c.tp + c.fp) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = (c.tp + c.fn) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

template <class T>
double average_precision(const TensorT<T>& lane_prob, const LaneMask& gt,
                         const PRCurveConfig& cfg) {
  if (cfg.thresholds < 1) throw std::invalid_argument("average_precision: V must be >= 1");
  if (lane_prob.numel() != gt.numel())
    throw std::invalid_argument("average_precision: probability/mask size mismatch");
  const int64_t p_total = lane_prob.numel();
  int64_t lanes = 0;
  for (uint8_t v : gt.data) lanes += (v != 0);
  if (lanes == 0) return 0.0;  // undefined recall; scored as 0

  // Sort pixels by probability descending; prefix sums give tp per cutoff.
  std::vector<std::pair<T, uint8_t>> px(static_cast<size_t>(p_total));
  for (int64_t i = 0; i < p_total; ++i)
    px[static_cast<size_t>(i)] = {lane_prob.data[static_cast<size_t>(i)],
                                  gt.data[static_cast<size_t>(i)]};
  std::sort(px.begin(), px.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<int64_t> tp_prefix(static_cast<size_t>(p_total) + 1, 0);
  for (int64_t i = 0; i < p_total; ++i)
    tp_prefix[static_cast<size_t>(i + 1)] =
        tp_prefix[static_cast<size_t>(i)] + (px[static_cast<size_t>(i)].second != 0);

  // Predicted-positive set for threshold t is {p >= t}: the longest sorted
  // prefix with value >= t.
  auto count_at = [&](double t) {
    int64_t lo = 0, hi = p_total;
    while (lo < hi) {
      const int64_t mid = (lo + hi) / 2;
      if (static_cast<double>(px[static_cast<size_t>(mid)].first) >= t)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;
  };

  const int v = cfg.thresholds;
  std::vector<double> thresholds(static_cast<size_t>(v));
  if (cfg.fixed_grid) {
    for (int q = 1; q <= v; ++q)
      thresholds[static_cast<size_t>(v - q)] = static_cast<double>(q) / static_cast<double>(v);
  } else {
    // order statistics at evenly spaced ranks; descending sweep
    for (int q = 1; q <= v; ++q) {
      int64_t rank = (static_cast<int64_t>(q) * p_total + v - 1) / v;  // ceil(q*P/V)
      rank = std::clamp<int64_t>(rank, 1, p_total);
      // rank-th smallest == index P-rank in the descending order
      thresholds[static_cast<size_t>(v - q)] =
          static_cast<double>(px[static_cast<size_t>(p_total - rank)].first);
    }
  }

  double ap = 0.0;
  double prev_recall = 0.0;  // anchor: recall_0 = 0 (precision_0 = 1 unused by the sum)
  for (int q = 0; q <= v; ++q) {
    int64_t npos;
    if (q < v)
      npos = count_at(thresholds[static_cast<size_t>(q)]);
    else
      npos = p_total;  // final point: everything predicted positive
    const int64_t tp = tp_prefix[static_cast<size_t>(npos)];
    const double precision =
        npos > 0 ? static_cast<double>(tp) / static_cast<double>(npos) : 0.0;
    const double recall = static_cast<double>(tp) / static_cast<double>(lanes);
    ap += precision * (recall - prev_recall);
    prev_recall = recall;
  }
  return ap;
}

template <class T>
double mean_average_precision(const std::vector<TensorT<T>>& probs,
                              const std::vector<LaneMask>& gts, const PRCurveConfig& cfg) {
  if (probs.empty()) throw std::invalid_argument("mean_average_precision: empty input");
  if (probs.size() != gts.size())
    throw std::invalid_argument("mean_average_precision: list length mismatch");
  double s = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) s += average_precision(probs[i], gts[i], cfg);
  return s / static_cast<double>(probs.size());
}

#define STLANE_INSTANTIATE_LOSS(T)                                                          \
  template TensorT<T> lane_probability<T>(const TensorT<T>&);                               \
  template LossResult<T> weighted_bce<T>(const TensorT<T>&, const LaneMask&,                \
                                         const LossConfig&);                                \
  template double average_precision<T>(const TensorT<T>&, const LaneMask&,                  \
                                       const PRCurveConfig&);                               \
  template double mean_average_precision<T>(const std::vector<TensorT<T>>&,                 \
                                            const std::vector<LaneMask>&,                   \
                                            const PRCurveConfig&);

STLANE_INSTANTIATE_LOSS(float)
STLANE_INSTANTIATE_LOSS(double)
#undef STLANE_INSTANTIATE_LOSS

}  // namespace stlane
