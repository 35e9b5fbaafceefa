#include "stlane/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "stlane/prng.hpp"

namespace stlane {

void TrainConfig::validate() const {
  if (lr0 <= 0) throw std::invalid_argument("train: lr0 must be positive");
  if (decay <= 0 || decay > 1) throw std::invalid_argument("train: decay must be in (0,1]");
  if (momentum < 0 || momentum >= 1)
    throw std::invalid_argument("train: momentum must be in [0,1)");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (val_fraction < 0 || val_fraction >= 1)
    throw std::invalid_argument("train: val_fraction must be in [0,1)");
}

void sgd_momentum_step(ParamStore<float>& params, std::vector<std::vector<float>>& velocity,
                       double lr, double momentum) {
  if (velocity.size() != params.size()) {
    velocity.assign(params.size(), {});
    for (size_t i = 0; i < params.size(); ++i)
      velocity[i].assign(static_cast<size_t>(params[i].value.numel()), 0.0f);
  }
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params[i].grad.all_finite())
      throw std::runtime_error("sgd: non-finite gradient in " + params[i].name);
  }
  const float m = static_cast<float>(momentum);
  const float rate = static_cast<float>(lr);
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& v = velocity[i];
    float* val = p.value.ptr();
    const float* g = p.grad.ptr();
    for (int64_t k = 0; k < p.value.numel(); ++k) {
      v[static_cast<size_t>(k)] = m * v[static_cast<size_t>(k)] + g[k];
      val[k] -= rate * v[static_cast<size_t>(k)];
    }
    p.grad.zero();
  }
}

namespace {

struct EvalAccum {
  double loss_sum = 0;
  int64_t count = 0;
  ConfusionCounts confusion_total;

  void add(double loss, const ConfusionCounts& c) {
    loss_sum += loss;
    ++count;
    confusion_total += c;
  }
  double mean_loss() const { return count ? loss_sum / static_cast<double>(count) : 0.0; }
};

void log_line(std::ostream& os, const EpochStats& s) {
  os << s.epoch << " " << std::setprecision(10) << s.lr << " " << s.loss << " " << s.accuracy
     << " " << s.f1 << "\n";
}

}  // namespace

TrainResult train(const std::vector<ImageSequence>& data, const ModelConfig& model_cfg,
                  const TrainConfig& cfg) {
  cfg.validate();
  model_cfg.validate();
  if (data.empty()) throw std::invalid_argument("train: empty dataset");

  // deterministic split: shuffle a copy of the indices, tail becomes held-out
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});
  SplitMix64 split_rng(SplitMix64::derive(cfg.seed, 0x73706c6974ull));  // "split"
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<size_t>(split_rng.uniform_int(0, int64_t(i) - 1))]);
  const size_t n_val = static_cast<size_t>(std::floor(cfg.val_fraction * double(data.size())));
  std::vector<size_t> train_idx(order.begin(), order.end() - static_cast<ptrdiff_t>(n_val));
  std::vector<size_t> val_idx(order.end() - static_cast<ptrdiff_t>(n_val), order.end());
  if (train_idx.empty()) throw std::invalid_argument("train: empty training split");

  LossConfig loss_cfg = cfg.loss;
  if (cfg.auto_class_weights) {
    std::vector<LaneMask> masks;
    for (size_t i : train_idx) masks.push_back(data[i].mask);
    loss_cfg = class_weights_from_masks(masks);
  }

  SequenceModel<float> model(model_cfg, cfg.seed);
  std::vector<std::vector<float>> velocity;

  TrainResult result;
  std::ofstream log_os;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    result.log_file = cfg.out_dir / "train_log.txt";
    log_os.open(result.log_file, std::ios::trunc);
    result.best_checkpoint = cfg.out_dir / "checkpoint_best.bin";
    result.final_checkpoint = cfg.out_dir / "checkpoint_final.bin";
  }

  auto eval_split = [&](const std::vector<size_t>& idx) {
    EvalAccum acc;
    for (size_t i : idx) {
      ForwardResult<float> fwd = model.forward(data[i].frames);
      const auto prob = lane_probability(fwd.logits);
      const auto lr = weighted_bce(prob, data[i].mask, loss_cfg);
      acc.add(lr.loss, confusion(predict_mask(fwd.logits), data[i].mask));
    }
    return acc;
  };

  SplitMix64 shuffle_rng(SplitMix64::derive(cfg.seed, 0x65706f6368ull));  // "epoch"
  bool halted = false;

  for (int epoch = 0; epoch < cfg.epochs && !halted; ++epoch) {
    const double lr = cfg.lr0 * std::pow(cfg.decay, epoch);
    std::vector<size_t> sched = train_idx;
    for (size_t i = sched.size(); i > 1; --i)
      std::swap(sched[i - 1],
                sched[static_cast<size_t>(shuffle_rng.uniform_int(0, int64_t(i) - 1))]);

    EvalAccum train_acc;
    for (size_t b = 0; b < sched.size() && !halted; b += static_cast<size_t>(cfg.batch_size)) {
      const size_t bend = std::min(sched.size(), b + static_cast<size_t>(cfg.batch_size));
      const float inv_batch = 1.0f / static_cast<float>(bend - b);
      model.params().zero_grads();
      bool batch_ok = true;
      for (size_t s = b; s < bend; ++s) {
        const auto& seq = data[sched[s]];
        ForwardCache<float> cache;
        ForwardResult<float> fwd = model.forward(seq.frames, &cache);
        const auto prob = lane_probability(fwd.logits);
        LossResult<float> lr_res = weighted_bce(prob, seq.mask, loss_cfg);
        if (!std::isfinite(lr_res.loss)) {
          std::cerr << "train: non-finite loss at epoch " << epoch << ", halting\n";
          result.halted_non_finite = true;
          halted = true;
          batch_ok = false;
          break;
        }
        train_acc.add(lr_res.loss, confusion(predict_mask(fwd.logits), seq.mask));
        for (auto& g : lr_res.dlogits.data) g *= inv_batch;  // batch-mean gradient
        model.backward(lr_res.dlogits, cache);
      }
      if (!batch_ok) break;
      try {
        sgd_momentum_step(model.params(), velocity, lr, cfg.momentum);
      } catch (const std::runtime_error& e) {
        std::cerr << "train: " << e.what() << ", halting\n";
        result.halted_non_finite = true;
        halted = true;
      }
    }
    if (halted) break;

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    if (!val_idx.empty()) {
      EvalAccum val_acc = eval_split(val_idx);
      const SegMetrics m = metrics(val_acc.confusion_total);
      stats.loss = val_acc.mean_loss();
      stats.accuracy = m.accuracy;
      stats.f1 = m.f1;
    } else {
      const SegMetrics m = metrics(train_acc.confusion_total);
      stats.loss = train_acc.mean_loss();
      stats.accuracy = m.accuracy;
      stats.f1 = m.f1;
    }
    result.log.push_back(stats);
    log_line(std::cout, stats);
    if (log_os) {
      log_line(log_os, stats);
      log_os.flush();
    }

    if (result.best_epoch < 0 || stats.f1 > result.best_f1) {
      result.best_epoch = epoch;
      result.best_f1 = stats.f1;
      if (!cfg.out_dir.empty()) save_checkpoint(model.params(), model_cfg, result.best_checkpoint);
    }
    if (cfg.target_f1 >= 0 && stats.f1 >= cfg.target_f1) break;
  }

  result.params = model.params();
  if (!cfg.out_dir.empty()) {
    save_checkpoint(model.params(), model_cfg, result.final_checkpoint);
    if (result.best_epoch < 0)
      save_checkpoint(model.params(), model_cfg, result.best_checkpoint);
  }
  return result;
}

}  // namespace stlane
