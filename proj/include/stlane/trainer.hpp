#pragma once

#include <filesystem>
#include <vector>

#include "stlane/data.hpp"
#include "stlane/loss_metrics.hpp"
#include "stlane/model.hpp"

namespace stlane {

struct TrainConfig {
  double lr0 = 0.01;      // initial learning rate
  double decay = 0.95;    // multiplicative per-epoch factor
  double momentum = 0.9;
  int batch_size = 4;     // paper uses 64; 4 is the desk-scale default
  int epochs = 100;
  uint64_t seed = 0;
  double val_fraction = 0.0;  // 0: log metrics on the training set itself
  double target_f1 = -1.0;    // stop once the logged F1 reaches this (<0: off)
  bool auto_class_weights = true;
  LossConfig loss;  // used as-is when auto_class_weights is false
  std::filesystem::path out_dir;  // checkpoints + epoch log; empty: in-memory only

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double lr = 0, loss = 0, accuracy = 0, f1 = 0;
};

struct TrainResult {
  std::vector<EpochStats> log;
  ParamStore<float> params;  // final parameters
  int best_epoch = -1;
  double best_f1 = 0.0;
  bool halted_non_finite = false;
  std::filesystem::path best_checkpoint;
  std::filesystem::path final_checkpoint;
  std::filesystem::path log_file;
};

// v <- momentum*v + grad; p <- p - lr*v; gradients zeroed afterwards.
// A non-finite gradient aborts the step before any update.
void sgd_momentum_step(ParamStore<float>& params, std::vector<std::vector<float>>& velocity,
                       double lr, double momentum);

// Shuffles per epoch by seed, accumulates batch gradients in sequence-index
// order, decays the rate per epoch, logs `epoch lr loss acc f1`, and keeps
// the best-F1 checkpoint. A non-finite loss halts training with the last
// good parameters retained.
TrainResult train(const std::vector<ImageSequence>& data, const ModelConfig& model_cfg,
                  const TrainConfig& cfg);

}  // namespace stlane
