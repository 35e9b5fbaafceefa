#pragma once

#include <cstdint>
#include <iostream>
#include <string>

#include "stlane/config.hpp"

namespace stlane::cli {

// Flags shared by every subcommand. A --config file of flat key=value lines
// overrides any flag it names.
struct CommonOptions {
  std::string variant = "st";
  std::string extractor = "lstm";
  int frames = 5;
  int64_t height = 128;
  int64_t width = 256;
  int channel_div = 1;
  uint64_t seed = 0;
  std::string config_file;
};

ModelConfig to_model_config(const CommonOptions& o);

struct SynthOptions {
  CommonOptions common;
  std::string out_dir;
  int num = 10;
  int clip = 0;  // frames per clip on disk; 0 means exactly `frames`
  std::string challenges = "none";  // none | mixed | comma list
  bool augment = false;             // also write flip/rotate/crop copies
};
int run_synth(SynthOptions opts);

struct TrainOptions {
  CommonOptions common;
  std::string data_index;
  std::string out_dir;
  double lr0 = 0.01;
  double decay = 0.95;
  double momentum = 0.9;
  int batch = 4;
  int epochs = 100;
  double val_fraction = 0.0;
  double target_f1 = -1.0;
  std::string strides = "1";
};
int run_train(TrainOptions opts);

struct EvalOptions {
  CommonOptions common;
  std::string checkpoint;
  std::string data_index;
  int thresholds = 100;
};
int run_eval(EvalOptions opts, std::ostream& out = std::cout);

struct PredictOptions {
  CommonOptions common;
  std::string checkpoint;
  std::string data_index;
  std::string out_dir;
};
int run_predict(PredictOptions opts);

struct CountOptions {
  CommonOptions common;
};
int run_count(CountOptions opts, std::ostream& out = std::cout);

struct VizOptions {
  CommonOptions common;
  std::string checkpoint;  // optional; seed-initialized weights when empty
  std::string data_index;
  std::string out_dir;
  std::string stage = "Up_ConvBlock_4";
  int entry = 0;
  std::string trace_json;  // optional attention-trace dump
};
int run_viz(VizOptions opts);

// Full argv dispatch; exit code 0 success, 1 validation error, 2 runtime
// failure.
int run_cli(int argc, char** argv);

}  // namespace stlane::cli
