#include "stlane/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "stlane/complexity.hpp"
#include "stlane/data.hpp"
#include "stlane/image_io.hpp"
#include "stlane/model.hpp"
#include "stlane/prng.hpp"
#include "stlane/trainer.hpp"

namespace stlane::cli {
namespace {

namespace fs = std::filesystem;

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("config: cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key=value, got: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

// Applies --config overrides; `apply` consumes subcommand-specific keys and
// returns false for keys it does not know.
template <class Fn>
void apply_config(CommonOptions& common, Fn apply) {
  if (common.config_file.empty()) return;
  for (const auto& [key, val] : read_config_file(common.config_file)) {
    if (key == "variant")
      common.variant = val;
    else if (key == "extractor")
      common.extractor = val;
    else if (key == "frames")
      common.frames = std::stoi(val);
    else if (key == "height")
      common.height = std::stoll(val);
    else if (key == "width")
      common.width = std::stoll(val);
    else if (key == "channel_div")
      common.channel_div = std::stoi(val);
    else if (key == "seed")
      common.seed = std::stoull(val);
    else if (!apply(key, val))
      throw std::invalid_argument("config: unknown key " + key);
  }
}

bool no_extra_keys(const std::string&, const std::string&) { return false; }

uint32_t parse_challenges(const std::string& text, bool& mixed) {
  mixed = false;
  if (text == "none" || text.empty()) return challenge::none;
  if (text == "mixed") {
    mixed = true;
    return challenge::none;
  }
  uint32_t mask = 0;
  std::istringstream is(text);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    if (tok == "occlusion")
      mask |= challenge::occlusion;
    else if (tok == "shadow")
      mask |= challenge::shadow;
    else if (tok == "brightness")
      mask |= challenge::brightness;
    else if (tok == "blur")
      mask |= challenge::blur;
    else if (tok == "occlude-last")
      mask |= challenge::occlude_last;
    else
      throw std::invalid_argument("synth: unknown challenge " + tok);
  }
  return mask;
}

std::vector<int64_t> parse_strides(const std::string& text) {
  std::vector<int64_t> strides;
  std::istringstream is(text);
  std::string tok;
  while (std::getline(is, tok, ',')) strides.push_back(std::stoll(tok));
  if (strides.empty()) throw std::invalid_argument("train: empty stride list");
  for (int64_t s : strides)
    if (s < 1) throw std::invalid_argument("train: strides must be >= 1");
  return strides;
}

std::string entry_name(int i) {
  std::ostringstream os;
  os << "seq_" << std::setw(4) << std::setfill('0') << i;
  return os.str();
}

Tensor overlay_red(const Tensor& frame, const LaneMask& mask) {
  Tensor out = frame;
  const int64_t plane = frame.dim(1) * frame.dim(2);
  for (int64_t i = 0; i < plane; ++i) {
    if (mask.data[static_cast<size_t>(i)]) {
      out.data[static_cast<size_t>(i)] = 1.0f;              // R
      out.data[static_cast<size_t>(plane + i)] = 0.0f;      // G
      out.data[static_cast<size_t>(2 * plane + i)] = 0.0f;  // B
    }
  }
  return out;
}

}  // namespace

ModelConfig to_model_config(const CommonOptions& o) {
  ModelConfig cfg;
  cfg.variant = parse_variant(o.variant);
  cfg.extractor = parse_extractor(o.extractor);
  cfg.frames = o.frames;
  cfg.height = o.height;
  cfg.width = o.width;
  cfg.channel_div = o.channel_div;
  cfg.validate();
  return cfg;
}

int run_synth(SynthOptions opts) {
  apply_config(opts.common, [&](const std::string& key, const std::string& val) {
    if (key == "num") opts.num = std::stoi(val);
    else if (key == "clip") opts.clip = std::stoi(val);
    else if (key == "challenges") opts.challenges = val;
    else if (key == "augment") opts.augment = val == "1" || val == "true";
    else return false;
    return true;
  });
  if (opts.out_dir.empty()) throw std::invalid_argument("synth: --out is required");
  if (opts.num < 1) throw std::invalid_argument("synth: --num must be >= 1");
  const int clip_len = opts.clip > 0 ? opts.clip : opts.common.frames;
  if (clip_len < opts.common.frames)
    throw std::invalid_argument("synth: --clip must be >= --frames");

  bool mixed = false;
  const uint32_t mask = parse_challenges(opts.challenges, mixed);

  fs::create_directories(opts.out_dir);
  DatasetIndex index;
  index.root = opts.out_dir;
  int written = 0;
  for (int i = 0; i < opts.num; ++i) {
    const uint64_t entry_seed = SplitMix64::derive(opts.common.seed, static_cast<uint64_t>(i));
    uint32_t ch = mask;
    if (mixed) {
      SplitMix64 rng(SplitMix64::derive(entry_seed, 0x6368ull));
      const uint32_t all[4] = {challenge::occlusion, challenge::shadow, challenge::brightness,
                               challenge::blur};
      for (uint32_t c : all)
        if (rng.bernoulli(0.35)) ch |= c;
    }
    const SceneSpec spec =
        random_scene(entry_seed, opts.common.height, opts.common.width, clip_len, ch);
    const ImageSequence seq = generate_sequence(spec);
    index.entries.push_back(write_sequence(opts.out_dir, entry_name(i), seq));
    ++written;
    if (opts.augment) {
      const AugmentOp ops[3] = {AugmentOp::hflip, AugmentOp::rotate, AugmentOp::crop_resize};
      const char* suffix[3] = {"_flip", "_rot", "_crop"};
      for (int a = 0; a < 3; ++a) {
        auto aug = augment(seq, ops[a], entry_seed);
        if (!aug) continue;
        index.entries.push_back(
            write_sequence(opts.out_dir, entry_name(i) + suffix[a], *aug));
        ++written;
      }
    }
  }
  write_index(index, fs::path(opts.out_dir) / "index.txt");
  std::cout << "synth: wrote " << written << " entries to " << opts.out_dir << "\n";
  return 0;
}

int run_train(TrainOptions opts) {
  apply_config(opts.common, [&](const std::string& key, const std::string& val) {
    if (key == "lr0") opts.lr0 = std::stod(val);
    else if (key == "decay") opts.decay = std::stod(val);
    else if (key == "momentum") opts.momentum = std::stod(val);
    else if (key == "batch") opts.batch = std::stoi(val);
    else if (key == "epochs") opts.epochs = std::stoi(val);
    else if (key == "val_fraction") opts.val_fraction = std::stod(val);
    else if (key == "target_f1") opts.target_f1 = std::stod(val);
    else if (key == "strides") opts.strides = val;
    else return false;
    return true;
  });
  if (opts.data_index.empty()) throw std::invalid_argument("train: --data is required");
  if (opts.out_dir.empty()) throw std::invalid_argument("train: --out is required");

  const ModelConfig model_cfg = to_model_config(opts.common);
  const DatasetIndex index = read_index(opts.data_index);
  LoadStats stats;
  const auto dataset =
      load_dataset(index, model_cfg.frames, parse_strides(opts.strides), &stats);
  for (const auto& msg : stats.messages) std::cerr << "train: skipped " << msg << "\n";
  if (dataset.empty()) throw std::runtime_error("train: no usable sequences in dataset");

  TrainConfig tc;
  tc.lr0 = opts.lr0;
  tc.decay = opts.decay;
  tc.momentum = opts.momentum;
  tc.batch_size = opts.batch;
  tc.epochs = opts.epochs;
  tc.seed = opts.common.seed;
  tc.val_fraction = opts.val_fraction;
  tc.target_f1 = opts.target_f1;
  tc.out_dir = opts.out_dir;

  const TrainResult result = train(dataset, model_cfg, tc);
  std::cout << "train: sequences=" << dataset.size() << " best_epoch=" << result.best_epoch
            << " best_f1=" << std::fixed << std::setprecision(4) << result.best_f1 << "\n";
  if (result.halted_non_finite) {
    std::cerr << "train: halted on non-finite loss; last good checkpoint retained\n";
    return 2;
  }
  return 0;
}

int run_eval(EvalOptions opts, std::ostream& out) {
  apply_config(opts.common, [&](const std::string& key, const std::string& val) {
    if (key == "thresholds") opts.thresholds = std::stoi(val);
    else return false;
    return true;
  });
  if (opts.checkpoint.empty()) throw std::invalid_argument("eval: --ckpt is required");
  if (opts.data_index.empty()) throw std::invalid_argument("eval: --data is required");

  auto [params, cfg] = load_checkpoint(opts.checkpoint);
  SequenceModel<float> model(cfg, std::move(params));
  const DatasetIndex index = read_index(opts.data_index);
  LoadStats stats;
  const auto dataset = load_dataset(index, cfg.frames, {1}, &stats);  // test stride is 1
  for (const auto& msg : stats.messages) std::cerr << "eval: skipped " << msg << "\n";
  if (dataset.empty()) throw std::runtime_error("eval: no usable sequences in dataset");

  ConfusionCounts total;
  std::vector<Tensor> probs;
  std::vector<LaneMask> gts;
  for (const auto& seq : dataset) {
    ForwardResult<float> fwd = model.forward(seq.frames);
    total += confusion(predict_mask(fwd.logits), seq.mask);
    probs.push_back(lane_probability(fwd.logits));
    gts.push_back(seq.mask);
  }
  const SegMetrics m = metrics(total);
  PRCurveConfig pr;
  pr.thresholds = opts.thresholds;
  const double map_score = mean_average_precision(probs, gts, pr);

  out << "sequences " << dataset.size() << "\n";
  out << std::fixed << std::setprecision(6);
  out << "accuracy=" << m.accuracy << "\n";
  out << "precision=" << m.precision << "\n";
  out << "recall=" << m.recall << "\n";
  out << "f1=" << m.f1 << "\n";
  out << "map=" << map_score << "\n";
  return 0;
}

int run_predict(PredictOptions opts) {
  apply_config(opts.common, no_extra_keys);
  if (opts.checkpoint.empty()) throw std::invalid_argument("predict: --ckpt is required");
  if (opts.data_index.empty()) throw std::invalid_argument("predict: --data is required");
  if (opts.out_dir.empty()) throw std::invalid_argument("predict: --out is required");

  auto [params, cfg] = load_checkpoint(opts.checkpoint);
  SequenceModel<float> model(cfg, std::move(params));
  const DatasetIndex index = read_index(opts.data_index);
  LoadStats stats;
  const auto dataset = load_dataset(index, cfg.frames, {1}, &stats);
  for (const auto& msg : stats.messages) std::cerr << "predict: skipped " << msg << "\n";
  fs::create_directories(opts.out_dir);

  int i = 0;
  for (const auto& seq : dataset) {
    ForwardResult<float> fwd = model.forward(seq.frames);
    const LaneMask pred = predict_mask(fwd.logits);
    const std::string base = entry_name(i++);
    write_png(fs::path(opts.out_dir) / (base + "_mask.png"), mask_to_image(pred));
    write_png(fs::path(opts.out_dir) / (base + "_overlay.png"),
              from_float_chw(overlay_red(seq.frames.back(), pred)));
  }
  std::cout << "predict: wrote " << i << " mask/overlay pairs to " << opts.out_dir << "\n";
  return 0;
}

int run_count(CountOptions opts, std::ostream& out) {
  apply_config(opts.common, no_extra_keys);
  const ModelConfig cfg = to_model_config(opts.common);
  const ComplexityReport rep = analyze_complexity(cfg);
  out << model_name(cfg.variant, cfg.extractor) << " at " << cfg.height << "x" << cfg.width
      << ", N=" << cfg.frames << "\n";
  out << rep.table();
  out << rep.key_values();
  return 0;
}

int run_viz(VizOptions opts) {
  apply_config(opts.common, [&](const std::string& key, const std::string& val) {
    if (key == "stage") opts.stage = val;
    else if (key == "entry") opts.entry = std::stoi(val);
    else return false;
    return true;
  });
  if (opts.data_index.empty()) throw std::invalid_argument("viz: --data is required");
  if (opts.out_dir.empty()) throw std::invalid_argument("viz: --out is required");

  ModelConfig cfg;
  ParamStore<float> params;
  if (!opts.checkpoint.empty()) {
    auto loaded = load_checkpoint(opts.checkpoint);
    params = std::move(loaded.first);
    cfg = loaded.second;
  } else {
    cfg = to_model_config(opts.common);
    params = init_parameters<float>(cfg, opts.common.seed);
  }
  SequenceModel<float> model(cfg, std::move(params));

  const DatasetIndex index = read_index(opts.data_index);
  LoadStats stats;
  const auto dataset = load_dataset(index, cfg.frames, {1}, &stats);
  if (opts.entry < 0 || static_cast<size_t>(opts.entry) >= dataset.size())
    throw std::invalid_argument("viz: --entry out of range (have " +
                                std::to_string(dataset.size()) + " sequences)");
  const auto& seq = dataset[static_cast<size_t>(opts.entry)];

  fs::create_directories(opts.out_dir);
  const auto maps = visualize_activation(model, seq.frames, opts.stage);
  for (const auto& m : maps) {
    const int upscale =
        std::max(1, static_cast<int>(256 / std::max<int64_t>(1, m.width)));
    write_png(fs::path(opts.out_dir) / (m.name + ".png"),
              heatmap_image(m.values, m.height, m.width, upscale));
  }

  if (!opts.trace_json.empty()) {
    ForwardResult<float> fwd = model.forward(seq.frames);
    nlohmann::json j;
    j["frames"] = cfg.frames;
    j["map_h"] = cfg.map_h();
    j["map_w"] = cfg.map_w();
    j["w"] = nlohmann::json::array();
    j["h"] = nlohmann::json::array();
    for (const auto& w : fwd.trace.w) j["w"].push_back(w.data);
    for (const auto& h : fwd.trace.h) j["h"].push_back(h.data);
    j["h_final"] = fwd.trace.h_final.data;
    std::ofstream os(opts.trace_json);
    os << j.dump(2) << "\n";
  }
  std::cout << "viz: wrote " << maps.size() << " heatmaps to " << opts.out_dir << "\n";
  return 0;
}

namespace {

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--variant", common.variant, "attention variant: tem|st|stfc");
  cmd->add_option("--extractor", common.extractor, "temporal extractor: lstm|gru");
  cmd->add_option("--frames", common.frames, "frames per sequence");
  cmd->add_option("--height", common.height, "frame height (multiple of 16)");
  cmd->add_option("--width", common.width, "frame width (multiple of 16)");
  cmd->add_option("--channel-div", common.channel_div, "divide the channel schedule");
  cmd->add_option("--seed", common.seed, "PRNG seed");
  cmd->add_option("--config", common.config_file, "key=value file overriding flags");
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Sequence-to-one lane segmentation: spatial-temporal attention UNet-LSTM"};
  app.require_subcommand(1);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth_cmd, synth.common);
  synth_cmd->add_option("--out", synth.out_dir, "output dataset directory")->required();
  synth_cmd->add_option("--num", synth.num, "number of scenes");
  synth_cmd->add_option("--clip", synth.clip, "frames per clip on disk (>= --frames)");
  synth_cmd->add_option("--challenges", synth.challenges,
                        "none|mixed|comma list (occlusion,shadow,brightness,blur,occlude-last)");
  synth_cmd->add_flag("--augment", synth.augment, "write flip/rotate/crop copies");

  TrainOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "train on a dataset index");
  add_common(train_cmd, train_opts.common);
  train_cmd->add_option("--data", train_opts.data_index, "dataset index file")->required();
  train_cmd->add_option("--out", train_opts.out_dir, "output directory")->required();
  train_cmd->add_option("--lr", train_opts.lr0, "initial learning rate");
  train_cmd->add_option("--decay", train_opts.decay, "per-epoch LR decay factor");
  train_cmd->add_option("--momentum", train_opts.momentum, "SGD momentum");
  train_cmd->add_option("--batch", train_opts.batch, "batch size");
  train_cmd->add_option("--epochs", train_opts.epochs, "training epochs");
  train_cmd->add_option("--val-fraction", train_opts.val_fraction, "held-out fraction");
  train_cmd->add_option("--target-f1", train_opts.target_f1, "early-stop F1 target");
  train_cmd->add_option("--strides", train_opts.strides, "comma list, e.g. 1,2,3");

  EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd, eval_opts.common);
  eval_cmd->add_option("--ckpt", eval_opts.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval_opts.data_index, "dataset index file")->required();
  eval_cmd->add_option("--thresholds", eval_opts.thresholds, "PR thresholds per frame (V)");

  PredictOptions pred_opts;
  auto* pred_cmd = app.add_subcommand("predict", "write mask and overlay PNGs");
  add_common(pred_cmd, pred_opts.common);
  pred_cmd->add_option("--ckpt", pred_opts.checkpoint, "checkpoint file")->required();
  pred_cmd->add_option("--data", pred_opts.data_index, "dataset index file")->required();
  pred_cmd->add_option("--out", pred_opts.out_dir, "output directory")->required();

  CountOptions count_opts;
  auto* count_cmd = app.add_subcommand("count", "print the analytic complexity report");
  add_common(count_cmd, count_opts.common);

  VizOptions viz_opts;
  auto* viz_cmd = app.add_subcommand("viz", "write activation/attention heatmaps");
  add_common(viz_cmd, viz_opts.common);
  viz_cmd->add_option("--ckpt", viz_opts.checkpoint, "checkpoint (optional)");
  viz_cmd->add_option("--data", viz_opts.data_index, "dataset index file")->required();
  viz_cmd->add_option("--out", viz_opts.out_dir, "output directory")->required();
  viz_cmd->add_option("--stage", viz_opts.stage,
                      "In_ConvBlock|Down_ConvBlock_1..4|Up_ConvBlock_4..1|Out_ConvBlock|Attention");
  viz_cmd->add_option("--entry", viz_opts.entry, "dataset entry index");
  viz_cmd->add_option("--trace-json", viz_opts.trace_json, "attention trace JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints usage/help text
    return e.get_name() == "CallForHelp" ? 0 : 1;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(synth);
    if (train_cmd->parsed()) return run_train(train_opts);
    if (eval_cmd->parsed()) return run_eval(eval_opts);
    if (pred_cmd->parsed()) return run_predict(pred_opts);
    if (count_cmd->parsed()) return run_count(count_opts);
    if (viz_cmd->parsed()) return run_viz(viz_opts);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace stlane::cli
