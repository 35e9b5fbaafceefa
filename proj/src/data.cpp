#include "stlane/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "stlane/image_io.hpp"
#include "stlane/prng.hpp"

namespace stlane {
namespace {

double positive_fmod(double a, double m) {
  double r = std::fmod(a, m);
  return r < 0 ? r + m : r;
}

// Anti-aliased coverage of one lane at pixel column x, given the lane center.
double stroke_coverage(double x, double center, double width) {
  const double d = std::abs(x - center);
  return std::clamp(width * 0.5 + 0.5 - d, 0.0, 1.0);
}

bool lane_visible_at_row(const LaneCurve& lane, int64_t y, double dash_phase) {
  if (!lane.dashed) return true;
  const double period = lane.dash_on + lane.dash_off;
  return positive_fmod(static_cast<double>(y) + dash_phase, period) < lane.dash_on;
}

void box_blur3(Tensor& frame) {
  const int64_t h = frame.dim(1), w = frame.dim(2);
  Tensor src = frame;
  for (int64_t c = 0; c < 3; ++c) {
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        float acc = 0.0f;
        for (int64_t dy = -1; dy <= 1; ++dy) {
          for (int64_t dx = -1; dx <= 1; ++dx) {
            const int64_t yy = std::clamp<int64_t>(y + dy, 0, h - 1);
            const int64_t xx = std::clamp<int64_t>(x + dx, 0, w - 1);
            acc += src(c, yy, xx);
          }
        }
        frame(c, y, x) = acc / 9.0f;
      }
    }
  }
}

}  // namespace

double lane_center_x(const SceneSpec& spec, size_t lane, int64_t y, int frame_index) {
  const LaneCurve& lc = spec.lanes.at(lane);
  const double s = static_cast<double>(y) / static_cast<double>(spec.height - 1) - 1.0;
  const double shift = spec.drift * static_cast<double>(frame_index - (spec.frames - 1));
  return lc.c + lc.b * s + lc.a * s * s + shift;
}

SceneSpec random_scene(uint64_t seed, int64_t height, int64_t width, int frames,
                       uint32_t challenges) {
  if (height < 16 || width < 16 || frames < 1)
    throw std::invalid_argument("random_scene: bad geometry");
  SceneSpec spec;
  spec.height = height;
  spec.width = width;
  spec.frames = frames;
  spec.challenges = challenges;
  spec.seed = seed;

  SplitMix64 rng(SplitMix64::derive(seed, 0x7363656eull));  // "scen" stream
  const double w = static_cast<double>(width);

  for (int attempt = 0; attempt < 64; ++attempt) {
    spec.lanes.clear();
    const int count = static_cast<int>(rng.uniform_int(2, 4));
    const double span = 0.30 * w;  // shared curvature/slope keeps lanes parallel-ish
    const double b_shared = rng.uniform(-0.18, 0.18) * w;
    const double a_shared = rng.uniform(-0.12, 0.12) * w;
    for (int i = 0; i < count; ++i) {
      LaneCurve lane;
      const double f = (i + 1.0) / (count + 1.0);
      lane.c = (f + rng.uniform(-0.06, 0.06)) * w;
      lane.b = b_shared + rng.uniform(-0.04, 0.04) * w;
      lane.a = a_shared + rng.uniform(-0.03, 0.03) * w;
      lane.width = rng.uniform(2.0, 4.0);
      lane.bright = rng.uniform(0.8, 1.0);
      lane.dashed = rng.bernoulli(0.4);
      lane.dash_on = rng.uniform(6.0, 12.0);
      lane.dash_off = rng.uniform(4.0, 8.0);
      spec.lanes.push_back(lane);
    }
    spec.drift = rng.uniform(-1.5, 1.5) * (w / 256.0);
    spec.dash_speed = rng.uniform(1.0, 4.0);
    spec.road_base = rng.uniform(0.28, 0.42);
    spec.road_slope = rng.uniform(-0.08, 0.12);
    spec.tint_r = rng.uniform(-0.02, 0.02);
    spec.tint_b = rng.uniform(-0.02, 0.02);
    (void)span;

    // all curves in-bounds across all frames?
    bool ok = true;
    for (size_t l = 0; l < spec.lanes.size() && ok; ++l) {
      const double margin = spec.lanes[l].width * 0.5 + 1.0;
      for (int n = 0; n < frames && ok; ++n)
        for (int64_t y = 0; y < height; ++y) {
          const double cx = lane_center_x(spec, l, y, n);
          if (cx < margin || cx > w - 1.0 - margin) {
            ok = false;
            break;
          }
        }
    }
    if (!ok) continue;

    if (challenges & challenge::occlusion) {
      const int nrect = static_cast<int>(rng.uniform_int(1, 2));
      for (int r = 0; r < nrect; ++r) {
        SceneSpec::Rect rect;
        rect.w = static_cast<int64_t>(rng.uniform(0.15, 0.3) * w);
        rect.h = static_cast<int64_t>(rng.uniform(0.1, 0.25) * static_cast<double>(height));
        rect.x = rng.uniform_int(0, width - rect.w - 1);
        rect.y = rng.uniform_int(0, height - rect.h - 1);
        spec.occlusion_rects.push_back(rect);
      }
    }
    if (challenges & challenge::occlude_last) {
      // full-width band across the middle: lanes hidden in frame N only
      SceneSpec::Rect rect;
      rect.x = 0;
      rect.w = width;
      rect.h = static_cast<int64_t>(rng.uniform(0.28, 0.38) * static_cast<double>(height));
      rect.y = static_cast<int64_t>(rng.uniform(0.25, 0.45) * static_cast<double>(height));
      spec.occlusion_rects.push_back(rect);
    }
    if (challenges & challenge::shadow) {
      spec.shadow_y0 = rng.uniform_int(0, height / 2);
      spec.shadow_y1 = spec.shadow_y0 + rng.uniform_int(height / 8, height / 3);
      spec.shadow_y1 = std::min(spec.shadow_y1, height);
      spec.shadow_gain = rng.uniform(0.45, 0.7);
    }
    if (challenges & challenge::brightness) {
      spec.frame_gain.resize(static_cast<size_t>(frames));
      for (auto& g : spec.frame_gain) g = rng.uniform(0.7, 1.2);
    }
    return spec;
  }
  throw std::runtime_error("random_scene: could not draw in-bounds geometry for seed " +
                           std::to_string(seed));
}

ImageSequence generate_sequence(const SceneSpec& spec) {
  if (spec.lanes.empty()) throw std::invalid_argument("generate_sequence: no lanes");
  const int64_t h = spec.height, w = spec.width;

  // reject degenerate geometry up front
  for (size_t l = 0; l < spec.lanes.size(); ++l) {
    const double margin = spec.lanes[l].width * 0.5;
    for (int n = 0; n < spec.frames; ++n)
      for (int64_t y = 0; y < h; ++y) {
        const double cx = lane_center_x(spec, l, y, n);
        if (cx < margin || cx > static_cast<double>(w) - 1.0 - margin)
          throw std::invalid_argument("generate_sequence: lane " + std::to_string(l) +
                                      " leaves image bounds at frame " + std::to_string(n));
      }
  }

  ImageSequence seq;
  seq.source_id = "scene_" + std::to_string(spec.seed);
  seq.mask = LaneMask(h, w);

  for (int n = 0; n < spec.frames; ++n) {
    Tensor frame({3, h, w});
    const double dash_phase =
        spec.dash_speed * static_cast<double>(n - (spec.frames - 1));
    const bool last = n == spec.frames - 1;

    for (int64_t y = 0; y < h; ++y) {
      const double t = static_cast<double>(y) / static_cast<double>(h - 1);
      const double road = spec.road_base + spec.road_slope * t;
      for (int64_t x = 0; x < w; ++x) {
        double cov = 0.0, paint = 0.0;
        for (size_t l = 0; l < spec.lanes.size(); ++l) {
          if (!lane_visible_at_row(spec.lanes[l], y, dash_phase)) continue;
          const double c = stroke_coverage(static_cast<double>(x),
                                           lane_center_x(spec, l, y, n), spec.lanes[l].width);
          if (c > cov) {
            cov = c;
            paint = spec.lanes[l].bright;
          }
        }
        const double base_r = road + spec.tint_r, base_g = road, base_b = road + spec.tint_b;
        frame(0, y, x) = static_cast<float>(base_r + (paint - base_r) * cov);
        frame(1, y, x) = static_cast<float>(base_g + (paint - base_g) * cov);
        frame(2, y, x) = static_cast<float>(base_b + (paint - base_b) * cov);
        if (last && cov >= 0.5) seq.mask.at(y, x) = 1;
      }
    }

    // challenge corruptions (the mask keeps the uncorrupted geometry)
    const bool occlude_this_frame =
        (spec.challenges & challenge::occlusion) ||
        ((spec.challenges & challenge::occlude_last) && last);
    if (occlude_this_frame) {
      for (const auto& r : spec.occlusion_rects) {
        for (int64_t y = r.y; y < std::min(h, r.y + r.h); ++y)
          for (int64_t x = r.x; x < std::min(w, r.x + r.w); ++x) {
            frame(0, y, x) = 0.52f;
            frame(1, y, x) = 0.50f;
            frame(2, y, x) = 0.48f;
          }
      }
    }
    if (spec.challenges & challenge::shadow) {
      for (int64_t y = spec.shadow_y0; y < spec.shadow_y1; ++y)
        for (int64_t x = 0; x < w; ++x)
          for (int64_t c = 0; c < 3; ++c)
            frame(c, y, x) = static_cast<float>(frame(c, y, x) * spec.shadow_gain);
    }
    if ((spec.challenges & challenge::brightness) && !spec.frame_gain.empty()) {
      const float g = static_cast<float>(spec.frame_gain[static_cast<size_t>(n)]);
      for (auto& v : frame.data) v = std::min(1.0f, v * g);
    }
    if (spec.challenges & challenge::blur) box_blur3(frame);

    for (auto& v : frame.data) v = std::clamp(v, 0.0f, 1.0f);
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

std::vector<int64_t> sample_with_stride(int64_t labeled_index, int64_t n_frames, int64_t stride) {
  if (stride < 1) throw std::invalid_argument("sample_with_stride: stride must be >= 1");
  if (n_frames < 1) throw std::invalid_argument("sample_with_stride: need at least one frame");
  if (labeled_index - (n_frames - 1) * stride < 1)
    throw std::invalid_argument("sample_with_stride: clip too short for stride " +
                                std::to_string(stride));
  std::vector<int64_t> idx(static_cast<size_t>(n_frames));
  for (int64_t i = 0; i < n_frames; ++i)
    idx[static_cast<size_t>(i)] = labeled_index - (n_frames - 1 - i) * stride;
  return idx;
}

namespace {

float bilinear_sample(const Tensor& frame, int64_t c, double y, double x) {
  const int64_t h = frame.dim(1), w = frame.dim(2);
  const int64_t y0 = static_cast<int64_t>(std::floor(y));
  const int64_t x0 = static_cast<int64_t>(std::floor(x));
  const double ty = y - static_cast<double>(y0), tx = x - static_cast<double>(x0);
  auto clampy = [&](int64_t v) { return std::clamp<int64_t>(v, 0, h - 1); };
  auto clampx = [&](int64_t v) { return std::clamp<int64_t>(v, 0, w - 1); };
  const float v00 = frame(c, clampy(y0), clampx(x0));
  const float v01 = frame(c, clampy(y0), clampx(x0 + 1));
  const float v10 = frame(c, clampy(y0 + 1), clampx(x0));
  const float v11 = frame(c, clampy(y0 + 1), clampx(x0 + 1));
  const double a = v00 + tx * (v01 - v00);
  const double b = v10 + tx * (v11 - v10);
  return static_cast<float>(a + ty * (b - a));
}

// Shared geometric warp: out(y,x) samples in at map(y,x).
template <class MapFn>
ImageSequence warp_sequence(const ImageSequence& seq, MapFn map) {
  const int64_t h = seq.mask.height, w = seq.mask.width;
  ImageSequence out;
  out.source_id = seq.source_id;
  out.mask = LaneMask(h, w);
  for (const auto& frame : seq.frames) {
    Tensor warped({3, h, w});
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        double sy, sx;
        map(y, x, sy, sx);
        for (int64_t c = 0; c < 3; ++c) warped(c, y, x) = bilinear_sample(frame, c, sy, sx);
      }
    out.frames.push_back(std::move(warped));
  }
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      double sy, sx;
      map(y, x, sy, sx);
      const int64_t ny = std::clamp<int64_t>(std::llround(sy), 0, h - 1);
      const int64_t nx = std::clamp<int64_t>(std::llround(sx), 0, w - 1);
      out.mask.at(y, x) = seq.mask.at(ny, nx);
    }
  return out;
}

}  // namespace

std::optional<ImageSequence> augment(const ImageSequence& seq, AugmentOp op, uint64_t seed) {
  if (seq.frames.empty()) throw std::invalid_argument("augment: empty sequence");
  const int64_t h = seq.mask.height, w = seq.mask.width;
  SplitMix64 rng(SplitMix64::derive(seed, 0x617567ull));  // "aug" stream

  if (op == AugmentOp::hflip) {
    ImageSequence out;
    out.source_id = seq.source_id + "_hflip";
    out.mask = LaneMask(h, w);
    for (const auto& frame : seq.frames) {
      Tensor flipped({3, h, w});
      for (int64_t c = 0; c < 3; ++c)
        for (int64_t y = 0; y < h; ++y)
          for (int64_t x = 0; x < w; ++x) flipped(c, y, x) = frame(c, y, w - 1 - x);
      out.frames.push_back(std::move(flipped));
    }
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) out.mask.at(y, x) = seq.mask.at(y, w - 1 - x);
    return out;
  }

  if (op == AugmentOp::rotate) {
    const double deg = rng.uniform(2.0, 8.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    const double rad = deg * 3.14159265358979323846 / 180.0;
    const double cy = static_cast<double>(h - 1) / 2.0, cx = static_cast<double>(w - 1) / 2.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    ImageSequence out = warp_sequence(seq, [&](int64_t y, int64_t x, double& sy, double& sx) {
      const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
      sy = cy + cs * dy - sn * dx;
      sx = cx + sn * dy + cs * dx;
    });
    out.source_id = seq.source_id + "_rot";
    if (out.mask.lane_count() == 0) return std::nullopt;
    return out;
  }

  // crop_resize
  const double scale = rng.uniform(0.7, 0.9);
  const int64_t ch = std::max<int64_t>(8, static_cast<int64_t>(scale * static_cast<double>(h)));
  const int64_t cw = std::max<int64_t>(8, static_cast<int64_t>(scale * static_cast<double>(w)));
  const int64_t oy = rng.uniform_int(0, h - ch);
  const int64_t ox = rng.uniform_int(0, w - cw);
  ImageSequence out = warp_sequence(seq, [&](int64_t y, int64_t x, double& sy, double& sx) {
    sy = static_cast<double>(oy) +
         static_cast<double>(y) * static_cast<double>(ch - 1) / static_cast<double>(h - 1);
    sx = static_cast<double>(ox) +
         static_cast<double>(x) * static_cast<double>(cw - 1) / static_cast<double>(w - 1);
  });
  out.source_id = seq.source_id + "_crop";
  if (out.mask.lane_count() == 0) return std::nullopt;
  return out;
}

DatasetIndex read_index(const std::filesystem::path& index_file) {
  std::ifstream is(index_file);
  if (!is) throw std::runtime_error("dataset: cannot open index " + index_file.string());
  DatasetIndex index;
  index.root = index_file.parent_path();
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
    if (tokens.size() < 2)
      throw std::runtime_error("dataset: malformed index line: " + line);
    DatasetEntry e;
    e.mask_path = tokens.back();
    tokens.pop_back();
    e.frame_paths = std::move(tokens);
    index.entries.push_back(std::move(e));
  }
  return index;
}

void write_index(const DatasetIndex& index, const std::filesystem::path& index_file) {
  std::ofstream os(index_file);
  if (!os) throw std::runtime_error("dataset: cannot write index " + index_file.string());
  for (const auto& e : index.entries) {
    for (const auto& f : e.frame_paths) os << f << " ";
    os << e.mask_path << "\n";
  }
}

DatasetEntry write_sequence(const std::filesystem::path& dir, const std::string& name,
                            const ImageSequence& seq) {
  std::filesystem::create_directories(dir / name);
  DatasetEntry entry;
  for (size_t i = 0; i < seq.frames.size(); ++i) {
    const std::string rel = name + "/frame_" + std::to_string(i + 1) + ".png";
    write_png(dir / rel, from_float_chw(seq.frames[i]));
    entry.frame_paths.push_back(rel);
  }
  entry.mask_path = name + "/mask.png";
  write_png(dir / entry.mask_path, mask_to_image(seq.mask));
  return entry;
}

std::vector<ImageSequence> load_dataset(const DatasetIndex& index, int64_t n_frames,
                                        const std::vector<int64_t>& strides, LoadStats* stats) {
  std::vector<ImageSequence> out;
  auto note = [&](const std::string& msg) {
    if (stats) {
      ++stats->skipped;
      stats->messages.push_back(msg);
    }
  };

  for (size_t ei = 0; ei < index.entries.size(); ++ei) {
    const auto& entry = index.entries[ei];
    const int64_t clip_len = static_cast<int64_t>(entry.frame_paths.size());
    if (clip_len < n_frames) {
      note("entry " + std::to_string(ei) + ": " + std::to_string(clip_len) +
           " frames, need " + std::to_string(n_frames));
      continue;
    }
    std::vector<Tensor> clip;
    LaneMask mask;
    try {
      for (const auto& rel : entry.frame_paths) {
        ImageU8 img = read_png(index.root / rel);
        if (img.channels != 3) {
          // promote grayscale to RGB
          ImageU8 rgb(img.height, img.width, 3);
          for (int64_t i = 0; i < img.height * img.width; ++i)
            for (int c = 0; c < 3; ++c)
              rgb.data[static_cast<size_t>(i * 3 + c)] = img.data[static_cast<size_t>(i)];
          img = std::move(rgb);
        }
        clip.push_back(to_float_chw(img));
      }
      mask = mask_from_image(read_png(index.root / entry.mask_path));
    } catch (const std::exception& e) {
      note("entry " + std::to_string(ei) + ": " + e.what());
      continue;
    }
    bool uniform = true;
    for (const auto& f : clip)
      uniform = uniform && f.dim(1) == clip[0].dim(1) && f.dim(2) == clip[0].dim(2);
    if (!uniform || mask.height != clip[0].dim(1) || mask.width != clip[0].dim(2)) {
      note("entry " + std::to_string(ei) + ": frame/mask size mismatch");
      continue;
    }

    for (int64_t stride : strides) {
      if (clip_len - (n_frames - 1) * stride < 1) continue;  // stride does not fit this clip
      std::vector<int64_t> picks = sample_with_stride(clip_len, n_frames, stride);
      ImageSequence seq;
      seq.source_id = "entry_" + std::to_string(ei) + "_s" + std::to_string(stride);
      seq.mask = mask;
      for (int64_t p : picks) seq.frames.push_back(clip[static_cast<size_t>(p - 1)]);
      out.push_back(std::move(seq));
      if (stats) ++stats->loaded;
    }
  }
  return out;
}

}  // namespace stlane
