#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stlane/tensor.hpp"

namespace stlane {

// N ordered RGB frames in [0,1] plus the ground-truth mask of the last frame.
struct ImageSequence {
  std::vector<Tensor> frames;
  LaneMask mask;
  std::string source_id;
};

namespace challenge {
constexpr uint32_t none = 0;
constexpr uint32_t occlusion = 1u << 0;     // random rectangles in random frames
constexpr uint32_t shadow = 1u << 1;        // darkened horizontal band
constexpr uint32_t brightness = 1u << 2;    // per-frame gain
constexpr uint32_t blur = 1u << 3;          // 3x3 box blur
constexpr uint32_t occlude_last = 1u << 4;  // band hiding the lanes in frame N only
}  // namespace challenge

struct LaneCurve {
  // image-space column as a quadratic in s = y/(H-1) - 1 (s = 0 at the
  // bottom row): x(s) = c + b*s + a*s^2, pixels
  double a = 0, b = 0, c = 0;
  double width = 3.0;   // stroke width, px
  double bright = 0.9;  // lane paint level
  bool dashed = false;
  double dash_on = 8, dash_off = 6;
};

struct SceneSpec {
  int64_t height = 128, width = 256;
  int frames = 5;
  std::vector<LaneCurve> lanes;
  double drift = 0.0;       // lateral px per frame step (frame N is reference)
  double dash_speed = 0.0;  // dash phase rows per frame step (forward motion)
  uint32_t challenges = challenge::none;
  struct Rect {
    int64_t x = 0, y = 0, w = 0, h = 0;
  };
  std::vector<Rect> occlusion_rects;  // used by occlusion / occlude_last
  int64_t shadow_y0 = 0, shadow_y1 = 0;
  double shadow_gain = 0.55;
  std::vector<double> frame_gain;  // per-frame brightness, empty = 1.0
  double road_base = 0.35, road_slope = 0.10;
  double tint_r = 0.0, tint_b = 0.0;
  uint64_t seed = 0;
};

// Draws a random in-bounds scene; `challenges` picks which corruptions are
// parameterized (and enabled) for this scene.
SceneSpec random_scene(uint64_t seed, int64_t height, int64_t width, int frames,
                       uint32_t challenges);

// Renders frames with per-frame motion and challenge corruptions. The mask is
// the uncorrupted lane geometry of the last frame. Deterministic per spec.
ImageSequence generate_sequence(const SceneSpec& spec);

// Analytic lane center of `lane` at row y for frame index (0-based).
double lane_center_x(const SceneSpec& spec, size_t lane, int64_t y, int frame_index);

// Indices {L-(N-1)s, ..., L-s, L}; the labeled frame L is always last.
std::vector<int64_t> sample_with_stride(int64_t labeled_index, int64_t n_frames, int64_t stride);

enum class AugmentOp { hflip, rotate, crop_resize };

// Applies the same geometric transform to every frame and the mask (mask is
// resampled nearest-neighbor). Returns nothing when the transform leaves an
// empty lane mask; such entries are skipped.
std::optional<ImageSequence> augment(const ImageSequence& seq, AugmentOp op, uint64_t seed);

struct DatasetEntry {
  std::vector<std::string> frame_paths;  // >= N entries; stride-sampled on load
  std::string mask_path;
};

struct DatasetIndex {
  std::filesystem::path root;
  std::vector<DatasetEntry> entries;
};

DatasetIndex read_index(const std::filesystem::path& index_file);
void write_index(const DatasetIndex& index, const std::filesystem::path& index_file);

// Writes frames and mask as 8-bit PNGs under dir and returns the entry
// (paths relative to dir).
DatasetEntry write_sequence(const std::filesystem::path& dir, const std::string& name,
                            const ImageSequence& seq);

struct LoadStats {
  int64_t loaded = 0;
  int64_t skipped = 0;
  std::vector<std::string> messages;
};

// Decodes entries to sequences of exactly n_frames. Entries with more frames
// are expanded once per stride that fits (last-frame anchored); entries that
// fail validation are skipped with a diagnostic.
std::vector<ImageSequence> load_dataset(const DatasetIndex& index, int64_t n_frames,
                                        const std::vector<int64_t>& strides, LoadStats* stats);

}  // namespace stlane
