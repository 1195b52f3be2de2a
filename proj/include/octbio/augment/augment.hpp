#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "octbio/core/image.hpp"
#include "octbio/core/rng.hpp"

namespace octbio::augment {

enum class Phase { PHASE1, PHASE2 };

std::string_view to_string(Phase p);
Phase parse_phase(std::string_view s);

struct JitterStrengths {
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.2;
  double hue = 0.1;
};

struct PerspectiveSpec {
  double distortion_scale = 0.23;
  double p = 1.0;
  int fill = 255;  // 8-bit intensity for exposed regions
};

struct AugmentRecipe {
  Phase phase = Phase::PHASE1;
  int target_size = 512;
  double grayscale_p = 0.2;
  double jitter_p = 0.8;
  JitterStrengths jitter;
  std::pair<double, double> crop_scale{0.7, 1.0};
  std::pair<double, double> crop_aspect{3.0 / 4.0, 4.0 / 3.0};
  double hflip_p = 0.5;
  std::optional<PerspectiveSpec> perspective;
  double norm_mean = 0.1706;
  double norm_std = 0.2112;

  void validate() const;  // throws ContractError
};

// Phase 1: grayscale, jitter, resized crop, flip, normalise.
// Phase 2 adds the perspective warp (0.23, p = 1, fill 255).
AugmentRecipe build_recipe(Phase phase, int target_size);

// Per-sample randomness key. Equal seeds give identical augmentations no
// matter which thread or worker runs them.
struct SampleSeed {
  std::uint64_t run_seed = 0;
  int epoch = 0;
  std::string image_id;

  std::uint64_t stream() const;
};

// C x H x W planar image.
struct Planar {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Planar() = default;
  Planar(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}
  double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
};

struct CropBox {
  int top = 0, left = 0, height = 0, width = 0;
  bool fallback = false;
  bool operator==(const CropBox&) const = default;
};

using Quad = std::array<std::array<double, 2>, 4>;  // tl, tr, br, bl as (x, y)

// What the stochastic stages actually did for one sample.
struct AugmentTrace {
  bool grayscale = false;
  bool jitter = false;
  std::array<int, 4> jitter_order{0, 1, 2, 3};
  std::array<double, 4> jitter_factors{1.0, 1.0, 1.0, 0.0};  // brightness, contrast, saturation, hue
  CropBox crop;
  bool hflip = false;
  bool perspective = false;
  Quad perspective_end{};

  std::vector<double> outcome_vector() const;
};

struct AugmentResult {
  Planar tensor;  // 3 x S x S, normalised
  AugmentTrace trace;
};

AugmentResult apply_train(const AugmentRecipe& recipe, const GrayImage& image, const SampleSeed& seed);

// Resize, replicate to 3 channels, normalise. Draws no random numbers.
Planar apply_eval(int target_size, const GrayImage& image, double norm_mean, double norm_std);

// Building blocks, public for tests.
GrayImage resize_bilinear(const GrayImage& image, int out_width, int out_height);
Planar resize_bilinear(const Planar& image, int out_width, int out_height);
CropBox sample_crop(int width, int height, std::pair<double, double> scale, std::pair<double, double> aspect,
                    Rng& rng);
Quad sample_perspective(int width, int height, double distortion_scale, Rng& rng);
Quad identity_quad(int width, int height);
// Warps so that `start` corners land on `end`; pixels whose source falls
// outside the image get `fill` (intensity in [0, 1]).
Planar perspective_warp(const Planar& image, const Quad& start, const Quad& end, double fill);

inline double normalize(double v, double mean, double std) { return (v - mean) / std; }
inline double denormalize(double v, double mean, double std) { return v * std + mean; }

// Crops that fell back to the centre window after 10 rejected draws.
std::uint64_t crop_fallback_count();

}  // namespace octbio::augment
