#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "octbio/core/dataset.hpp"

namespace octbio {

// Synthetic OCT-like dataset with label-consistent planted features:
//   IRHRF    4-7 small plus-shaped foci       local
//   IRF      1-2 discs of radius size/12      local
//   PAVF     background gradient runs vertically (else horizontally)
//   FAVF     horizontal stripe texture with period size/16 (else size/4)
//   VD       dense point speckle (10% of pixels, else 0.5%)
//   DRT_DME  thick retinal band (else thin)
struct FixtureConfig {
  int n_patients = 12;
  int images_per_patient = 8;
  int image_size = 64;
  std::array<double, 6> label_prior{0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
  std::uint64_t seed = 7;
  SplitTag split = SplitTag::TRAIN;
  std::string id_prefix;  // distinguishes patients across fixtures

  void validate() const;  // throws ContractError
};

// Rendering knobs shared with the planted-feature detectors in tests.
struct FixtureGeometry {
  static constexpr double kBackground = 0.12;
  static constexpr double kGradient = 0.30;
  static constexpr double kTextureAmplitude = 0.06;
  static constexpr double kSpeckle = 0.15;
  static constexpr double kSpeckleDensityOn = 0.10;
  static constexpr double kSpeckleDensityOff = 0.005;
  static constexpr double kBand = 0.08;
  static constexpr double kFociPeak = 0.85;
  static constexpr double kDiscLevel = 0.60;
  static constexpr double kNoiseSigma = 0.006;
  static int disc_radius(int size) { return size / 12; }
};

// Pixels of one image for the given label bits; exposed for tests.
GrayImage render_fixture_image(const std::array<std::int8_t, 6>& labels, int size, std::uint64_t seed);

// Writes images/<id>.png and manifest.jsonl under out_dir. Pure function of
// the config: equal configs give byte-identical files.
Dataset generate_fixture(const FixtureConfig& config, const std::filesystem::path& out_dir);

}  // namespace octbio
