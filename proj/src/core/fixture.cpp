#include "octbio/core/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "octbio/core/error.hpp"
#include "octbio/core/rng.hpp"

namespace octbio {

namespace fs = std::filesystem;

void FixtureConfig::validate() const {
  if (n_patients < 2) throw ContractError("fixture n_patients must be >= 2");
  if (images_per_patient < 1) throw ContractError("fixture images_per_patient must be >= 1");
  if (image_size < 64) throw ContractError("fixture image_size must be >= 64");
  for (double p : label_prior) {
    if (!(p > 0.0 && p < 1.0)) throw ContractError("fixture label_prior entries must lie in (0, 1)");
  }
}

namespace {

struct Placed {
  int cx, cy, extent;
};

// Rejection-samples a centre away from the border that keeps
// a gap of at least 3 px to every previously placed feature.
std::optional<Placed> place(Rng& rng, int size, int extent, const std::vector<Placed>& taken) {
  const int lo = extent + 2;
  const int hi = size - extent - 2;
  for (int attempt = 0; attempt < 500; ++attempt) {
    const int cx = static_cast<int>(rng.randint(lo, hi));
    const int cy = static_cast<int>(rng.randint(lo, hi));
    const bool clear = std::all_of(taken.begin(), taken.end(), [&](const Placed& p) {
      const double d = std::hypot(cx - p.cx, cy - p.cy);
      return d > extent + p.extent + 3;
    });
    if (clear) return Placed{cx, cy, extent};
  }
  return std::nullopt;
}

}  // namespace

GrayImage render_fixture_image(const std::array<std::int8_t, 6>& labels, int size, std::uint64_t seed) {
  using G = FixtureGeometry;
  const auto on = [&](Biomarker b) { return labels[index_of(b)] == 1; };
  Rng rng(seed);
  GrayImage img(size, size);
  const double span = size - 1;

  const bool flip_gradient = rng.bernoulli(0.5);
  const double period = on(Biomarker::FAVF) ? size / 16.0 : size / 4.0;
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double band_centre = rng.uniform(0.55 * size, 0.70 * size);
  const double band_half = (on(Biomarker::DRT_DME) ? 0.11 : 0.045) * size;
  const double density = on(Biomarker::VD) ? G::kSpeckleDensityOn : G::kSpeckleDensityOff;

  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      // PAVF: brightening towards the bottom. Otherwise a left/right ramp.
      double t = on(Biomarker::PAVF) ? y / span : x / span;
      if (flip_gradient && !on(Biomarker::PAVF)) t = 1.0 - t;
      double v = G::kBackground + G::kGradient * t;
      v += G::kTextureAmplitude * std::sin(2.0 * std::numbers::pi * y / period + phase);
      if (std::abs(y - band_centre) <= band_half) v += G::kBand;
      v += G::kNoiseSigma * rng.normal();
      if (rng.bernoulli(density)) v += G::kSpeckle;
      img.at(x, y) = v;
    }
  }

  std::vector<Placed> taken;
  if (on(Biomarker::IRF)) {
    const int r = G::disc_radius(size);
    const auto n = rng.randint(1, 3);
    for (std::int64_t k = 0; k < n; ++k) {
      const auto p = place(rng, size, r, taken);
      if (!p) break;
      taken.push_back(*p);
      for (int y = p->cy - r; y <= p->cy + r; ++y) {
        for (int x = p->cx - r; x <= p->cx + r; ++x) {
          if ((x - p->cx) * (x - p->cx) + (y - p->cy) * (y - p->cy) <= r * r) img.at(x, y) += G::kDiscLevel;
        }
      }
    }
  }
  if (on(Biomarker::IRHRF)) {
    const auto n = rng.randint(4, 8);
    for (std::int64_t k = 0; k < n; ++k) {
      const auto p = place(rng, size, 1, taken);
      if (!p) break;
      taken.push_back(*p);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int manhattan = std::abs(dx) + std::abs(dy);
          if (manhattan <= 1) img.at(p->cx + dx, p->cy + dy) += manhattan == 0 ? G::kFociPeak : 0.65;
        }
      }
    }
  }

  for (double& v : img.pixels) v = std::clamp(v, 0.0, 1.0);
  return img;
}

Dataset generate_fixture(const FixtureConfig& config, const fs::path& out_dir) {
  config.validate();
  try {
    fs::create_directories(out_dir / "images");
  } catch (const fs::filesystem_error& e) {
    throw IoError("cannot create fixture directory " + out_dir.string() + ": " + e.what());
  }

  static constexpr int kWeeks[] = {0, 40, 100};
  std::vector<ImageRecord> records;
  for (int p = 0; p < config.n_patients; ++p) {
    char pid[32];
    std::snprintf(pid, sizeof pid, "01-%03d", p + 1);
    const std::string patient = config.id_prefix + pid;
    for (int i = 0; i < config.images_per_patient; ++i) {
      const int week = kWeeks[std::min(2, i * 3 / config.images_per_patient)];
      char suffix[32];
      std::snprintf(suffix, sizeof suffix, "_w%d_%02d", week, i);

      ImageRecord r;
      r.image_id = patient + suffix;
      r.patient_id = patient;
      r.week = week;
      r.image_path = fs::path("images") / (r.image_id + ".png");

      Rng label_rng(derive_seed(config.seed, "labels", {static_cast<std::uint64_t>(p),
                                                        static_cast<std::uint64_t>(i)}));
      std::array<std::int8_t, 6> bits{};
      for (std::size_t b = 0; b < kNumBiomarkers; ++b) {
        bits[b] = label_rng.bernoulli(config.label_prior[b]) ? 1 : 0;
      }
      r.labels.assign(bits.begin(), bits.end());
      const double thick = bits[index_of(Biomarker::DRT_DME)] ? 0.8 : 0.3;
      r.clinical = std::array<double, 2>{0.5 + 0.1 * label_rng.normal(), thick + 0.05 * label_rng.normal()};

      const auto pixel_seed = derive_seed(config.seed, "pixels", {static_cast<std::uint64_t>(p),
                                                                  static_cast<std::uint64_t>(i)});
      write_png(out_dir / r.image_path, render_fixture_image(bits, config.image_size, pixel_seed));
      records.push_back(std::move(r));
    }
  }
  Dataset ds(std::move(records), config.split, out_dir);
  write_manifest(ds, out_dir / "manifest.jsonl");
  return ds;
}

}  // namespace octbio
