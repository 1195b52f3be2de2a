#include "octbio/augment/augment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "octbio/core/error.hpp"

namespace octbio::augment {

namespace {
std::atomic<std::uint64_t> g_crop_fallbacks{0};

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }
}  // namespace

std::string_view to_string(Phase p) { return p == Phase::PHASE1 ? "PHASE1" : "PHASE2"; }

Phase parse_phase(std::string_view s) {
  if (s == "PHASE1" || s == "1") return Phase::PHASE1;
  if (s == "PHASE2" || s == "2") return Phase::PHASE2;
  throw ContractError("unknown phase '" + std::string(s) + "'");
}

void AugmentRecipe::validate() const {
  if (target_size < 32) throw ContractError("augment target_size must be >= 32, got " + std::to_string(target_size));
  if (!is_probability(grayscale_p) || !is_probability(jitter_p) || !is_probability(hflip_p)) {
    throw ContractError("augment probabilities must lie in [0, 1]");
  }
  if (jitter.brightness < 0 || jitter.contrast < 0 || jitter.saturation < 0 || jitter.hue < 0 || jitter.hue > 0.5) {
    throw ContractError("jitter strengths must be non-negative (hue <= 0.5)");
  }
  if (!(crop_scale.first > 0.0 && crop_scale.first <= crop_scale.second && crop_scale.second <= 1.0)) {
    throw ContractError("crop_scale must satisfy 0 < lo <= hi <= 1");
  }
  if (!(crop_aspect.first > 0.0 && crop_aspect.first <= crop_aspect.second)) {
    throw ContractError("crop_aspect must satisfy 0 < lo <= hi");
  }
  if (perspective) {
    if (perspective->distortion_scale < 0.0 || perspective->distortion_scale > 1.0 ||
        !is_probability(perspective->p) || perspective->fill < 0 || perspective->fill > 255) {
      throw ContractError("perspective parameters out of range");
    }
  }
  if (!(norm_std > 0.0)) throw ContractError("norm_std must be positive");
}

AugmentRecipe build_recipe(Phase phase, int target_size) {
  AugmentRecipe r;
  r.phase = phase;
  r.target_size = target_size;
  if (phase == Phase::PHASE2) r.perspective = PerspectiveSpec{};
  r.validate();
  return r;
}

std::uint64_t SampleSeed::stream() const {
  return derive_seed(run_seed, "sample", {static_cast<std::uint64_t>(epoch), fnv1a64(image_id)});
}

std::vector<double> AugmentTrace::outcome_vector() const {
  std::vector<double> v{double(grayscale), double(jitter)};
  for (int o : jitter_order) v.push_back(o);
  v.insert(v.end(), jitter_factors.begin(), jitter_factors.end());
  v.insert(v.end(), {double(crop.top), double(crop.left), double(crop.height), double(crop.width),
                     double(crop.fallback), double(hflip), double(perspective)});
  for (const auto& p : perspective_end) v.insert(v.end(), p.begin(), p.end());
  return v;
}

std::uint64_t crop_fallback_count() { return g_crop_fallbacks.load(); }

namespace {

struct Tap {
  int index;
  double weight;
};

// Triangle-filter taps; the filter widens when downscaling so the result is
// anti-aliased, and reduces to half-pixel-centred bilinear when upscaling.
std::vector<std::vector<Tap>> resample_taps(int in, int out) {
  const double scale = static_cast<double>(in) / out;
  const double support = std::max(scale, 1.0);
  std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(out));
  for (int i = 0; i < out; ++i) {
    const double centre = (i + 0.5) * scale;
    const int lo = std::max(0, static_cast<int>(std::floor(centre - support)));
    const int hi = std::min(in, static_cast<int>(std::ceil(centre + support)));
    double total = 0.0;
    for (int j = lo; j < hi; ++j) {
      const double w = std::max(0.0, 1.0 - std::abs((j + 0.5 - centre) / support));
      if (w > 0.0) {
        taps[i].push_back({j, w});
        total += w;
      }
    }
    for (auto& t : taps[i]) t.weight /= total;
  }
  return taps;
}

void resize_plane(const double* src, int w, int h, double* dst, int ow, int oh) {
  const auto tx = resample_taps(w, ow);
  const auto ty = resample_taps(h, oh);
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (const auto& t : tx[x]) s += t.weight * src[y * w + t.index];
      tmp[y * ow + x] = s;
    }
  }
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (const auto& t : ty[y]) s += t.weight * tmp[t.index * ow + x];
      dst[y * ow + x] = s;
    }
  }
}

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

void for_each_pixel(Planar& img, auto&& f) {
  const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  for (std::size_t i = 0; i < plane; ++i) f(img.data[i], img.data[plane + i], img.data[2 * plane + i]);
}

void to_grayscale(Planar& img) {
  for_each_pixel(img, [](double& r, double& g, double& b) { r = g = b = luma(r, g, b); });
}

void blend(Planar& img, double factor, auto&& other) {
  for_each_pixel(img, [&](double& r, double& g, double& b) {
    const double o = other(r, g, b);
    r = std::clamp(factor * r + (1.0 - factor) * o, 0.0, 1.0);
    g = std::clamp(factor * g + (1.0 - factor) * o, 0.0, 1.0);
    b = std::clamp(factor * b + (1.0 - factor) * o, 0.0, 1.0);
  });
}

void adjust_hue(Planar& img, double shift) {
  for_each_pixel(img, [&](double& r, double& g, double& b) {
    const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
    const double delta = mx - mn;
    if (delta <= 0.0) return;  // grey pixels have no hue
    double h;
    if (mx == r) {
      h = std::fmod((g - b) / delta, 6.0);
    } else if (mx == g) {
      h = (b - r) / delta + 2.0;
    } else {
      h = (r - g) / delta + 4.0;
    }
    h = h / 6.0 + shift;
    h -= std::floor(h);
    const double s = delta / mx, v = mx;
    const double hh = h * 6.0;
    const int sector = static_cast<int>(hh) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (sector) {
      case 0: r = v, g = t, b = p; break;
      case 1: r = q, g = v, b = p; break;
      case 2: r = p, g = v, b = t; break;
      case 3: r = p, g = q, b = v; break;
      case 4: r = t, g = p, b = v; break;
      default: r = v, g = p, b = q; break;
    }
  });
}

void color_jitter(Planar& img, const JitterStrengths& s, Rng& rng, AugmentTrace& trace) {
  std::array<int, 4> order{0, 1, 2, 3};
  for (int i = 3; i > 0; --i) std::swap(order[i], order[rng.randint(0, i + 1)]);
  auto factor = [&](double strength) { return rng.uniform(std::max(0.0, 1.0 - strength), 1.0 + strength); };
  const double brightness = factor(s.brightness);
  const double contrast = factor(s.contrast);
  const double saturation = factor(s.saturation);
  const double hue = rng.uniform(-s.hue, s.hue);
  trace.jitter_order = order;
  trace.jitter_factors = {brightness, contrast, saturation, hue};

  for (int op : order) {
    switch (op) {
      case 0:
        blend(img, brightness, [](double, double, double) { return 0.0; });
        break;
      case 1: {
        double m = 0.0;
        for_each_pixel(img, [&](double& r, double& g, double& b) { m += luma(r, g, b); });
        m /= static_cast<double>(img.height) * img.width;
        blend(img, contrast, [m](double, double, double) { return m; });
        break;
      }
      case 2:
        blend(img, saturation, [](double r, double g, double b) { return luma(r, g, b); });
        break;
      default:
        adjust_hue(img, hue);
        break;
    }
  }
}

Planar crop(const Planar& img, const CropBox& box) {
  Planar out(img.channels, box.height, box.width);
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < box.height; ++y) {
      for (int x = 0; x < box.width; ++x) out.at(c, y, x) = img.at(c, box.top + y, box.left + x);
    }
  }
  return out;
}

void hflip(Planar& img) {
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y) {
      double* row = &img.at(c, y, 0);
      std::reverse(row, row + img.width);
    }
  }
}

// Solves for the 8 homography coefficients taking `from` to `to`.
std::array<double, 8> homography(const Quad& from, const Quad& to) {
  double m[8][9] = {};
  for (int i = 0; i < 4; ++i) {
    const double x = from[i][0], y = from[i][1], u = to[i][0], v = to[i][1];
    double* r0 = m[2 * i];
    double* r1 = m[2 * i + 1];
    r0[0] = x, r0[1] = y, r0[2] = 1, r0[6] = -x * u, r0[7] = -y * u, r0[8] = u;
    r1[3] = x, r1[4] = y, r1[5] = 1, r1[6] = -x * v, r1[7] = -y * v, r1[8] = v;
  }
  for (int col = 0; col < 8; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 8; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    }
    if (std::abs(m[pivot][col]) < 1e-12) throw ContractError("perspective quad is degenerate");
    std::swap(m[col], m[pivot]);
    for (int r = 0; r < 8; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int k = col; k < 9; ++k) m[r][k] -= f * m[col][k];
    }
  }
  std::array<double, 8> h{};
  for (int i = 0; i < 8; ++i) h[i] = m[i][8] / m[i][i];
  return h;
}

}  // namespace

GrayImage resize_bilinear(const GrayImage& image, int out_width, int out_height) {
  GrayImage out(out_width, out_height);
  resize_plane(image.pixels.data(), image.width, image.height, out.pixels.data(), out_width, out_height);
  return out;
}

Planar resize_bilinear(const Planar& image, int out_width, int out_height) {
  Planar out(image.channels, out_height, out_width);
  const std::size_t in_plane = static_cast<std::size_t>(image.height) * image.width;
  const std::size_t out_plane = static_cast<std::size_t>(out_height) * out_width;
  for (int c = 0; c < image.channels; ++c) {
    resize_plane(image.data.data() + c * in_plane, image.width, image.height, out.data.data() + c * out_plane,
                 out_width, out_height);
  }
  return out;
}

CropBox sample_crop(int width, int height, std::pair<double, double> scale, std::pair<double, double> aspect,
                    Rng& rng) {
  const double area = static_cast<double>(width) * height;
  const double log_lo = std::log(aspect.first), log_hi = std::log(aspect.second);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(scale.first, scale.second);
    const double ratio = std::exp(rng.uniform(log_lo, log_hi));
    const int w = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (w > 0 && w <= width && h > 0 && h <= height) {
      const int top = static_cast<int>(rng.randint(0, height - h + 1));
      const int left = static_cast<int>(rng.randint(0, width - w + 1));
      return {top, left, h, w, false};
    }
  }
  g_crop_fallbacks.fetch_add(1);
  const double in_ratio = static_cast<double>(width) / height;
  int w = width, h = height;
  if (in_ratio < aspect.first) {
    h = static_cast<int>(std::lround(w / aspect.first));
  } else if (in_ratio > aspect.second) {
    w = static_cast<int>(std::lround(h * aspect.second));
  }
  return {(height - h) / 2, (width - w) / 2, h, w, true};
}

Quad identity_quad(int width, int height) {
  const double r = width - 1, b = height - 1;
  return Quad{{{0, 0}, {r, 0}, {r, b}, {0, b}}};
}

Quad sample_perspective(int width, int height, double distortion_scale, Rng& rng) {
  const int dw = static_cast<int>(distortion_scale * (width / 2));
  const int dh = static_cast<int>(distortion_scale * (height / 2));
  auto ri = [&](std::int64_t lo, std::int64_t hi) { return static_cast<double>(rng.randint(lo, hi)); };
  Quad q;
  q[0] = {ri(0, dw + 1), ri(0, dh + 1)};
  q[1] = {ri(width - dw - 1, width), ri(0, dh + 1)};
  q[2] = {ri(width - dw - 1, width), ri(height - dh - 1, height)};
  q[3] = {ri(0, dw + 1), ri(height - dh - 1, height)};
  return q;
}

Planar perspective_warp(const Planar& image, const Quad& start, const Quad& end, double fill) {
  // Output coordinates map back to the source through end -> start.
  const auto h = homography(end, start);
  Planar out(image.channels, image.height, image.width, fill);
  const double xmax = image.width - 1, ymax = image.height - 1;
  constexpr double kSlack = 1e-9;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const double den = h[6] * x + h[7] * y + 1.0;
      const double sx = (h[0] * x + h[1] * y + h[2]) / den;
      const double sy = (h[3] * x + h[4] * y + h[5]) / den;
      if (!(sx >= -kSlack && sx <= xmax + kSlack && sy >= -kSlack && sy <= ymax + kSlack)) continue;
      const double cx = std::clamp(sx, 0.0, xmax), cy = std::clamp(sy, 0.0, ymax);
      const int x0 = static_cast<int>(std::floor(cx)), y0 = static_cast<int>(std::floor(cy));
      const int x1 = std::min(x0 + 1, image.width - 1), y1 = std::min(y0 + 1, image.height - 1);
      const double fx = cx - x0, fy = cy - y0;
      for (int c = 0; c < image.channels; ++c) {
        const double top = image.at(c, y0, x0) * (1 - fx) + image.at(c, y0, x1) * fx;
        const double bot = image.at(c, y1, x0) * (1 - fx) + image.at(c, y1, x1) * fx;
        out.at(c, y, x) = top * (1 - fy) + bot * fy;
      }
    }
  }
  return out;
}

namespace {

Planar replicate(const GrayImage& image) {
  Planar out(3, image.height, image.width);
  const std::size_t plane = image.pixels.size();
  for (int c = 0; c < 3; ++c) std::copy(image.pixels.begin(), image.pixels.end(), out.data.begin() + c * plane);
  return out;
}

void normalize_in_place(Planar& img, double mean, double std) {
  for (double& v : img.data) v = normalize(v, mean, std);
}

}  // namespace

AugmentResult apply_train(const AugmentRecipe& recipe, const GrayImage& image, const SampleSeed& seed) {
  if (image.empty()) throw ContractError("apply_train: empty image");
  recipe.validate();
  Rng rng(seed.stream());
  AugmentResult res;
  auto& trace = res.trace;

  Planar img = replicate(image);
  if (rng.bernoulli(recipe.grayscale_p)) {
    trace.grayscale = true;
    to_grayscale(img);
  }
  if (rng.bernoulli(recipe.jitter_p)) {
    trace.jitter = true;
    color_jitter(img, recipe.jitter, rng, trace);
  }
  trace.crop = sample_crop(img.width, img.height, recipe.crop_scale, recipe.crop_aspect, rng);
  img = resize_bilinear(crop(img, trace.crop), recipe.target_size, recipe.target_size);
  if (rng.bernoulli(recipe.hflip_p)) {
    trace.hflip = true;
    hflip(img);
  }
  if (recipe.perspective && rng.bernoulli(recipe.perspective->p)) {
    trace.perspective = true;
    trace.perspective_end = sample_perspective(img.width, img.height, recipe.perspective->distortion_scale, rng);
    img = perspective_warp(img, identity_quad(img.width, img.height), trace.perspective_end,
                           recipe.perspective->fill / 255.0);
  }
  normalize_in_place(img, recipe.norm_mean, recipe.norm_std);
  res.tensor = std::move(img);
  return res;
}

Planar apply_eval(int target_size, const GrayImage& image, double norm_mean, double norm_std) {
  if (target_size < 32) throw ContractError("apply_eval: target_size must be >= 32, got " + std::to_string(target_size));
  if (image.empty()) throw ContractError("apply_eval: empty image");
  Planar img = replicate(resize_bilinear(image, target_size, target_size));
  normalize_in_place(img, norm_mean, norm_std);
  return img;
}

}  // namespace octbio::augment
