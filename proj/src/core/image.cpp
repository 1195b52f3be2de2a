#include "octbio/core/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "octbio/core/error.hpp"

namespace octbio {

GrayImage read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw IoError("cannot read image " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot decode image " + path.string() + ": " + msg);
  }
  GrayImage out(static_cast<int>(img.width), static_cast<int>(img.height));
  std::transform(buf.begin(), buf.end(), out.pixels.begin(),
                 [](std::uint8_t v) { return v / 255.0; });
  return out;
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
  std::vector<std::uint8_t> buf(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), buf.begin(), [](double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  });
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot write image " + path.string() + ": " + msg);
  }
}

}  // namespace octbio
