#include "loi/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include <fmt/core.h>
#include <png.h>

namespace loi {

namespace {

// Simplified libpng API: no setjmp, failures surface as return codes.
struct PngImage {
  png_image image;
  PngImage() {
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

}  // namespace

ImageBuffer read_png(const std::filesystem::path& path) {
  PngImage png;
  if (!png_image_begin_read_from_file(&png.image, path.string().c_str())) {
    throw Error(fmt::format("cannot read PNG '{}': {}", path.string(), png.image.message));
  }
  const bool color = (png.image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  const int width = static_cast<int>(png.image.width);
  const int height = static_cast<int>(png.image.height);
  std::vector<png_byte> pixels(PNG_IMAGE_SIZE(png.image));
  if (!png_image_finish_read(&png.image, nullptr, pixels.data(), 0, nullptr)) {
    throw Error(fmt::format("cannot decode PNG '{}': {}", path.string(), png.image.message));
  }
  ImageBuffer img(width, height, channels);
  auto out = img.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pixels[i] / 255.0;
  return img;
}

void write_png(const std::filesystem::path& path, const ImageBuffer& img) {
  if (img.empty()) throw Error("write_png: empty image");
  PngImage png;
  png.image.width = static_cast<png_uint_32>(img.width());
  png.image.height = static_cast<png_uint_32>(img.height());
  png.image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

  const auto in = img.data();
  std::vector<png_byte> pixels(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    pixels[i] = static_cast<png_byte>(std::lround(std::clamp(in[i], 0.0, 1.0) * 255.0));
  }
  if (!png_image_write_to_file(&png.image, path.string().c_str(), 0, pixels.data(), 0,
                               nullptr)) {
    throw Error(fmt::format("cannot write PNG '{}': {}", path.string(), png.image.message));
  }
}

}  // namespace loi
