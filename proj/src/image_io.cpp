#include "dopnet/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace dopnet {

void write_png(const std::filesystem::path& path, const Tensor& image) {
  if (image.ndim() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw ValidationError("write_png: expected [1|3,H,W], got " + shape_str(image.shape()));
  }
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  std::vector<png_byte> buf(C * H * W);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < H * W; ++i) {
      const double v = std::clamp(image[c * H * W + i], 0.0, 1.0);
      buf[i * C + c] = static_cast<png_byte>(std::lround(v * 255.0));
    }
  }
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(W);
  img.height = static_cast<png_uint_32>(H);
  img.format = C == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw std::runtime_error("cannot write " + path.string() + ": " + msg);
  }
}

Tensor read_png(const std::filesystem::path& path, bool gray) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw ValidationError("cannot read " + path.string() + ": " + img.message);
  }
  const std::size_t C = gray ? 1 : 3;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const std::size_t H = img.height, W = img.width;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw ValidationError("cannot decode " + path.string() + ": " + msg);
  }
  Tensor out({C, H, W});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < H * W; ++i) out[c * H * W + i] = buf[i * C + c] / 255.0;
  }
  return out;
}

}  // namespace dopnet
