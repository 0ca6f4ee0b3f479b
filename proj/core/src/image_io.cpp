#include "ganscope/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace ganscope::io {
namespace {

// libpng's simplified API: no setjmp error handling to manage.
void write_png(const std::filesystem::path& path, int width, int height, bool rgb,
               const std::vector<std::uint8_t>& pixels) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = rgb ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot write PNG '" + path.string() + "': " + msg);
  }
}

struct Decoded {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

Decoded read_png(const std::filesystem::path& path, bool rgb) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot read PNG '" + path.string() + "': " + msg);
  }
  const bool is_color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  if (is_color != rgb) {
    png_image_free(&img);
    throw IoError("'" + path.string() + "' is not " + (rgb ? "an RGB" : "a single-channel") + " PNG");
  }
  img.format = rgb ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Decoded d;
  d.width = static_cast<int>(img.width);
  d.height = static_cast<int>(img.height);
  d.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, d.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot decode PNG '" + path.string() + "': " + msg);
  }
  return d;
}

}  // namespace

void write_png_rgb(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("write_png_rgb expects [3,H,W], got " + to_string(image.shape()));
  }
  const int h = image.dim(1), w = image.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<std::uint8_t> px(plane * 3);
  auto d = image.data();
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      const float v = std::clamp(0.5f * (d[c * plane + i] + 1.0f), 0.0f, 1.0f);
      px[i * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
  write_png(path, w, h, true, px);
}

Tensor read_png_rgb(const std::filesystem::path& path) {
  Decoded d = read_png(path, true);
  const std::size_t plane = static_cast<std::size_t>(d.width) * d.height;
  Tensor img(Shape{3, d.height, d.width});
  auto out = img.data();
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c)
      out[c * plane + i] = 2.0f * (static_cast<float>(d.pixels[i * 3 + c]) / 255.0f) - 1.0f;
  return img;
}

void write_png_labels(const std::filesystem::path& path, const scene::SegMap& seg) {
  write_png(path, seg.width, seg.height, false, seg.labels);
}

scene::SegMap read_png_labels(const std::filesystem::path& path) {
  Decoded d = read_png(path, false);
  scene::SegMap seg(d.height, d.width);
  seg.labels = std::move(d.pixels);
  return seg;
}

Tensor colorize(const scene::SegMap& seg, const scene::Inventory& inv) {
  const std::size_t plane = static_cast<std::size_t>(seg.height) * seg.width;
  Tensor img(Shape{3, seg.height, seg.width});
  auto out = img.data();
  for (std::size_t i = 0; i < plane; ++i) {
    scene::Rgb c{0.5f, 0.5f, 0.5f};
    if (seg.labels[i] != 0) c = inv.at(seg.labels[i]).color;
    out[i] = scene::from_unit(c.r);
    out[plane + i] = scene::from_unit(c.g);
    out[2 * plane + i] = scene::from_unit(c.b);
  }
  return img;
}

}  // namespace ganscope::io
