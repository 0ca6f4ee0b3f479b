#pragma once

#include <filesystem>
#include <stdexcept>

#include "ganscope/scene.hpp"
#include "ganscope/tensor.hpp"

namespace ganscope::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit RGB PNG from a [3,H,W] tensor in [-1,1] (values are clamped).
void write_png_rgb(const std::filesystem::path& path, const Tensor& image);
Tensor read_png_rgb(const std::filesystem::path& path);

/// Single-channel PNG with one class id per pixel.
void write_png_labels(const std::filesystem::path& path, const scene::SegMap& seg);
scene::SegMap read_png_labels(const std::filesystem::path& path);

/// Renders a label map with each class painted in its prototype colour.
Tensor colorize(const scene::SegMap& seg, const scene::Inventory& inv);

}  // namespace ganscope::io
