#pragma once

#include <filesystem>
#include <string>

#include "afnio/tensor.hpp"

namespace afnio {

/// Decode an 8-bit PNG or NetPBM (P5/P6, maxval 255) file into a [C,H,W]
/// tensor with values in [0,1]. C is 1 for grayscale, 3 for color.
Tensor<float> read_image(const std::filesystem::path& path);

/// Encode a [C,H,W] tensor (C = 1 or 3) as an 8-bit PNG. Values are
/// clamped to [0,1] before quantization. Output bytes are deterministic.
void write_png(const std::filesystem::path& path, const Tensor<float>& img);

/// Encode as binary NetPBM (P5 for C=1, P6 for C=3), maxval 255.
void write_pnm(const std::filesystem::path& path, const Tensor<float>& img);

}  // namespace afnio
