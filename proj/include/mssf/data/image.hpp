// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mssf/tensor.hpp"

namespace mssf::data {

/// Decodes an 8- or 16-bit RGB PNG or binary PPM (P6) into [3,H,W] values
/// in [0,1] (v / 255 or v / 65535). Anything else is an InputError.
TensorF load_image(const std::string& path);

enum class BitDepth { eight = 8, sixteen = 16 };

/// Writes [3,H,W] as PNG or PPM (chosen by extension), clamping to [0,1]
/// and rounding to the nearest code.
void save_image(const std::string& path, const TensorF& image, BitDepth depth = BitDepth::eight);

/// Raw interleaved 8-bit RGB buffer to PNG; used by plotting.
void write_png_rgb8(const std::string& path, std::size_t width, std::size_t height,
                    const std::vector<std::uint8_t>& rgb);

}  // namespace mssf::data
