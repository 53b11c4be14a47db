#pragma once

#include <string>

#include "depthpatch/tensor.hpp"

namespace depthpatch {

// 8-bit RGB PNG. Values are quantized with round(v*255), so a save/load
// round trip is exact to within 1/255 per channel.
void write_png(const Image& img, const std::string& path);
Image read_png(const std::string& path);

// Grayscale PFM ("Pf"), little-endian, scale -1.0, rows bottom-to-top.
// Samples are stored as float32; maps whose values are float32-representable
// round trip bit-exactly. NaN or Inf values are rejected.
void write_disparity(const DisparityMap& map, const std::string& path);
DisparityMap read_disparity(const std::string& path);

}  // namespace depthpatch
