#pragma once

#include <string>

#include "polgs/image.hpp"

namespace polgs {

// 8-bit PNG helpers. Grayscale values map 255 -> 1.0 on read; writers clamp
// to [0,1] before quantizing. Throws DataError on I/O or format problems.
Image read_png_gray(const std::string& path);
void write_png_gray(const std::string& path, const Image& img);
void write_png_rgb(const std::string& path, const Image& img);

} // namespace polgs
