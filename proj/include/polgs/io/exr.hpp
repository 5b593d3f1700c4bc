#pragma once

#include <string>

#include "polgs/image.hpp"

namespace polgs {

// Float32 EXR, ZIP-compressed. 3-channel images use R/G/B, single-channel
// uses Y. Values round-trip bit-exactly at float precision. Throws DataError
// on unreadable files or unsupported channel sets.
Image read_exr(const std::string& path);
void write_exr(const std::string& path, const Image& img);

} // namespace polgs
