#pragma once

#include <string>
#include <vector>

#include "polgs/types.hpp"

namespace polgs {

struct PlyPoint {
    Vec3 position = Vec3::Zero();
    Vec3 normal = Vec3::Zero();
    Rgb color = Rgb(0.5, 0.5, 0.5); // [0,1]
    double opacity = 1.0;
};

// Binary little-endian PLY with per-vertex position, normal, 8-bit color and
// a float opacity — the exporter's fixed layout.
void write_ply(const std::string& path, const std::vector<PlyPoint>& points);

// Reads ascii or binary little-endian PLY vertices: x/y/z required
// (float or double); nx/ny/nz, red/green/blue, opacity picked up when
// present; other properties skipped. Throws DataError on malformed files.
std::vector<PlyPoint> read_ply(const std::string& path);

} // namespace polgs
