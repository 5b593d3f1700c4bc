#pragma once

#include <string>

#include "polgs/surfel.hpp"
#include "polgs/cubemap.hpp"

namespace polgs {

// Complete optimization state: surfel cloud, environment map, iteration
// counter. Checkpoints round-trip all of it bit-exactly.
struct Scene {
    SurfelCloud cloud;
    Cubemap environment;
    long iteration = 0;

    Scene() = default;
    explicit Scene(int cubemap_resolution) : environment(cubemap_resolution) {}
};

// Binary checkpoint. The color block is stored with an explicit
// spherical-harmonics coefficient count; this engine only optimizes the DC
// band, so loading a higher-band file keeps band 0 and warns on stderr.
void save_checkpoint(const Scene& scene, const std::string& path);
Scene load_checkpoint(const std::string& path);

} // namespace polgs
