#pragma once

#include <cstdint>
#include <vector>

#include "polgs/camera.hpp"
#include "polgs/rasterizer.hpp"
#include "polgs/scene.hpp"
#include "polgs/stokes.hpp"

namespace polgs {

// Diffuse renders plain splatted color only (the warm-up path); Full adds
// Fresnel transmission, azimuth rotation and the cubemap specular term.
enum class RenderMode { Diffuse, Full };

// One view's forward render: geometry buffers from the rasterizer plus the
// shaded Stokes images and the diffuse/specular split of s0. The specular
// term is scaled by accumulated alpha so empty pixels stay empty; on fully
// covered pixels this is exactly the model's composition.
struct RenderOutputs {
    std::vector<ProjectedSurfel> projected;
    RenderBuffers geo;
    StokesImage stokes;     // 3 channels per plane
    Image diffuse_s0;       // transmission part of s0
    Image specular_s0;      // reflection part of s0
    RenderMode mode = RenderMode::Full;
};

RenderOutputs render_view(const Scene& scene, const Camera& camera,
                          RenderMode mode, double eta,
                          bool record_for_backward);

// Gradients w.r.t. everything the optimizer owns, plus the per-surfel
// screen-gradient statistics the densifier consumes.
struct SceneGrads {
    SurfelGrads surfels;            // cloud-sized
    std::vector<double> env_raw;    // cubemap raw parameter gradients
    std::vector<double> ndc_grad;   // cloud-sized screen-space gradient norm
    std::vector<uint8_t> visible;   // cloud-sized, 1 if projected this view

    SceneGrads(size_t cloud_size, size_t env_size)
        : env_raw(env_size, 0.0), ndc_grad(cloud_size, 0.0),
          visible(cloud_size, 0) {
        surfels.resize(cloud_size);
    }
};

// Upstream loss gradients w.r.t. the renderer's user-facing outputs. Planes
// may be empty images when a loss is inactive; shapes must otherwise match.
struct RenderGrads {
    Image g_s0, g_s1, g_s2;   // 3ch each
    Image g_alpha;            // 1ch, mask-loss gradient
    Image g_depth_map;        // 1ch, gradient w.r.t. alpha-normalized depth
    Image g_normal_map;       // 3ch, gradient w.r.t. unit normal map
};

SceneGrads render_backward(const Scene& scene, const Camera& camera,
                           const RenderOutputs& out, const RenderGrads& up,
                           double eta);

} // namespace polgs
