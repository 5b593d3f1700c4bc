#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "polgs/dataset.hpp"
#include "polgs/losses.hpp"
#include "polgs/renderer.hpp"
#include "polgs/scene.hpp"

namespace polgs {

// Training configuration; maps 1:1 onto the JSON config file (same key
// names). Unknown keys are rejected so typos fail loudly.
struct TrainConfig {
    long iterations = 15000;
    long warmup_iterations = 1000; // diffuse-only phase before the Stokes path

    double lr_position = 1.6e-4;   // decays exponentially to 1% by the end
    double lr_color = 2.5e-3;
    double lr_opacity = 5e-2;
    double lr_scale = 5e-3;
    double lr_rotation = 1e-3;
    double lr_cubemap = 1e-2;

    long densify_interval = 100;
    long densify_start = 500;
    long densify_end = 10000;
    double densify_grad_threshold = 2e-4; // mean NDC gradient norm
    double densify_scale_fraction = 0.01; // of scene extent: split vs clone
    double prune_opacity = 5e-3;

    uint64_t seed = 0;
    double eta = 1.5;
    int cubemap_resolution = 32;
    bool enable_polarization = true; // false = diffuse-only ablation

    int init_points = 2000;    // visual-hull sample target
    std::string init_ply;      // optional seed point cloud, overrides the hull
    long checkpoint_interval = 0; // extra periodic checkpoints; 0 = final only

    LossWeights weights;

    // Throws DataError when invariants are violated (warmup < iterations,
    // positive learning rates, positive resolutions).
    void validate() const;

    static TrainConfig from_json_text(const std::string& text);
    static TrainConfig from_json_file(const std::string& path);
    std::string to_json_text() const;
};

// Adam accumulators for one parameter group. Moment arrays mirror the
// parameter layout and are rebuilt when densification changes it.
struct OptimizerState {
    std::vector<double> m, v;
    long step = 0;

    void ensure(size_t n) {
        if (m.size() != n) {
            m.assign(n, 0.0);
            v.assign(n, 0.0);
        }
    }
};

// Surfel parameter groups, in optimizer-state order.
enum SurfelGroup { kGroupPosition = 0, kGroupScale, kGroupRotation,
                   kGroupOpacity, kGroupColor, kSurfelGroupCount };

// Clones or splits surfels whose mean screen-space gradient exceeds the
// threshold (split when the footprint is large relative to the scene extent,
// children shrink and straddle the major axis) and prunes near-transparent
// ones. Kept surfels keep their optimizer moments; new ones start from zero.
// If pruning would empty the cloud it is skipped with a warning. Consumes
// and resets the stats.
void densify_and_prune(Scene& scene, DensifyStats& stats,
                       const TrainConfig& config,
                       std::array<OptimizerState, kSurfelGroupCount>* opt);

// Initial scene: seed points from the configured PLY when present, otherwise
// uniform samples kept only when they fall inside every view's mask (visual
// hull). Scales come from the mean 3-nearest-neighbor spacing.
Scene init_scene(const std::vector<PolarizedView>& views,
                 const TrainConfig& config);

class Trainer {
public:
    Trainer(Scene scene, std::vector<PolarizedView> views, TrainConfig config);

    // One optimization step on an explicit view at the current iteration:
    // render (diffuse before warmup, full Stokes after), all active losses,
    // analytic backward, one Adam update, invariant projection. Does not
    // advance the iteration counter. Throws NumericError on non-finite
    // gradients, naming the parameter group.
    LossReport step_on_view(const PolarizedView& view);

    // step_on_view on the scheduled view, then advances the iteration and
    // runs densification when the schedule says so.
    LossReport step();

    // Full loop from the scene's current iteration to config.iterations.
    // Writes one CSV row per step when a log stream is given; saves
    // checkpoint.bin (and periodic checkpoint_NNNNNN.bin) under out_dir
    // when non-empty.
    void run(std::ostream* csv_log, const std::string& out_dir);

    Scene& scene() { return scene_; }
    const Scene& scene() const { return scene_; }
    const TrainConfig& config() const { return config_; }
    long iteration() const { return scene_.iteration; }
    const std::vector<PolarizedView>& views() const { return views_; }

private:
    const PolarizedView& scheduled_view();
    void adam_step(const SceneGrads& grads);
    void check_finite(const SceneGrads& grads) const;

    Scene scene_;
    std::vector<PolarizedView> views_;
    TrainConfig config_;
    std::array<OptimizerState, kSurfelGroupCount> opt_;
    OptimizerState opt_env_;
    long schedule_epoch_ = -1; // epoch whose shuffled order is cached
    std::vector<int> view_order_;
};

// CSV header and one formatted row; shared by the trainer and tests so logs
// are byte-stable.
std::string loss_csv_header();
std::string loss_csv_row(long iter, const LossReport& r);

} // namespace polgs
