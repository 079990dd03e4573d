#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hintpose/geometry.hpp"
#include "hintpose/heatmap.hpp"
#include "hintpose/model.hpp"
#include "hintpose/rng.hpp"

namespace hintpose {

// Star-shaped stick figure: joint 0 is the hub, limbs radiate from it.
struct SkeletonTemplate {
    int joints = 5;
    std::vector<std::pair<int, int>> limbs = {{0, 1}, {0, 2}, {0, 3}, {0, 4}};
    // Canonical joint offsets in person-height units, centered on the torso.
    // Hand span keeps the tight box at least 32 px wide for the default
    // height range even under worst-case jitter and rotation.
    std::vector<std::pair<double, double>> offsets = {
        {0.00, -0.48},   // head
        {-0.42, -0.05},  // left hand
        {0.42, -0.05},   // right hand
        {-0.16, 0.48},   // left foot
        {0.16, 0.48},    // right foot
    };
};

struct SceneConfig {
    int image_h = 96;
    int image_w = 96;
    // P(1 person), P(2 persons), P(3 persons); normalized internally.
    std::vector<double> persons_weights = {0.25, 0.60, 0.15};
    double overlap_lo = 0.3;  // tight-box IoU target range for overlapping pairs
    double overlap_hi = 0.6;
    double person_height_lo = 46.0;
    double person_height_hi = 66.0;
    double rotation_max_deg = 12.0;
    double joint_jitter = 0.05;  // per-joint jitter, person-height units
    double occlusion_prob = 0.08;
    double noise = 0.02;
    int max_retries = 200;
    uint64_t seed = 0;
    SkeletonTemplate skeleton;

    void validate() const;
};

struct Dataset {
    SceneConfig config;
    std::vector<GrayImage> images;
    std::vector<ImageAnnotation> annotations;
};

// Fully seed-deterministic: image i is generated from an rng derived from
// (cfg.seed, i), so regeneration is byte-identical and parallelizable.
Dataset generate_dataset(const SceneConfig& cfg, int n_images);

// Uniformly picks a labeled joint and jitters it with isotropic Gaussian
// noise truncated at 2*jitter_sigma per axis.
InstanceCue sample_training_cue(const Pose& pose, double jitter_sigma, Rng& rng,
                                float cue_sigma = kDefaultSigma);

struct TrainingSample {
    GrayImage crop;
    InstanceCue cue;  // crop frame
    Heatmap target;   // joints x heatmap_h x heatmap_w, target person only
    std::vector<uint8_t> joint_mask;
    CropTransform transform;
    Pose pose_in_crop;
};

TrainingSample make_training_sample(const GrayImage& image, const PersonAnnotation& person,
                                    const ModelConfig& mcfg, double jitter_sigma, Rng& rng);

}  // namespace hintpose
