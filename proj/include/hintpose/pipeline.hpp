#pragma once

#include <vector>

#include "hintpose/geometry.hpp"
#include "hintpose/heatmap.hpp"
#include "hintpose/metrics.hpp"
#include "hintpose/model.hpp"

namespace hintpose {

// One decoded person instance, ready for NMS and evaluation.
struct ScoredPose {
    Pose pose;  // image frame
    std::vector<double> kp_scores;
    double score = 0.0;  // box score x mean keypoint score
    int box_id = -1;
    InstanceCue cue;  // image frame
    double area = 0.0;  // expanded-box area x area_factor, used by OKS-NMS
    int hop = 0;
};

struct PipelineConfig {
    float peak_min_score = 0.3f;
    int peak_window = 5;
    int max_cues = 4;
    double nms_gamma = 0.9;
    double kappa = 0.08;
    double area_factor = 0.53;
    double margin = 1.25;
    int min_box_side = 32;
    int hops_override = 0;  // 0 = model config hops

    void validate() const;
};

// Cue generation (the external cue network is replaced by a cue-free pass of
// our own model): hop-1 heatmaps of every expanded crop are mapped back to
// the image frame, max-merged into one image-level map, and each detection
// box keeps its local peaks. Boxes without a peak fall back to their center.
std::vector<std::vector<InstanceCue>> generate_image_cues(const GrayImage& image,
                                                          const std::vector<BBox>& boxes,
                                                          const Model& model,
                                                          const PipelineConfig& cfg,
                                                          Heatmap* image_map_out = nullptr);

// Full per-image inference over pre-filtered boxes. With several models the
// hop-T heatmaps are averaged element-wise before decoding (ensembling).
std::vector<ScoredPose> estimate(const GrayImage& image, const std::vector<BBox>& boxes,
                                 const std::vector<const Model*>& models,
                                 const PipelineConfig& cfg);

// Greedy OKS suppression: keep the highest-scored pose, drop the rest with
// OKS above gamma, repeat. Ties break by original pose index.
std::vector<ScoredPose> oks_nms(const std::vector<ScoredPose>& poses, double gamma,
                                const std::vector<double>& kappas);

}  // namespace hintpose
