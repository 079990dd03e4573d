#pragma once

#include <map>
#include <string>
#include <vector>

#include "hintpose/geometry.hpp"

namespace hintpose {

// One decoded pose with its scores, as read from a results file.
struct PredictedPose {
    Pose pose;
    std::vector<double> kp_scores;
    double score = 0.0;
    int box_id = -1;
    int hop = 0;
};

struct EvalConfig {
    std::vector<double> thresholds;  // default 0.50:0.05:0.95
    std::vector<double> kappas;      // per joint; empty -> uniform kappa
    double kappa = 0.08;
    double area_factor = 0.53;  // person area = tight box area * factor
    int max_detections = 20;

    EvalConfig() {
        for (int i = 0; i < 10; ++i) thresholds.push_back(0.50 + 0.05 * i);
    }
    void validate(int joints) const;
    std::vector<double> joint_kappas(int joints) const;
};

// Object keypoint similarity. Joints with gt visibility > 0 contribute
// exp(-d^2 / (2 * area * kappa^2)); the result is their mean.
double oks(const Pose& pred, const Pose& gt, double area, const std::vector<double>& kappas);

struct EvalResult {
    double ap = 0.0;
    double ar = 0.0;
    double ap50 = 0.0;
    double ap75 = 0.0;
    std::vector<double> ap_per_threshold;
    std::vector<double> ar_per_threshold;
    std::vector<double> thresholds;
    int n_ground_truth = 0;
    int n_predictions = 0;
};

// Greedy per-image matching at each OKS threshold (score-descending
// predictions, best unmatched ground truth first), 101-point interpolated AP,
// recall at the max-detections cap for AR.
EvalResult evaluate(const std::map<int, std::vector<PredictedPose>>& results,
                    const std::map<int, std::vector<PersonAnnotation>>& ground_truth,
                    const EvalConfig& cfg);

std::string format_eval_table(const EvalResult& r);

}  // namespace hintpose
