#include "hintpose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace hintpose {

void EvalConfig::validate(int joints) const {
    if (thresholds.empty()) throw config_error("eval: no OKS thresholds");
    for (size_t i = 0; i < thresholds.size(); ++i) {
        if (thresholds[i] <= 0.0 || thresholds[i] > 1.0)
            throw config_error("eval: thresholds must lie in (0,1]");
        if (i > 0 && thresholds[i] <= thresholds[i - 1])
            throw config_error("eval: thresholds must be strictly increasing");
    }
    if (!kappas.empty() && static_cast<int>(kappas.size()) != joints)
        throw config_error("eval: kappas must match joint count");
    for (double k : kappas)
        if (k <= 0.0) throw config_error("eval: kappas must be positive");
    if (kappas.empty() && kappa <= 0.0) throw config_error("eval: kappa must be positive");
    if (max_detections < 1) throw config_error("eval: max_detections must be >= 1");
}

std::vector<double> EvalConfig::joint_kappas(int joints) const {
    if (!kappas.empty()) return kappas;
    return std::vector<double>(joints, kappa);
}

double oks(const Pose& pred, const Pose& gt, double area, const std::vector<double>& kappas) {
    if (area <= 0.0) throw config_error("oks: area must be positive");
    if (gt.joints.size() != pred.joints.size() || gt.joints.size() != kappas.size())
        throw config_error("oks: joint count mismatch");
    double sum = 0.0;
    int labeled = 0;
    for (size_t i = 0; i < gt.joints.size(); ++i) {
        if (gt.joints[i].v <= 0) continue;
        const double dx = pred.joints[i].x - gt.joints[i].x;
        const double dy = pred.joints[i].y - gt.joints[i].y;
        sum += std::exp(-(dx * dx + dy * dy) / (2.0 * area * kappas[i] * kappas[i]));
        ++labeled;
    }
    if (labeled == 0) throw data_error("oks: ground truth has no labeled joints");
    return sum / static_cast<double>(labeled);
}

namespace {

struct Detection {
    double score;
    int image_id;
    int local_index;
    bool tp;
};

}  // namespace

EvalResult evaluate(const std::map<int, std::vector<PredictedPose>>& results,
                    const std::map<int, std::vector<PersonAnnotation>>& ground_truth,
                    const EvalConfig& cfg) {
    // Every predicted image id must exist in the ground truth.
    std::string unknown;
    for (const auto& [id, _] : results)
        if (!ground_truth.count(id)) unknown += (unknown.empty() ? "" : ", ") + std::to_string(id);
    if (!unknown.empty()) throw data_error("evaluate: unknown image ids: " + unknown);

    int joints = 0;
    for (const auto& [id, persons] : ground_truth)
        for (const auto& p : persons) joints = std::max(joints, static_cast<int>(p.pose.joints.size()));
    if (joints == 0) throw data_error("evaluate: ground truth has no persons");
    cfg.validate(joints);
    const std::vector<double> kappas = cfg.joint_kappas(joints);

    int n_gt = 0;
    for (const auto& [id, persons] : ground_truth) n_gt += static_cast<int>(persons.size());

    EvalResult out;
    out.thresholds = cfg.thresholds;
    out.n_ground_truth = n_gt;

    for (double tau : cfg.thresholds) {
        std::vector<Detection> detections;
        for (const auto& [image_id, preds] : results) {
            const auto& gts = ground_truth.at(image_id);

            // Score-descending order, capped at max_detections.
            std::vector<int> order(preds.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&preds](int a, int b) {
                return preds[a].score > preds[b].score;
            });
            if (static_cast<int>(order.size()) > cfg.max_detections)
                order.resize(cfg.max_detections);

            std::vector<bool> gt_used(gts.size(), false);
            for (int local_rank = 0; local_rank < static_cast<int>(order.size()); ++local_rank) {
                const auto& pred = preds[order[local_rank]];
                int best = -1;
                double best_oks = 0.0;
                for (size_t g = 0; g < gts.size(); ++g) {
                    if (gt_used[g]) continue;
                    const double area = gts[g].box.area() * cfg.area_factor;
                    const double s = oks(pred.pose, gts[g].pose, area, kappas);
                    if (s > best_oks) {
                        best_oks = s;
                        best = static_cast<int>(g);
                    }
                }
                const bool tp = best >= 0 && best_oks >= tau;
                if (tp) gt_used[best] = true;
                detections.push_back({pred.score, image_id, local_rank, tp});
            }
        }
        std::stable_sort(detections.begin(), detections.end(),
                         [](const Detection& a, const Detection& b) {
                             if (a.score != b.score) return a.score > b.score;
                             if (a.image_id != b.image_id) return a.image_id < b.image_id;
                             return a.local_index < b.local_index;
                         });

        std::vector<double> precision, recall;
        int tp_count = 0, fp_count = 0;
        for (const auto& d : detections) {
            d.tp ? ++tp_count : ++fp_count;
            precision.push_back(static_cast<double>(tp_count) / (tp_count + fp_count));
            recall.push_back(n_gt > 0 ? static_cast<double>(tp_count) / n_gt : 0.0);
        }

        // 101-point interpolation: precision at recall >= r, max over the tail.
        double ap = 0.0;
        if (!precision.empty()) {
            std::vector<double> pmax(precision.size());
            double running = 0.0;
            for (size_t i = precision.size(); i-- > 0;) {
                running = std::max(running, precision[i]);
                pmax[i] = running;
            }
            for (int r = 0; r <= 100; ++r) {
                const double level = r / 100.0;
                auto it = std::lower_bound(recall.begin(), recall.end(), level);
                if (it != recall.end()) ap += pmax[it - recall.begin()];
            }
            ap /= 101.0;
        }
        out.ap_per_threshold.push_back(ap);
        out.ar_per_threshold.push_back(n_gt > 0 ? static_cast<double>(tp_count) / n_gt : 0.0);
        out.n_predictions = std::max<int>(out.n_predictions, static_cast<int>(detections.size()));
    }

    out.ap = std::accumulate(out.ap_per_threshold.begin(), out.ap_per_threshold.end(), 0.0) /
             out.ap_per_threshold.size();
    out.ar = std::accumulate(out.ar_per_threshold.begin(), out.ar_per_threshold.end(), 0.0) /
             out.ar_per_threshold.size();
    for (size_t i = 0; i < cfg.thresholds.size(); ++i) {
        if (std::abs(cfg.thresholds[i] - 0.50) < 1e-9) out.ap50 = out.ap_per_threshold[i];
        if (std::abs(cfg.thresholds[i] - 0.75) < 1e-9) out.ap75 = out.ap_per_threshold[i];
    }
    return out;
}

std::string format_eval_table(const EvalResult& r) {
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "AP      %.4f\nAP@0.50 %.4f\nAP@0.75 %.4f\nAR      %.4f\n",
                  r.ap, r.ap50, r.ap75, r.ar);
    os << buf;
    os << "thr     AP      AR\n";
    for (size_t i = 0; i < r.thresholds.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.2f    %.4f  %.4f\n", r.thresholds[i],
                      r.ap_per_threshold[i], r.ar_per_threshold[i]);
        os << buf;
    }
    os << "ground truth: " << r.n_ground_truth << ", evaluated detections: " << r.n_predictions
       << "\n";
    return os.str();
}

}  // namespace hintpose
