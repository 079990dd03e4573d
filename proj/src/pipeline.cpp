#include "hintpose/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hintpose {

void PipelineConfig::validate() const {
    if (nms_gamma <= 0.0 || nms_gamma > 1.0)
        throw config_error("pipeline: nms_gamma must lie in (0,1]");
    if (peak_window < 3 || peak_window % 2 == 0)
        throw config_error("pipeline: peak_window must be odd and >= 3");
    if (max_cues < 1) throw config_error("pipeline: max_cues must be >= 1");
    if (kappa <= 0.0) throw config_error("pipeline: kappa must be positive");
    if (area_factor <= 0.0) throw config_error("pipeline: area_factor must be positive");
    if (margin < 1.0) throw config_error("pipeline: margin must be >= 1");
}

namespace {

nn::Tensor<float> crop_to_tensor(const GrayImage& crop) {
    auto t = nn::Tensor<float>::zeros(nn::Shape{1, 1, crop.height, crop.width});
    std::copy(crop.data.begin(), crop.data.end(), t.values().begin());
    return t;
}

double box_aspect(const ModelConfig& mcfg) {
    return static_cast<double>(mcfg.input_w) / mcfg.input_h;
}

// Bilinear read of one heatmap channel at continuous coordinates.
float sample_channel(const Heatmap& hm, int c, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    auto tap = [&](int yy, int xx) -> double {
        if (yy < 0 || yy >= hm.height || xx < 0 || xx >= hm.width) return 0.0;
        return hm.at(c, yy, xx);
    };
    return static_cast<float>((1 - fy) * ((1 - fx) * tap(y0, x0) + fx * tap(y0, x0 + 1)) +
                              fy * ((1 - fx) * tap(y0 + 1, x0) + fx * tap(y0 + 1, x0 + 1)));
}

}  // namespace

std::vector<std::vector<InstanceCue>> generate_image_cues(const GrayImage& image,
                                                          const std::vector<BBox>& boxes,
                                                          const Model& model,
                                                          const PipelineConfig& cfg,
                                                          Heatmap* image_map_out) {
    cfg.validate();
    const ModelConfig& mcfg = model.config();
    Heatmap image_map(1, image.height, image.width);

    nn::NoGradGuard guard;
    for (const auto& box : boxes) {
        const BBox ebox = expand_to_aspect(box, box_aspect(mcfg), cfg.margin);
        auto [crop, t] = crop_affine(image, ebox, mcfg.input_h, mcfg.input_w);
        auto outputs = model.forward_hops(crop_to_tensor(crop), nn::Tensor<float>(), 1);
        Heatmap hop1 = tensor_to_heatmap(outputs[0], 0);

        // Back-project the crop's heatmaps onto the image-level map.
        const int x_lo = std::max(0, static_cast<int>(std::floor(ebox.x)));
        const int y_lo = std::max(0, static_cast<int>(std::floor(ebox.y)));
        const int x_hi = std::min(image.width - 1,
                                  static_cast<int>(std::ceil(ebox.x + ebox.w)));
        const int y_hi = std::min(image.height - 1,
                                  static_cast<int>(std::ceil(ebox.y + ebox.h)));
        const double inv_stride = 1.0 / mcfg.stride;
        for (int y = y_lo; y <= y_hi; ++y)
            for (int x = x_lo; x <= x_hi; ++x) {
                double cx, cy;
                t.apply(static_cast<double>(x), static_cast<double>(y), cx, cy);
                float best = image_map.at(0, y, x);
                for (int k = 0; k < hop1.channels; ++k)
                    best = std::max(best,
                                    sample_channel(hop1, k, cx * inv_stride, cy * inv_stride));
                image_map.at(0, y, x) = best;
            }
    }

    std::vector<std::vector<InstanceCue>> cues;
    cues.reserve(boxes.size());
    for (const auto& box : boxes) {
        PixelRegion region{static_cast<float>(box.x), static_cast<float>(box.y),
                           static_cast<float>(box.w), static_cast<float>(box.h)};
        auto peaks = local_peaks(image_map, region, cfg.peak_min_score, cfg.peak_window,
                                 cfg.max_cues, mcfg.cue_sigma);
        if (peaks.empty())
            peaks.push_back({static_cast<float>(box.cx()), static_cast<float>(box.cy()),
                             mcfg.cue_sigma});
        cues.push_back(std::move(peaks));
    }
    if (image_map_out) *image_map_out = std::move(image_map);
    return cues;
}

std::vector<ScoredPose> estimate(const GrayImage& image, const std::vector<BBox>& boxes,
                                 const std::vector<const Model*>& models,
                                 const PipelineConfig& cfg) {
    cfg.validate();
    if (models.empty()) throw config_error("estimate: at least one model required");
    const ModelConfig& mcfg = models[0]->config();
    for (const Model* m : models) {
        const ModelConfig& c = m->config();
        if (c.joints != mcfg.joints || c.input_h != mcfg.input_h || c.input_w != mcfg.input_w ||
            c.stride != mcfg.stride)
            throw config_error("estimate: ensemble models disagree on joints or input dims");
    }
    const int hops = cfg.hops_override > 0 ? cfg.hops_override : mcfg.hops;

    const auto cues_per_box = generate_image_cues(image, boxes, *models[0], cfg);

    nn::NoGradGuard guard;
    std::vector<ScoredPose> poses;
    for (size_t b = 0; b < boxes.size(); ++b) {
        const BBox ebox = expand_to_aspect(boxes[b], box_aspect(mcfg), cfg.margin);
        auto [crop, t] = crop_affine(image, ebox, mcfg.input_h, mcfg.input_w);
        auto crop_tensor = crop_to_tensor(crop);

        for (const InstanceCue& cue_img : cues_per_box[b]) {
            double cx, cy;
            t.apply(cue_img.x, cue_img.y, cx, cy);
            InstanceCue cue_crop{static_cast<float>(cx), static_cast<float>(cy), cue_img.sigma};

            // Element-wise mean of the final-hop heatmaps across models.
            Heatmap avg;
            for (size_t m = 0; m < models.size(); ++m) {
                auto outputs = models[m]->forward_hops(crop_tensor, &cue_crop, hops);
                Heatmap hm = tensor_to_heatmap(outputs[hops - 1], 0);
                if (m == 0) {
                    avg = std::move(hm);
                } else {
                    for (size_t i = 0; i < avg.data.size(); ++i) avg.data[i] += hm.data[i];
                }
            }
            if (models.size() > 1) {
                const float inv = 1.0f / static_cast<float>(models.size());
                for (auto& v : avg.data) v *= inv;
            }

            ScoredPose sp;
            sp.box_id = static_cast<int>(b);
            sp.cue = cue_img;
            sp.hop = hops;
            sp.area = ebox.area() * cfg.area_factor;
            Pose in_heatmap;
            double score_sum = 0.0;
            for (int k = 0; k < mcfg.joints; ++k) {
                PeakLocation p = decode_peak(avg, k);
                in_heatmap.joints.push_back({p.x, p.y, 2});
                sp.kp_scores.push_back(p.score);
                score_sum += p.score;
            }
            sp.pose = keypoints_to_image(in_heatmap, t, mcfg.stride);
            sp.score = boxes[b].score * (score_sum / mcfg.joints);
            poses.push_back(std::move(sp));
        }
    }

    return oks_nms(poses, cfg.nms_gamma, std::vector<double>(mcfg.joints, cfg.kappa));
}

std::vector<ScoredPose> oks_nms(const std::vector<ScoredPose>& poses, double gamma,
                                const std::vector<double>& kappas) {
    if (gamma <= 0.0 || gamma > 1.0) throw config_error("oks_nms: gamma must lie in (0,1]");
    std::vector<int> order(poses.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&poses](int a, int b) {
        return poses[a].score > poses[b].score;  // stable: ties keep pose index order
    });

    std::vector<ScoredPose> kept;
    std::vector<bool> suppressed(poses.size(), false);
    for (size_t i = 0; i < order.size(); ++i) {
        if (suppressed[order[i]]) continue;
        const ScoredPose& top = poses[order[i]];
        kept.push_back(top);
        for (size_t j = i + 1; j < order.size(); ++j) {
            if (suppressed[order[j]]) continue;
            const ScoredPose& cand = poses[order[j]];
            if (oks(cand.pose, top.pose, top.area, kappas) > gamma)
                suppressed[order[j]] = true;
        }
    }
    return kept;
}

}  // namespace hintpose
