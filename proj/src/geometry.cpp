#include "hintpose/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace hintpose {

double iou(const BBox& a, const BBox& b) {
    const double x1 = std::max(a.x, b.x);
    const double y1 = std::max(a.y, b.y);
    const double x2 = std::min(a.x + a.w, b.x + b.w);
    const double y2 = std::min(a.y + a.h, b.y + b.h);
    const double iw = std::max(0.0, x2 - x1);
    const double ih = std::max(0.0, y2 - y1);
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<BBox> filter_boxes(const std::vector<BBox>& boxes, int min_side) {
    std::vector<BBox> kept;
    kept.reserve(boxes.size());
    for (const auto& b : boxes)
        if (b.w >= min_side && b.h >= min_side) kept.push_back(b);
    return kept;
}

BBox expand_to_aspect(const BBox& box, double aspect, double margin) {
    if (box.w <= 0.0 || box.h <= 0.0) throw config_error("expand_to_aspect: degenerate box");
    if (aspect <= 0.0) throw config_error("expand_to_aspect: aspect must be positive");
    if (margin < 1.0) throw config_error("expand_to_aspect: margin must be >= 1");
    double w = box.w, h = box.h;
    if (w / h < aspect)
        w = aspect * h;
    else
        h = w / aspect;
    w *= margin;
    h *= margin;
    BBox out;
    out.w = w;
    out.h = h;
    out.x = box.cx() - 0.5 * w;
    out.y = box.cy() - 0.5 * h;
    out.score = box.score;
    return out;
}

std::pair<GrayImage, CropTransform> crop_affine(const GrayImage& image, const BBox& box,
                                                int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw config_error("crop_affine: output dims must be >= 1");
    if (box.w <= 0.0 || box.h <= 0.0) throw config_error("crop_affine: degenerate box");

    // Pixel centers: crop pixel j samples image at box.x + (j + 0.5) / sx - 0.5.
    const double sx = static_cast<double>(out_w) / box.w;
    const double sy = static_cast<double>(out_h) / box.h;
    CropTransform t;
    t.fwd[0] = sx;
    t.fwd[1] = 0.0;
    t.fwd[2] = (0.5 - box.x) * sx - 0.5;
    t.fwd[3] = 0.0;
    t.fwd[4] = sy;
    t.fwd[5] = (0.5 - box.y) * sy - 0.5;
    t.inv[0] = 1.0 / sx;
    t.inv[1] = 0.0;
    t.inv[2] = box.x + 0.5 / sx - 0.5;
    t.inv[3] = 0.0;
    t.inv[4] = 1.0 / sy;
    t.inv[5] = box.y + 0.5 / sy - 0.5;

    GrayImage crop(out_h, out_w);
    for (int oy = 0; oy < out_h; ++oy) {
        double ix, iy;
        for (int ox = 0; ox < out_w; ++ox) {
            t.apply_inverse(static_cast<double>(ox), static_cast<double>(oy), ix, iy);
            const int x0 = static_cast<int>(std::floor(ix));
            const int y0 = static_cast<int>(std::floor(iy));
            const double fx = ix - x0;
            const double fy = iy - y0;
            auto sample = [&](int yy, int xx) -> double {
                if (yy < 0 || yy >= image.height || xx < 0 || xx >= image.width) return 0.0;
                return image.at(yy, xx);
            };
            const double v = (1.0 - fy) * ((1.0 - fx) * sample(y0, x0) + fx * sample(y0, x0 + 1)) +
                             fy * ((1.0 - fx) * sample(y0 + 1, x0) + fx * sample(y0 + 1, x0 + 1));
            crop.at(oy, ox) = static_cast<float>(v);
        }
    }
    return {std::move(crop), t};
}

Pose keypoints_to_image(const Pose& pose_in_heatmap, const CropTransform& t, int heatmap_stride) {
    Pose out;
    out.joints.reserve(pose_in_heatmap.joints.size());
    for (const auto& kp : pose_in_heatmap.joints) {
        double ix, iy;
        t.apply_inverse(kp.x * heatmap_stride, kp.y * heatmap_stride, ix, iy);
        out.joints.push_back({ix, iy, kp.v});
    }
    return out;
}

}  // namespace hintpose
