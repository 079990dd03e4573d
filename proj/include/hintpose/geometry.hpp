#pragma once

#include <utility>
#include <vector>

#include "hintpose/common.hpp"

namespace hintpose {

// Keypoint visibility follows the annotation convention:
// 0 = absent, 1 = labeled but occluded, 2 = labeled and visible.
struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    int v = 0;
};

struct Pose {
    std::vector<Keypoint> joints;
};

// Detection box in image pixels.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
    double score = 1.0;

    double area() const { return w * h; }
    double cx() const { return x + 0.5 * w; }
    double cy() const { return y + 0.5 * h; }
};

// One annotated person instance; the box is the tight box over labeled joints.
struct PersonAnnotation {
    Pose pose;
    BBox box;
};

struct ImageAnnotation {
    int image_id = 0;
    std::vector<PersonAnnotation> persons;
};

double iou(const BBox& a, const BBox& b);

// Keeps boxes with w >= min_side AND h >= min_side ("smaller than 32x32"
// drops anything with either side under the threshold). Order preserved.
std::vector<BBox> filter_boxes(const std::vector<BBox>& boxes, int min_side = 32);

// Center-preserving expansion of the shorter dimension until w/h == aspect,
// then uniform scaling by margin.
BBox expand_to_aspect(const BBox& box, double aspect = 0.75, double margin = 1.25);

// 2x3 affine image->crop together with its exact inverse.
struct CropTransform {
    double fwd[6] = {1, 0, 0, 0, 1, 0};
    double inv[6] = {1, 0, 0, 0, 1, 0};

    void apply(double x, double y, double& ox, double& oy) const {
        ox = fwd[0] * x + fwd[1] * y + fwd[2];
        oy = fwd[3] * x + fwd[4] * y + fwd[5];
    }
    void apply_inverse(double x, double y, double& ox, double& oy) const {
        ox = inv[0] * x + inv[1] * y + inv[2];
        oy = inv[3] * x + inv[4] * y + inv[5];
    }
};

// Bilinear resample of the box region onto an out_h x out_w grid. Samples
// outside the image read 0. Image is a single grayscale plane.
struct GrayImage {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    GrayImage() = default;
    GrayImage(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w, 0.0f) {}
    float& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    float at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
};

std::pair<GrayImage, CropTransform> crop_affine(const GrayImage& image, const BBox& box,
                                                int out_h, int out_w);

// Heatmap-frame pose -> image-frame pose: scale by the heatmap stride, then
// the inverse crop affine. Visibility carries over.
Pose keypoints_to_image(const Pose& pose_in_heatmap, const CropTransform& t, int heatmap_stride);

}  // namespace hintpose
