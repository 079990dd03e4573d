#pragma once

#include <vector>

#include "hintpose/common.hpp"

namespace hintpose {

// Default Gaussian spread, in the pixels of whatever grid the map lives on.
inline constexpr float kDefaultSigma = 2.0f;

// K-channel confidence grid. Rendered targets stay in [0,1]; model outputs
// are unconstrained.
struct Heatmap {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;  // channel-major, row-major within a channel

    Heatmap() = default;
    Heatmap(int c, int h, int w) : channels(c), height(h), width(w),
                                   data(static_cast<size_t>(c) * h * w, 0.0f) {}

    float& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    const float* channel(int c) const { return data.data() + static_cast<size_t>(c) * height * width; }
    float* channel(int c) { return data.data() + static_cast<size_t>(c) * height * width; }
};

// A point marking the target person, plus the spread of its rendered bump.
// Coordinates are continuous pixels and may fall outside the grid.
struct InstanceCue {
    float x = 0.0f;
    float y = 0.0f;
    float sigma = kDefaultSigma;
};

struct PeakLocation {
    float x = 0.0f;
    float y = 0.0f;
    float score = 0.0f;
};

// Axis-aligned region used by local_peaks, in the map's pixel frame.
struct PixelRegion {
    float x = 0.0f;
    float y = 0.0f;
    float w = 0.0f;
    float h = 0.0f;
};

// exp(-|p - center|^2 / (2 sigma^2)) for |p - center| <= 3 sigma, exactly 0
// beyond. Centers may lie outside the grid; rendering clips.
Heatmap render_gaussian(float cx, float cy, float sigma, int height, int width);

// Renders into channel c of an existing map (max-composited so repeated
// renders keep the per-pixel strongest bump).
void render_gaussian_into(Heatmap& map, int c, float cx, float cy, float sigma);

// Argmax plus a 0.25 px shift toward the larger neighbor on each axis.
// Borders and exact ties get no shift; an all-equal map decodes to the first
// position in scan order.
PeakLocation decode_peak(const Heatmap& map, int channel = 0);

// Every pixel in `region` that is the strict maximum of its window x window
// neighborhood and scores >= min_score, sub-pixel shifted like decode_peak,
// sorted by descending score, capped at max_cues.
std::vector<InstanceCue> local_peaks(const Heatmap& map, const PixelRegion& region,
                                     float min_score = 0.3f, int window = 5, int max_cues = 4,
                                     float cue_sigma = kDefaultSigma);

// Per-pixel max over channels.
Heatmap merge_channels_max(const Heatmap& map);

}  // namespace hintpose
