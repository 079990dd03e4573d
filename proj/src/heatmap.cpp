#include "hintpose/heatmap.hpp"

#include <algorithm>
#include <cmath>

namespace hintpose {

void render_gaussian_into(Heatmap& map, int c, float cx, float cy, float sigma) {
    if (sigma <= 0.0f) throw config_error("render_gaussian: sigma must be positive");
    const float radius = 3.0f * sigma;
    const int x_lo = std::max(0, static_cast<int>(std::ceil(cx - radius)));
    const int x_hi = std::min(map.width - 1, static_cast<int>(std::floor(cx + radius)));
    const int y_lo = std::max(0, static_cast<int>(std::ceil(cy - radius)));
    const int y_hi = std::min(map.height - 1, static_cast<int>(std::floor(cy + radius)));
    const float r2 = radius * radius;
    const float inv = 1.0f / (2.0f * sigma * sigma);
    for (int y = y_lo; y <= y_hi; ++y) {
        const float dy = static_cast<float>(y) - cy;
        for (int x = x_lo; x <= x_hi; ++x) {
            const float dx = static_cast<float>(x) - cx;
            const float d2 = dx * dx + dy * dy;
            if (d2 > r2) continue;
            const float v = std::exp(-d2 * inv);
            float& cell = map.at(c, y, x);
            if (v > cell) cell = v;
        }
    }
}

Heatmap render_gaussian(float cx, float cy, float sigma, int height, int width) {
    if (height < 1 || width < 1) throw config_error("render_gaussian: dims must be >= 1");
    Heatmap map(1, height, width);
    render_gaussian_into(map, 0, cx, cy, sigma);
    return map;
}

namespace {

// Quarter-pixel shift toward the larger neighbor; ties and borders stay put.
PeakLocation subpixel_shift(const Heatmap& map, int c, int px, int py) {
    PeakLocation p;
    p.x = static_cast<float>(px);
    p.y = static_cast<float>(py);
    p.score = map.at(c, py, px);
    if (px > 0 && px < map.width - 1) {
        const float l = map.at(c, py, px - 1);
        const float r = map.at(c, py, px + 1);
        if (r > l)
            p.x += 0.25f;
        else if (l > r)
            p.x -= 0.25f;
    }
    if (py > 0 && py < map.height - 1) {
        const float u = map.at(c, py - 1, px);
        const float d = map.at(c, py + 1, px);
        if (d > u)
            p.y += 0.25f;
        else if (u > d)
            p.y -= 0.25f;
    }
    return p;
}

}  // namespace

PeakLocation decode_peak(const Heatmap& map, int channel) {
    if (map.height < 1 || map.width < 1 || channel < 0 || channel >= map.channels)
        throw config_error("decode_peak: empty map or bad channel");
    int best_x = 0, best_y = 0;
    float best = map.at(channel, 0, 0);
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x) {
            const float v = map.at(channel, y, x);
            if (v > best) {
                best = v;
                best_x = x;
                best_y = y;
            }
        }
    return subpixel_shift(map, channel, best_x, best_y);
}

std::vector<InstanceCue> local_peaks(const Heatmap& map, const PixelRegion& region,
                                     float min_score, int window, int max_cues,
                                     float cue_sigma) {
    if (window < 3 || window % 2 == 0)
        throw config_error("local_peaks: window must be odd and >= 3");
    const int x_lo = std::max(0, static_cast<int>(std::ceil(region.x)));
    const int y_lo = std::max(0, static_cast<int>(std::ceil(region.y)));
    const int x_hi = std::min(map.width - 1, static_cast<int>(std::floor(region.x + region.w)));
    const int y_hi = std::min(map.height - 1, static_cast<int>(std::floor(region.y + region.h)));
    if (x_lo > x_hi || y_lo > y_hi) return {};

    const int r = window / 2;
    std::vector<PeakLocation> peaks;
    for (int c = 0; c < map.channels; ++c) {
        for (int y = y_lo; y <= y_hi; ++y) {
            for (int x = x_lo; x <= x_hi; ++x) {
                const float v = map.at(c, y, x);
                if (v < min_score) continue;
                bool strict_max = true;
                for (int dy = -r; dy <= r && strict_max; ++dy) {
                    const int ny = y + dy;
                    if (ny < 0 || ny >= map.height) continue;
                    for (int dx = -r; dx <= r; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        const int nx = x + dx;
                        if (nx < 0 || nx >= map.width) continue;
                        if (map.at(c, ny, nx) >= v) {
                            strict_max = false;
                            break;
                        }
                    }
                }
                if (strict_max) peaks.push_back(subpixel_shift(map, c, x, y));
            }
        }
    }
    std::stable_sort(peaks.begin(), peaks.end(),
                     [](const PeakLocation& a, const PeakLocation& b) { return a.score > b.score; });
    if (static_cast<int>(peaks.size()) > max_cues) peaks.resize(max_cues);

    std::vector<InstanceCue> cues;
    cues.reserve(peaks.size());
    for (const auto& p : peaks) cues.push_back({p.x, p.y, cue_sigma});
    return cues;
}

Heatmap merge_channels_max(const Heatmap& map) {
    Heatmap out(1, map.height, map.width);
    const size_t hw = static_cast<size_t>(map.height) * map.width;
    for (int c = 0; c < map.channels; ++c) {
        const float* src = map.channel(c);
        for (size_t i = 0; i < hw; ++i) out.data[i] = std::max(out.data[i], src[i]);
    }
    return out;
}

}  // namespace hintpose
