#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hintpose/geometry.hpp"
#include "hintpose/heatmap.hpp"
#include "hintpose/metrics.hpp"
#include "hintpose/synthdata.hpp"

namespace hintpose {

// ---- images ----------------------------------------------------------

void write_pgm(const std::string& path, const GrayImage& img);
GrayImage read_pgm(const std::string& path);

// 8-bit RGB PNG via zlib.
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data;  // interleaved RGB

    RgbImage() = default;
    RgbImage(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w * 3, 0) {}
    uint8_t* px(int y, int x) { return data.data() + (static_cast<size_t>(y) * width + x) * 3; }
};
void write_png(const std::string& path, const RgbImage& img);

// ---- JSON-lines formats ----------------------------------------------

// annotations.jsonl: {image_id, persons:[{keypoints:[x,y,v,...], box:{x,y,w,h}}]}
void write_annotations_jsonl(const std::string& path,
                             const std::vector<ImageAnnotation>& annotations);
std::map<int, std::vector<PersonAnnotation>> read_annotations_jsonl(const std::string& path);

// detections.jsonl: {image_id, boxes:[{x,y,w,h,score}]}
void write_detections_jsonl(const std::string& path,
                            const std::vector<ImageAnnotation>& annotations);
std::map<int, std::vector<BBox>> read_detections_jsonl(const std::string& path);

// results.jsonl: {image_id, poses:[{keypoints:[x,y,score,...], score, box_id, hop}]}
void write_results_jsonl(const std::string& path,
                         const std::map<int, std::vector<PredictedPose>>& results);
std::map<int, std::vector<PredictedPose>> read_results_jsonl(const std::string& path);

// ---- dataset directory ------------------------------------------------
// <dir>/images/img_XXXXXX.pgm, annotations.jsonl, detections.jsonl,
// scene_config.json

void write_dataset(const std::string& dir, const Dataset& ds);
Dataset read_dataset(const std::string& dir);

nlohmann::json scene_config_to_json(const SceneConfig& cfg);
SceneConfig scene_config_from_json(const nlohmann::json& j);

// ---- heatmap dump: HPT1 tensor + JSON sidecar --------------------------

void save_heatmap(const std::string& path, const Heatmap& hm, int stride, double origin_x,
                  double origin_y);
Heatmap load_heatmap(const std::string& path, int* stride = nullptr, double* origin_x = nullptr,
                     double* origin_y = nullptr);

// ---- run manifests ------------------------------------------------------

uint32_t file_crc32(const std::string& path);

struct RunManifest {
    std::string subcommand;
    nlohmann::json resolved_config;
    uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    double wallclock_sec = 0.0;
};

// Writes the manifest with a crc32 per output file.
void write_manifest(const std::string& path, const RunManifest& m);

}  // namespace hintpose
