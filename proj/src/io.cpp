#include "hintpose/io.hpp"

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "hintpose/nn/serialize.hpp"

namespace hintpose {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- images ----------------------------------------------------------

void write_pgm(const std::string& path, const GrayImage& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("write_pgm: cannot open " + path);
    os << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<uint8_t> row(img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const float v = img.at(y, x);
            row[x] = static_cast<uint8_t>(
                std::min(255l, std::max(0l, std::lround(v * 255.0f))));
        }
        os.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
}

GrayImage read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("read_pgm: cannot open " + path);
    std::string magic;
    is >> magic;
    if (magic != "P5") throw data_error("read_pgm: " + path + " is not binary PGM");
    int w = 0, h = 0, maxval = 0;
    is >> w >> h >> maxval;
    if (!is || w < 1 || h < 1 || maxval != 255)
        throw data_error("read_pgm: unsupported header in " + path);
    is.get();  // single whitespace after header
    GrayImage img(h, w);
    std::vector<uint8_t> row(w);
    for (int y = 0; y < h; ++y) {
        is.read(reinterpret_cast<char*>(row.data()), row.size());
        if (!is) throw data_error("read_pgm: truncated payload in " + path);
        for (int x = 0; x < w; ++x) img.at(y, x) = static_cast<float>(row[x]) / 255.0f;
    }
    return img;
}

namespace {

void png_chunk(std::ofstream& os, const char* type, const std::vector<uint8_t>& payload) {
    uint32_t len = static_cast<uint32_t>(payload.size());
    uint8_t lenb[4] = {static_cast<uint8_t>(len >> 24), static_cast<uint8_t>(len >> 16),
                       static_cast<uint8_t>(len >> 8), static_cast<uint8_t>(len)};
    os.write(reinterpret_cast<const char*>(lenb), 4);
    os.write(type, 4);
    if (!payload.empty())
        os.write(reinterpret_cast<const char*>(payload.data()), payload.size());
    uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(type), 4);
    if (!payload.empty()) crc = crc32(crc, payload.data(), payload.size());
    uint8_t crcb[4] = {static_cast<uint8_t>(crc >> 24), static_cast<uint8_t>(crc >> 16),
                       static_cast<uint8_t>(crc >> 8), static_cast<uint8_t>(crc)};
    os.write(reinterpret_cast<const char*>(crcb), 4);
}

}  // namespace

void write_png(const std::string& path, const RgbImage& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("write_png: cannot open " + path);
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    os.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<uint8_t> ihdr(13);
    auto be32 = [](uint8_t* p, uint32_t v) {
        p[0] = v >> 24;
        p[1] = v >> 16;
        p[2] = v >> 8;
        p[3] = v;
    };
    be32(ihdr.data(), static_cast<uint32_t>(img.width));
    be32(ihdr.data() + 4, static_cast<uint32_t>(img.height));
    ihdr[8] = 8;   // bit depth
    ihdr[9] = 2;   // truecolor
    ihdr[10] = ihdr[11] = ihdr[12] = 0;
    png_chunk(os, "IHDR", ihdr);

    // Filter byte 0 per scanline, then one deflate stream.
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(img.height) * (img.width * 3 + 1));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);
        const uint8_t* row = img.data.data() + static_cast<size_t>(y) * img.width * 3;
        raw.insert(raw.end(), row, row + static_cast<size_t>(img.width) * 3);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw data_error("write_png: deflate failed for " + path);
    comp.resize(comp_len);
    png_chunk(os, "IDAT", comp);
    png_chunk(os, "IEND", {});
    if (!os) throw data_error("write_png: write failed for " + path);
}

// ---- JSON-lines formats ----------------------------------------------

namespace {

json pose_keypoints_json(const Pose& pose) {
    json kps = json::array();
    for (const auto& j : pose.joints) {
        kps.push_back(j.x);
        kps.push_back(j.y);
        kps.push_back(j.v);
    }
    return kps;
}

std::vector<json> read_jsonl(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw data_error("cannot open " + path);
    std::vector<json> lines;
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
        ++n;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw data_error(path + ": invalid JSON on line " + std::to_string(n));
        lines.push_back(std::move(j));
    }
    return lines;
}

}  // namespace

void write_annotations_jsonl(const std::string& path,
                             const std::vector<ImageAnnotation>& annotations) {
    std::ofstream os(path);
    if (!os) throw data_error("write_annotations_jsonl: cannot open " + path);
    for (const auto& ann : annotations) {
        json persons = json::array();
        for (const auto& p : ann.persons)
            persons.push_back(json{{"keypoints", pose_keypoints_json(p.pose)},
                                   {"box",
                                    {{"x", p.box.x}, {"y", p.box.y}, {"w", p.box.w},
                                     {"h", p.box.h}}}});
        os << json{{"image_id", ann.image_id}, {"persons", persons}}.dump() << "\n";
    }
}

namespace {

Pose pose_from_keypoints(const json& kps, const char* what) {
    if (!kps.is_array() || kps.size() % 3 != 0)
        throw data_error(std::string(what) + ": keypoints must be a flat [x,y,v] array");
    Pose pose;
    for (size_t i = 0; i < kps.size(); i += 3)
        pose.joints.push_back({kps[i].get<double>(), kps[i + 1].get<double>(),
                               kps[i + 2].get<int>()});
    return pose;
}

}  // namespace

std::map<int, std::vector<PersonAnnotation>> read_annotations_jsonl(const std::string& path) {
    std::map<int, std::vector<PersonAnnotation>> out;
    for (const json& j : read_jsonl(path)) {
        const int id = j.at("image_id").get<int>();
        std::vector<PersonAnnotation> persons;
        for (const json& p : j.at("persons")) {
            PersonAnnotation ann;
            ann.pose = pose_from_keypoints(p.at("keypoints"), "annotations");
            const json& b = p.at("box");
            ann.box = {b.at("x").get<double>(), b.at("y").get<double>(), b.at("w").get<double>(),
                       b.at("h").get<double>(), 1.0};
            persons.push_back(std::move(ann));
        }
        out[id] = std::move(persons);
    }
    return out;
}

void write_detections_jsonl(const std::string& path,
                            const std::vector<ImageAnnotation>& annotations) {
    std::ofstream os(path);
    if (!os) throw data_error("write_detections_jsonl: cannot open " + path);
    for (const auto& ann : annotations) {
        json boxes = json::array();
        for (const auto& p : ann.persons)
            boxes.push_back(json{{"x", p.box.x},
                                 {"y", p.box.y},
                                 {"w", p.box.w},
                                 {"h", p.box.h},
                                 {"score", p.box.score}});
        os << json{{"image_id", ann.image_id}, {"boxes", boxes}}.dump() << "\n";
    }
}

std::map<int, std::vector<BBox>> read_detections_jsonl(const std::string& path) {
    std::map<int, std::vector<BBox>> out;
    for (const json& j : read_jsonl(path)) {
        const int id = j.at("image_id").get<int>();
        std::vector<BBox> boxes;
        for (const json& b : j.at("boxes"))
            boxes.push_back({b.at("x").get<double>(), b.at("y").get<double>(),
                             b.at("w").get<double>(), b.at("h").get<double>(),
                             b.value("score", 1.0)});
        out[id] = std::move(boxes);
    }
    return out;
}

void write_results_jsonl(const std::string& path,
                         const std::map<int, std::vector<PredictedPose>>& results) {
    std::ofstream os(path);
    if (!os) throw data_error("write_results_jsonl: cannot open " + path);
    for (const auto& [image_id, poses] : results) {
        json jposes = json::array();
        for (const auto& p : poses) {
            json kps = json::array();
            for (size_t k = 0; k < p.pose.joints.size(); ++k) {
                kps.push_back(p.pose.joints[k].x);
                kps.push_back(p.pose.joints[k].y);
                kps.push_back(k < p.kp_scores.size() ? p.kp_scores[k] : 0.0);
            }
            jposes.push_back(json{{"keypoints", kps},
                                  {"score", p.score},
                                  {"box_id", p.box_id},
                                  {"hop", p.hop}});
        }
        os << json{{"image_id", image_id}, {"poses", jposes}}.dump() << "\n";
    }
}

std::map<int, std::vector<PredictedPose>> read_results_jsonl(const std::string& path) {
    std::map<int, std::vector<PredictedPose>> out;
    for (const json& j : read_jsonl(path)) {
        const int id = j.at("image_id").get<int>();
        std::vector<PredictedPose> poses;
        for (const json& p : j.at("poses")) {
            PredictedPose pp;
            const json& kps = p.at("keypoints");
            if (!kps.is_array() || kps.size() % 3 != 0)
                throw data_error("results: keypoints must be a flat [x,y,score] array");
            for (size_t i = 0; i < kps.size(); i += 3) {
                pp.pose.joints.push_back({kps[i].get<double>(), kps[i + 1].get<double>(), 2});
                pp.kp_scores.push_back(kps[i + 2].get<double>());
            }
            pp.score = p.at("score").get<double>();
            pp.box_id = p.value("box_id", -1);
            pp.hop = p.value("hop", 0);
            poses.push_back(std::move(pp));
        }
        out[id] = std::move(poses);
    }
    return out;
}

// ---- dataset directory ------------------------------------------------

json scene_config_to_json(const SceneConfig& cfg) {
    json limbs = json::array();
    for (const auto& [a, b] : cfg.skeleton.limbs) limbs.push_back(json::array({a, b}));
    json offsets = json::array();
    for (const auto& [x, y] : cfg.skeleton.offsets) offsets.push_back(json::array({x, y}));
    return json{{"image_h", cfg.image_h},
                {"image_w", cfg.image_w},
                {"persons_weights", cfg.persons_weights},
                {"overlap_lo", cfg.overlap_lo},
                {"overlap_hi", cfg.overlap_hi},
                {"person_height_lo", cfg.person_height_lo},
                {"person_height_hi", cfg.person_height_hi},
                {"rotation_max_deg", cfg.rotation_max_deg},
                {"joint_jitter", cfg.joint_jitter},
                {"occlusion_prob", cfg.occlusion_prob},
                {"noise", cfg.noise},
                {"max_retries", cfg.max_retries},
                {"seed", cfg.seed},
                {"skeleton", {{"joints", cfg.skeleton.joints}, {"limbs", limbs},
                              {"offsets", offsets}}}};
}

SceneConfig scene_config_from_json(const json& j) {
    SceneConfig cfg;
    static const char* known[] = {"image_h", "image_w", "persons_weights", "overlap_lo",
                                  "overlap_hi", "person_height_lo", "person_height_hi",
                                  "rotation_max_deg", "joint_jitter", "occlusion_prob",
                                  "noise", "max_retries", "seed", "skeleton"};
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw config_error("scene config: unknown key '" + key + "'");
    }
    cfg.image_h = j.value("image_h", cfg.image_h);
    cfg.image_w = j.value("image_w", cfg.image_w);
    if (j.count("persons_weights"))
        cfg.persons_weights = j.at("persons_weights").get<std::vector<double>>();
    cfg.overlap_lo = j.value("overlap_lo", cfg.overlap_lo);
    cfg.overlap_hi = j.value("overlap_hi", cfg.overlap_hi);
    cfg.person_height_lo = j.value("person_height_lo", cfg.person_height_lo);
    cfg.person_height_hi = j.value("person_height_hi", cfg.person_height_hi);
    cfg.rotation_max_deg = j.value("rotation_max_deg", cfg.rotation_max_deg);
    cfg.joint_jitter = j.value("joint_jitter", cfg.joint_jitter);
    cfg.occlusion_prob = j.value("occlusion_prob", cfg.occlusion_prob);
    cfg.noise = j.value("noise", cfg.noise);
    cfg.max_retries = j.value("max_retries", cfg.max_retries);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.count("skeleton")) {
        const json& s = j.at("skeleton");
        cfg.skeleton.joints = s.at("joints").get<int>();
        cfg.skeleton.limbs.clear();
        for (const auto& l : s.at("limbs"))
            cfg.skeleton.limbs.emplace_back(l[0].get<int>(), l[1].get<int>());
        cfg.skeleton.offsets.clear();
        for (const auto& o : s.at("offsets"))
            cfg.skeleton.offsets.emplace_back(o[0].get<double>(), o[1].get<double>());
    }
    return cfg;
}

namespace {

std::string image_path(const std::string& dir, int image_id) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%06d.pgm", image_id);
    return (fs::path(dir) / "images" / name).string();
}

}  // namespace

void write_dataset(const std::string& dir, const Dataset& ds) {
    fs::create_directories(fs::path(dir) / "images");
    for (size_t i = 0; i < ds.images.size(); ++i)
        write_pgm(image_path(dir, ds.annotations[i].image_id), ds.images[i]);
    write_annotations_jsonl((fs::path(dir) / "annotations.jsonl").string(), ds.annotations);
    write_detections_jsonl((fs::path(dir) / "detections.jsonl").string(), ds.annotations);
    std::ofstream os((fs::path(dir) / "scene_config.json").string());
    if (!os) throw data_error("write_dataset: cannot write scene_config.json");
    os << scene_config_to_json(ds.config).dump(2) << "\n";
}

Dataset read_dataset(const std::string& dir) {
    Dataset ds;
    std::ifstream cs((fs::path(dir) / "scene_config.json").string());
    if (!cs) throw data_error("read_dataset: missing scene_config.json in " + dir);
    json cj = json::parse(cs, nullptr, false);
    if (cj.is_discarded()) throw data_error("read_dataset: invalid scene_config.json");
    ds.config = scene_config_from_json(cj);

    auto by_id = read_annotations_jsonl((fs::path(dir) / "annotations.jsonl").string());
    for (auto& [id, persons] : by_id) {
        ImageAnnotation ann;
        ann.image_id = id;
        ann.persons = std::move(persons);
        ds.annotations.push_back(std::move(ann));
        ds.images.push_back(read_pgm(image_path(dir, id)));
    }
    return ds;
}

// ---- heatmap dump ------------------------------------------------------

void save_heatmap(const std::string& path, const Heatmap& hm, int stride, double origin_x,
                  double origin_y) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("save_heatmap: cannot open " + path);
    nn::Shape shape{hm.channels, hm.height, hm.width};
    nn::write_hpt1(os, shape, hm.data.data());
    std::ofstream side(path + ".json");
    if (!side) throw data_error("save_heatmap: cannot open sidecar for " + path);
    side << json{{"channels", hm.channels},
                 {"stride", stride},
                 {"origin", {origin_x, origin_y}}}.dump()
         << "\n";
}

Heatmap load_heatmap(const std::string& path, int* stride, double* origin_x, double* origin_y) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("load_heatmap: cannot open " + path);
    nn::Shape shape;
    std::vector<float> data = nn::read_hpt1(is, shape);
    if (shape.rank != 3) throw data_error("load_heatmap: expected rank-3 tensor in " + path);
    Heatmap hm(shape.d[0], shape.d[1], shape.d[2]);
    hm.data = std::move(data);

    std::ifstream side(path + ".json");
    if (!side) throw data_error("load_heatmap: missing sidecar for " + path);
    json j = json::parse(side, nullptr, false);
    if (j.is_discarded()) throw data_error("load_heatmap: invalid sidecar for " + path);
    if (j.at("channels").get<int>() != hm.channels)
        throw data_error("load_heatmap: sidecar channel mismatch for " + path);
    if (stride) *stride = j.at("stride").get<int>();
    if (origin_x) *origin_x = j.at("origin")[0].get<double>();
    if (origin_y) *origin_y = j.at("origin")[1].get<double>();
    return hm;
}

// ---- run manifests ------------------------------------------------------

uint32_t file_crc32(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("file_crc32: cannot open " + path);
    uLong crc = crc32(0L, Z_NULL, 0);
    char buf[1 << 16];
    while (is) {
        is.read(buf, sizeof(buf));
        if (is.gcount() > 0)
            crc = crc32(crc, reinterpret_cast<const Bytef*>(buf),
                        static_cast<uInt>(is.gcount()));
    }
    return static_cast<uint32_t>(crc);
}

void write_manifest(const std::string& path, const RunManifest& m) {
    json hashes = json::object();
    for (const auto& out : m.outputs) {
        if (!fs::exists(out)) continue;
        if (fs::is_directory(out)) continue;
        char hex[16];
        std::snprintf(hex, sizeof(hex), "%08x", file_crc32(out));
        hashes[out] = hex;
    }
    json j{{"subcommand", m.subcommand}, {"config", m.resolved_config},
           {"seed", m.seed},           {"inputs", m.inputs},
           {"outputs", m.outputs},     {"artifact_crc32", hashes},
           {"wallclock_sec", m.wallclock_sec}};
    std::ofstream os(path);
    if (!os) throw data_error("write_manifest: cannot open " + path);
    os << j.dump(2) << "\n";
}

}  // namespace hintpose
