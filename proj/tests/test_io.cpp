#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hintpose/io.hpp"
#include "hintpose/rng.hpp"

using namespace hintpose;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
    auto p = fs::temp_directory_path() / "hintpose_io_test";
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("pgm round trip is exact for 8-bit data") {
    GrayImage img(9, 13);
    Rng rng(2);
    for (auto& v : img.data)
        v = static_cast<float>(rng.uniform_index(256)) / 255.0f;
    const std::string path = (tmp_dir() / "a.pgm").string();
    write_pgm(path, img);
    auto back = read_pgm(path);
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    CHECK(back.data == img.data);

    CHECK_THROWS_AS(read_pgm((tmp_dir() / "missing.pgm").string()), data_error);
}

TEST_CASE("png writer emits a well-formed signature and chunks") {
    RgbImage img(4, 6);
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<uint8_t>(i * 7);
    const std::string path = (tmp_dir() / "a.png").string();
    write_png(path, img);
    std::ifstream is(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), {});
    REQUIRE(bytes.size() > 40);
    CHECK(static_cast<uint8_t>(bytes[0]) == 0x89);
    CHECK(bytes.substr(1, 3) == "PNG");
    CHECK(bytes.find("IHDR") != std::string::npos);
    CHECK(bytes.find("IDAT") != std::string::npos);
    CHECK(bytes.rfind("IEND") == bytes.size() - 8);
}

TEST_CASE("annotations / detections / results JSONL round trips") {
    std::vector<ImageAnnotation> anns(2);
    anns[0].image_id = 0;
    anns[1].image_id = 3;
    PersonAnnotation p;
    p.pose.joints = {{10.25, 20.5, 2}, {30.125, 40.0625, 1}};
    p.box = {10.25, 20.5, 19.875, 19.5625, 1.0};
    anns[0].persons = {p};

    auto dir = tmp_dir();
    write_annotations_jsonl((dir / "ann.jsonl").string(), anns);
    auto back = read_annotations_jsonl((dir / "ann.jsonl").string());
    REQUIRE(back.count(0) == 1);
    REQUIRE(back.count(3) == 1);
    CHECK(back[0][0].pose.joints[0].x == 10.25);
    CHECK(back[0][0].pose.joints[1].v == 1);
    CHECK(back[0][0].box.w == 19.875);
    CHECK(back[3].empty());

    write_detections_jsonl((dir / "det.jsonl").string(), anns);
    auto dets = read_detections_jsonl((dir / "det.jsonl").string());
    CHECK(dets[0].size() == 1);
    CHECK(dets[0][0].x == 10.25);

    std::map<int, std::vector<PredictedPose>> results;
    PredictedPose pp;
    pp.pose.joints = {{1.5, 2.5, 2}};
    pp.kp_scores = {0.75};
    pp.score = 0.6;
    pp.box_id = 4;
    pp.hop = 3;
    results[7] = {pp};
    write_results_jsonl((dir / "res.jsonl").string(), results);
    auto res = read_results_jsonl((dir / "res.jsonl").string());
    REQUIRE(res.count(7) == 1);
    CHECK(res[7][0].pose.joints[0].x == 1.5);
    CHECK(res[7][0].kp_scores[0] == 0.75);
    CHECK(res[7][0].score == 0.6);
    CHECK(res[7][0].box_id == 4);
    CHECK(res[7][0].hop == 3);
}

TEST_CASE("dataset directory round trip") {
    SceneConfig cfg;
    cfg.seed = 77;
    auto ds = generate_dataset(cfg, 6);
    const std::string dir = (tmp_dir() / "ds").string();
    write_dataset(dir, ds);
    auto back = read_dataset(dir);
    REQUIRE(back.images.size() == ds.images.size());
    for (size_t i = 0; i < ds.images.size(); ++i) CHECK(back.images[i].data == ds.images[i].data);
    for (size_t i = 0; i < ds.annotations.size(); ++i) {
        REQUIRE(back.annotations[i].persons.size() == ds.annotations[i].persons.size());
        for (size_t p = 0; p < ds.annotations[i].persons.size(); ++p) {
            CHECK(back.annotations[i].persons[p].box.x == ds.annotations[i].persons[p].box.x);
            CHECK(back.annotations[i].persons[p].box.w == ds.annotations[i].persons[p].box.w);
        }
    }
    CHECK(back.config.seed == 77);
}

TEST_CASE("heatmap dump: HPT1 with sidecar") {
    Heatmap hm(2, 5, 7);
    Rng rng(5);
    for (auto& v : hm.data) v = static_cast<float>(rng.uniform());
    const std::string path = (tmp_dir() / "h.hpt").string();
    save_heatmap(path, hm, 4, 1.5, 2.5);
    int stride = 0;
    double ox = 0, oy = 0;
    auto back = load_heatmap(path, &stride, &ox, &oy);
    CHECK(back.data == hm.data);
    CHECK(back.channels == 2);
    CHECK(stride == 4);
    CHECK(ox == 1.5);
    CHECK(oy == 2.5);

    fs::remove(path + ".json");
    CHECK_THROWS_AS(load_heatmap(path), data_error);
}

TEST_CASE("manifest records crc32 per output") {
    auto dir = tmp_dir();
    const std::string out = (dir / "artifact.txt").string();
    std::ofstream(out) << "payload";
    RunManifest m;
    m.subcommand = "test";
    m.resolved_config = nlohmann::json{{"k", 1}};
    m.seed = 9;
    m.outputs = {out};
    m.wallclock_sec = 0.5;
    const std::string mpath = (dir / "m.json").string();
    write_manifest(mpath, m);

    std::ifstream is(mpath);
    auto j = nlohmann::json::parse(is);
    CHECK(j["subcommand"] == "test");
    CHECK(j["seed"] == 9);
    REQUIRE(j["artifact_crc32"].count(out) == 1);
    CHECK(j["artifact_crc32"][out].get<std::string>().size() == 8);
}
