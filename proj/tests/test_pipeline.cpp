#include <doctest.h>

#include <cmath>

#include "hintpose/pipeline.hpp"
#include "hintpose/synthdata.hpp"
#include "testutil.hpp"

using namespace hintpose;

namespace {

ScoredPose make_pose(Rng& rng, int joints, double score, double area = 800.0) {
    ScoredPose sp;
    for (int k = 0; k < joints; ++k) {
        sp.pose.joints.push_back({rng.uniform(0, 96), rng.uniform(0, 96), 2});
        sp.kp_scores.push_back(rng.uniform());
    }
    sp.score = score;
    sp.area = area;
    return sp;
}

Model zero_head_model() {
    ModelConfig cfg;
    cfg.seed = 2;
    Model model(cfg);
    for (auto& p : model.parameters())
        if (p.name == "head.w" || p.name == "head.b")
            for (auto& v : p.value.values()) v = 0.0f;
    return model;
}

}  // namespace

TEST_CASE("oks_nms: duplicate suppressed, disjoint kept") {
    Rng rng(3);
    const std::vector<double> kappas(5, 0.08);
    auto a = make_pose(rng, 5, 0.9);
    ScoredPose b = a;  // identical pose, lower score -> OKS 1 > gamma
    b.score = 0.8;
    auto kept = oks_nms({a, b}, 0.9, kappas);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].score == 0.9);

    // far-apart poses: pairwise OKS 0, all kept
    std::vector<ScoredPose> far;
    for (int i = 0; i < 4; ++i) {
        ScoredPose p = make_pose(rng, 5, 0.5 + 0.1 * i, 200.0);
        for (auto& j : p.pose.joints) {
            j.x = 1000.0 * i + j.x * 0.01;
            j.y = 1000.0 * i;
        }
        far.push_back(p);
    }
    CHECK(oks_nms(far, 0.9, kappas).size() == 4);
}

TEST_CASE("oks_nms: matches the brute-force reference on 200 random instances") {
    Rng rng(19);
    const std::vector<double> kappas(5, 0.08);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_index(20));
        std::vector<ScoredPose> poses;
        for (int i = 0; i < n; ++i) {
            // clustered scores/poses so suppressions actually happen
            ScoredPose p = make_pose(rng, 5, std::round(rng.uniform() * 20) / 20.0,
                                     rng.uniform(200, 2000));
            if (i > 0 && rng.uniform() < 0.5) {
                p.pose = poses[rng.uniform_index(i)].pose;  // exact duplicate position
                for (auto& j : p.pose.joints) j.x += rng.uniform(-2, 2);
            }
            poses.push_back(p);
        }
        const double gamma = rng.uniform(0.3, 0.95);
        auto fast = oks_nms(poses, gamma, kappas);
        auto ref = testutil::brute_force_oks_nms(poses, gamma, kappas);
        REQUIRE(fast.size() == ref.size());
        for (size_t i = 0; i < fast.size(); ++i) {
            CHECK(fast[i].score == ref[i].score);
            for (size_t k = 0; k < fast[i].pose.joints.size(); ++k) {
                CHECK(fast[i].pose.joints[k].x == ref[i].pose.joints[k].x);
                CHECK(fast[i].pose.joints[k].y == ref[i].pose.joints[k].y);
            }
        }
    }
}

TEST_CASE("oks_nms: output is a score-sorted subset and idempotent") {
    Rng rng(23);
    const std::vector<double> kappas(5, 0.08);
    std::vector<ScoredPose> poses;
    for (int i = 0; i < 15; ++i) poses.push_back(make_pose(rng, 5, rng.uniform()));
    auto once = oks_nms(poses, 0.7, kappas);
    CHECK(once.size() <= poses.size());
    for (size_t i = 1; i < once.size(); ++i) CHECK(once[i - 1].score >= once[i].score);
    auto twice = oks_nms(once, 0.7, kappas);
    REQUIRE(twice.size() == once.size());
    for (size_t i = 0; i < once.size(); ++i) CHECK(twice[i].score == once[i].score);
}

TEST_CASE("generate_image_cues: flat model falls back to one centered cue per box") {
    Model model = zero_head_model();
    SceneConfig scfg;
    scfg.seed = 6;
    auto ds = generate_dataset(scfg, 2);
    PipelineConfig pcfg;
    for (size_t i = 0; i < ds.images.size(); ++i) {
        std::vector<BBox> boxes;
        for (const auto& p : ds.annotations[i].persons) boxes.push_back(p.box);
        boxes = filter_boxes(boxes, pcfg.min_box_side);
        auto cues = generate_image_cues(ds.images[i], boxes, model, pcfg);
        REQUIRE(cues.size() == boxes.size());
        for (size_t b = 0; b < boxes.size(); ++b) {
            REQUIRE(cues[b].size() == 1);
            CHECK(cues[b][0].x == doctest::Approx(boxes[b].cx()));
            CHECK(cues[b][0].y == doctest::Approx(boxes[b].cy()));
        }
    }
}

TEST_CASE("estimate: flat model yields one pose per box; count bound holds") {
    Model model = zero_head_model();
    SceneConfig scfg;
    scfg.seed = 9;
    auto ds = generate_dataset(scfg, 3);
    PipelineConfig pcfg;
    for (size_t i = 0; i < ds.images.size(); ++i) {
        std::vector<BBox> boxes;
        for (const auto& p : ds.annotations[i].persons) boxes.push_back(p.box);
        boxes = filter_boxes(boxes, pcfg.min_box_side);
        auto cues = generate_image_cues(ds.images[i], boxes, model, pcfg);
        size_t cue_total = 0;
        for (const auto& c : cues) cue_total += c.size();
        auto poses = estimate(ds.images[i], boxes, {&model}, pcfg);
        CHECK(poses.size() <= cue_total);
        for (const auto& sp : poses) {
            CHECK(sp.pose.joints.size() == 5);
            CHECK(sp.score >= 0.0);
        }
    }
}

TEST_CASE("estimate: ensembling a model with itself equals the single model") {
    ModelConfig mcfg;
    mcfg.seed = 31;
    Model model(mcfg);
    // randomize head so outputs are not flat
    for (auto& p : model.parameters()) {
        Rng r(7);
        if (p.name == "head.w")
            for (auto& v : p.value.values()) v = static_cast<float>(r.uniform(-0.5, 0.5));
    }
    SceneConfig scfg;
    scfg.seed = 12;
    auto ds = generate_dataset(scfg, 2);
    PipelineConfig pcfg;
    for (size_t i = 0; i < ds.images.size(); ++i) {
        std::vector<BBox> boxes;
        for (const auto& p : ds.annotations[i].persons) boxes.push_back(p.box);
        boxes = filter_boxes(boxes, pcfg.min_box_side);
        auto single = estimate(ds.images[i], boxes, {&model}, pcfg);
        auto doubled = estimate(ds.images[i], boxes, {&model, &model}, pcfg);
        REQUIRE(single.size() == doubled.size());
        for (size_t p = 0; p < single.size(); ++p) {
            CHECK(single[p].score == doctest::Approx(doubled[p].score).epsilon(1e-6));
            for (size_t k = 0; k < single[p].pose.joints.size(); ++k) {
                CHECK(single[p].pose.joints[k].x ==
                      doctest::Approx(doubled[p].pose.joints[k].x).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("estimate: ensemble is invariant to model order") {
    ModelConfig ca;
    ca.seed = 41;
    ModelConfig cb;
    cb.seed = 43;
    Model ma(ca), mb(cb);
    SceneConfig scfg;
    scfg.seed = 15;
    auto ds = generate_dataset(scfg, 2);
    PipelineConfig pcfg;
    std::vector<BBox> boxes;
    for (const auto& p : ds.annotations[0].persons) boxes.push_back(p.box);
    boxes = filter_boxes(boxes, pcfg.min_box_side);
    auto ab = estimate(ds.images[0], boxes, {&ma, &mb}, pcfg);
    auto ba = estimate(ds.images[0], boxes, {&mb, &ma}, pcfg);
    REQUIRE(ab.size() == ba.size());
    for (size_t p = 0; p < ab.size(); ++p)
        for (size_t k = 0; k < ab[p].pose.joints.size(); ++k)
            CHECK(std::abs(ab[p].pose.joints[k].x - ba[p].pose.joints[k].x) < 1e-4);
}

TEST_CASE("estimate: mismatched ensemble shapes are a configuration error") {
    ModelConfig ca;
    ModelConfig cb;
    cb.joints = 4;
    Model ma(ca), mb(cb);
    GrayImage img(96, 96);
    CHECK_THROWS_AS(estimate(img, {{10, 10, 40, 40, 1.0}}, {&ma, &mb}, PipelineConfig{}),
                    config_error);
    CHECK_THROWS_AS(estimate(img, {{10, 10, 40, 40, 1.0}}, {}, PipelineConfig{}), config_error);
}
