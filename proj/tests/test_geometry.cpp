#include <doctest.h>

#include <cmath>

#include "hintpose/geometry.hpp"
#include "hintpose/rng.hpp"

using namespace hintpose;

TEST_CASE("filter_boxes: per-side rule with inclusive boundary") {
    std::vector<BBox> boxes = {{0, 0, 31, 100, 0.9},  // one side under 32 -> dropped
                               {0, 0, 32, 32, 0.8},   // boundary kept
                               {0, 0, 100, 31, 0.7},
                               {5, 5, 40, 50, 0.6}};
    auto kept = filter_boxes(boxes);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].score == 0.8);
    CHECK(kept[1].score == 0.6);

    CHECK(filter_boxes({}).empty());
}

TEST_CASE("filter_boxes: idempotent and order preserving") {
    Rng rng(4);
    std::vector<BBox> boxes;
    for (int i = 0; i < 200; ++i)
        boxes.push_back({rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(1, 64),
                         rng.uniform(1, 64), rng.uniform()});
    auto once = filter_boxes(boxes);
    auto twice = filter_boxes(once);
    REQUIRE(once.size() == twice.size());
    for (size_t i = 0; i < once.size(); ++i) {
        CHECK(once[i].w == twice[i].w);
        CHECK(once[i].w >= 32);
        CHECK(once[i].h >= 32);
        if (i > 0) CHECK(once[i].score <= 1.0);  // order is original order, sanity only
    }
}

TEST_CASE("expand_to_aspect") {
    BBox square{10, 20, 50, 50, 1.0};
    auto same = expand_to_aspect(square, 1.0, 1.0);
    CHECK(same.x == doctest::Approx(10));
    CHECK(same.y == doctest::Approx(20));
    CHECK(same.w == doctest::Approx(50));
    CHECK(same.h == doctest::Approx(50));

    BBox tall{0, 0, 100, 200, 1.0};
    auto e = expand_to_aspect(tall, 0.75, 1.0);
    CHECK(e.w == doctest::Approx(150));
    CHECK(e.h == doctest::Approx(200));
    CHECK(e.cx() == doctest::Approx(tall.cx()));
    CHECK(e.cy() == doctest::Approx(tall.cy()));

    auto m = expand_to_aspect(tall, 0.75, 1.25);
    CHECK(m.area() == doctest::Approx(150 * 200 * 1.5625));
}

TEST_CASE("crop_affine: identity crop") {
    GrayImage img(8, 8);
    Rng rng(2);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    auto [crop, t] = crop_affine(img, {0, 0, 8, 8, 1.0}, 8, 8);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(crop.data[i] == doctest::Approx(img.data[i]).epsilon(1e-6));
}

TEST_CASE("crop_affine: constant image gives constant interior crop") {
    GrayImage img(20, 20);
    for (auto& v : img.data) v = 0.42f;
    auto [crop, t] = crop_affine(img, {4, 5, 10, 8, 1.0}, 16, 16);
    for (float v : crop.data) CHECK(v == doctest::Approx(0.42f));
}

TEST_CASE("crop_affine: degenerate box rejected") {
    GrayImage img(8, 8);
    CHECK_THROWS_AS(crop_affine(img, {0, 0, 0, 5, 1.0}, 4, 4), config_error);
    CHECK_THROWS_AS(crop_affine(img, {0, 0, 5, 5, 1.0}, 0, 4), config_error);
}

TEST_CASE("crop transform: forward-inverse round trip under 1e-6 px") {
    Rng rng(13);
    GrayImage img(64, 64);
    for (int trial = 0; trial < 50; ++trial) {
        BBox box{rng.uniform(0, 30), rng.uniform(0, 30), rng.uniform(5, 34), rng.uniform(5, 34),
                 1.0};
        auto [crop, t] = crop_affine(img, box, 64, 64);
        for (int i = 0; i < 20; ++i) {
            const double x = rng.uniform(box.x, box.x + box.w);
            const double y = rng.uniform(box.y, box.y + box.h);
            double cx, cy, bx, by;
            t.apply(x, y, cx, cy);
            t.apply_inverse(cx, cy, bx, by);
            CHECK(std::abs(bx - x) < 1e-6);
            CHECK(std::abs(by - y) < 1e-6);
        }
    }
}

TEST_CASE("keypoints_to_image: stride scaling plus inverse affine") {
    GrayImage img(64, 64);
    BBox box{8, 12, 32, 40, 1.0};
    auto [crop, t] = crop_affine(img, box, 64, 64);

    // A joint at image position (20, 30): forward to crop, divide by stride,
    // then keypoints_to_image must come back to (20, 30).
    double cx, cy;
    t.apply(20.0, 30.0, cx, cy);
    Pose hm_pose;
    hm_pose.joints.push_back({cx / 4.0, cy / 4.0, 2});
    Pose img_pose = keypoints_to_image(hm_pose, t, 4);
    CHECK(std::abs(img_pose.joints[0].x - 20.0) < 1e-4);
    CHECK(std::abs(img_pose.joints[0].y - 30.0) < 1e-4);
    CHECK(img_pose.joints[0].v == 2);
}

TEST_CASE("iou basics") {
    BBox a{0, 0, 10, 10, 1.0};
    CHECK(iou(a, a) == doctest::Approx(1.0));
    CHECK(iou(a, {20, 20, 5, 5, 1.0}) == 0.0);
    CHECK(iou(a, {5, 0, 10, 10, 1.0}) == doctest::Approx(50.0 / 150.0));
}
