#include <doctest.h>

#include <cmath>

#include "hintpose/metrics.hpp"
#include "hintpose/rng.hpp"

using namespace hintpose;

namespace {

Pose single_joint(double x, double y) {
    Pose p;
    p.joints.push_back({x, y, 2});
    return p;
}

}  // namespace

TEST_CASE("oks: exact match, calibrated distance, far limit") {
    const std::vector<double> kappas = {0.1};
    auto gt = single_joint(50, 50);
    CHECK(oks(gt, gt, 10000.0, kappas) == doctest::Approx(1.0));

    // d^2 = 2 * area * kappa^2  ->  exp(-1)
    const double d = std::sqrt(2.0 * 10000.0 * 0.1 * 0.1);
    CHECK(oks(single_joint(50 + d, 50), gt, 10000.0, kappas) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-9));

    CHECK(oks(single_joint(50 + 1e6, 50), gt, 10000.0, kappas) < 1e-12);

    Pose unlabeled;
    unlabeled.joints.push_back({0, 0, 0});
    CHECK_THROWS_AS(oks(gt, unlabeled, 100.0, kappas), data_error);
    CHECK_THROWS_AS(oks(gt, gt, 0.0, kappas), config_error);
}

TEST_CASE("oks: symmetric in positions, strictly decreasing in distance") {
    const std::vector<double> kappas = {0.08, 0.08};
    Pose a, b;
    a.joints = {{10, 10, 2}, {20, 20, 2}};
    b.joints = {{12, 11, 2}, {19, 23, 2}};
    CHECK(oks(a, b, 500.0, kappas) == doctest::Approx(oks(b, a, 500.0, kappas)));

    double prev = 1.0;
    for (double d : {0.5, 1.0, 2.0, 4.0, 8.0}) {
        const double s = oks(single_joint(10 + d, 10), single_joint(10, 10), 500.0, {0.08});
        CHECK(s < prev);
        prev = s;
    }
}

namespace {

EvalConfig micro_eval_config() {
    EvalConfig cfg;
    cfg.thresholds = {0.5, 0.75};
    cfg.kappa = 0.1;
    cfg.area_factor = 1.0;  // areas given directly by 100x100 boxes
    return cfg;
}

}  // namespace

TEST_CASE("evaluate: hand-computed 2-image micro case") {
    // image 0: one GT, one prediction at OKS 0.8 (TP at both thresholds)
    // image 1: one GT (missed), one far prediction (FP)
    std::map<int, std::vector<PersonAnnotation>> gt;
    PersonAnnotation g0;
    g0.pose = single_joint(50, 50);
    g0.box = {0, 0, 100, 100, 1.0};
    gt[0] = {g0};
    PersonAnnotation g1;
    g1.pose = single_joint(30, 30);
    g1.box = {0, 0, 100, 100, 1.0};
    gt[1] = {g1};

    const double d08 = 0.1 * std::sqrt(2.0 * 10000.0 * std::log(1.0 / 0.8));
    std::map<int, std::vector<PredictedPose>> results;
    PredictedPose p0;
    p0.pose = single_joint(50 + d08, 50);
    p0.kp_scores = {0.9};
    p0.score = 0.9;
    results[0] = {p0};
    PredictedPose p1;
    p1.pose = single_joint(500, 500);
    p1.kp_scores = {0.5};
    p1.score = 0.5;
    results[1] = {p1};

    auto r = evaluate(results, gt, micro_eval_config());
    // Hand-executed: detections sorted (TP, FP); precision {1, 1/2},
    // recall {1/2, 1/2}; 101-pt AP = 51/101 at both thresholds; AR = 1/2.
    CHECK(r.ap == doctest::Approx(51.0 / 101.0).epsilon(1e-12));
    CHECK(r.ap50 == doctest::Approx(51.0 / 101.0).epsilon(1e-12));
    CHECK(r.ap75 == doctest::Approx(51.0 / 101.0).epsilon(1e-12));
    CHECK(r.ar == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.n_ground_truth == 2);
}

TEST_CASE("evaluate: perfect predictions and zero predictions") {
    std::map<int, std::vector<PersonAnnotation>> gt;
    std::map<int, std::vector<PredictedPose>> perfect;
    Rng rng(5);
    for (int img = 0; img < 4; ++img) {
        std::vector<PersonAnnotation> persons;
        std::vector<PredictedPose> preds;
        for (int p = 0; p < 2; ++p) {
            PersonAnnotation ann;
            ann.pose = single_joint(rng.uniform(10, 90), rng.uniform(10, 90));
            ann.box = {0, 0, 50, 80, 1.0};
            persons.push_back(ann);
            PredictedPose pred;
            pred.pose = ann.pose;
            pred.kp_scores = {1.0};
            pred.score = 1.0;
            preds.push_back(pred);
        }
        gt[img] = persons;
        perfect[img] = preds;
    }
    auto r = evaluate(perfect, gt, EvalConfig{});
    CHECK(r.ap == doctest::Approx(1.0));
    CHECK(r.ar == doctest::Approx(1.0));

    auto zero = evaluate({}, gt, EvalConfig{});
    CHECK(zero.ap == 0.0);
    CHECK(zero.ar == 0.0);
}

TEST_CASE("evaluate: unknown image ids are rejected with a listing") {
    std::map<int, std::vector<PersonAnnotation>> gt;
    PersonAnnotation g;
    g.pose = single_joint(10, 10);
    g.box = {0, 0, 40, 40, 1.0};
    gt[0] = {g};
    std::map<int, std::vector<PredictedPose>> results;
    results[7] = {};
    CHECK_THROWS_WITH_AS(evaluate(results, gt, EvalConfig{}), doctest::Contains("7"),
                         data_error);
}

TEST_CASE("evaluate: invariant to prediction ordering") {
    Rng rng(9);
    std::map<int, std::vector<PersonAnnotation>> gt;
    std::map<int, std::vector<PredictedPose>> results;
    for (int img = 0; img < 5; ++img) {
        std::vector<PersonAnnotation> persons;
        std::vector<PredictedPose> preds;
        for (int p = 0; p < 3; ++p) {
            PersonAnnotation ann;
            ann.pose = single_joint(rng.uniform(10, 90), rng.uniform(10, 90));
            ann.box = {0, 0, 60, 60, 1.0};
            persons.push_back(ann);
            PredictedPose pred;
            pred.pose = single_joint(ann.pose.joints[0].x + rng.uniform(-6, 6),
                                     ann.pose.joints[0].y + rng.uniform(-6, 6));
            pred.kp_scores = {rng.uniform()};
            pred.score = rng.uniform();
            preds.push_back(pred);
        }
        gt[img] = persons;
        results[img] = preds;
    }
    auto r1 = evaluate(results, gt, EvalConfig{});
    for (auto& [id, preds] : results) std::reverse(preds.begin(), preds.end());
    auto r2 = evaluate(results, gt, EvalConfig{});
    CHECK(r1.ap == doctest::Approx(r2.ap).epsilon(1e-12));
    CHECK(r1.ar == doctest::Approx(r2.ar).epsilon(1e-12));
}

TEST_CASE("evaluate: adding a matching prediction never lowers AP; a zero-score FP changes nothing") {
    std::map<int, std::vector<PersonAnnotation>> gt;
    for (int img = 0; img < 2; ++img) {
        PersonAnnotation a;
        a.pose = single_joint(20, 20);
        a.box = {0, 0, 60, 60, 1.0};
        PersonAnnotation b;
        b.pose = single_joint(70, 70);
        b.box = {40, 40, 60, 60, 1.0};
        gt[img] = {a, b};
    }
    std::map<int, std::vector<PredictedPose>> results;
    PredictedPose p;
    p.pose = single_joint(20, 20);
    p.kp_scores = {0.9};
    p.score = 0.9;
    results[0] = {p};

    auto base = evaluate(results, gt, EvalConfig{});

    // true positive for a previously missed GT
    PredictedPose tp;
    tp.pose = single_joint(70, 70);
    tp.kp_scores = {0.8};
    tp.score = 0.8;
    auto with_tp = results;
    with_tp[0].push_back(tp);
    CHECK(evaluate(with_tp, gt, EvalConfig{}).ap >= base.ap);

    // zero-score false positive sorts last and changes nothing
    PredictedPose fp;
    fp.pose = single_joint(500, 500);
    fp.kp_scores = {0.0};
    fp.score = 0.0;
    auto with_fp = results;
    with_fp[1].push_back(fp);
    auto r = evaluate(with_fp, gt, EvalConfig{});
    CHECK(r.ap == doctest::Approx(base.ap).epsilon(1e-12));
    for (size_t i = 0; i < r.ap_per_threshold.size(); ++i)
        CHECK(r.ap_per_threshold[i] == doctest::Approx(base.ap_per_threshold[i]).epsilon(1e-12));
}
