#include "hintpose/synthdata.hpp"

#include <algorithm>
#include <cmath>

namespace hintpose {

namespace {

// Polynomial sin/cos for small angles (|a| <= ~0.5 rad). Plain arithmetic so
// dataset bytes do not depend on the platform's libm.
double poly_sin(double a) {
    const double a2 = a * a;
    return a * (1.0 + a2 * (-1.0 / 6.0 + a2 * (1.0 / 120.0 + a2 * (-1.0 / 5040.0))));
}
double poly_cos(double a) {
    const double a2 = a * a;
    return 1.0 + a2 * (-0.5 + a2 * (1.0 / 24.0 + a2 * (-1.0 / 720.0 + a2 * (1.0 / 40320.0))));
}

struct PersonShape {
    std::vector<Keypoint> joints;  // offsets relative to the person center
    double intensity = 0.6;
    double min_x = 0, max_x = 0, min_y = 0, max_y = 0;  // over labeled joints
};

// Joint offsets for one person: scaled, rotated, jittered, occluded.
PersonShape synth_person_shape(const SceneConfig& cfg, double height, Rng& rng) {
    PersonShape shape;
    const double angle = rng.uniform(-cfg.rotation_max_deg, cfg.rotation_max_deg) *
                         (3.14159265358979323846 / 180.0);
    const double ca = poly_cos(angle), sa = poly_sin(angle);
    shape.intensity = rng.uniform(0.55, 0.75);
    bool first = true;
    for (const auto& [ox, oy] : cfg.skeleton.offsets) {
        const double jx = (ox + rng.uniform(-cfg.joint_jitter, cfg.joint_jitter)) * height;
        const double jy = (oy + rng.uniform(-cfg.joint_jitter, cfg.joint_jitter)) * height;
        const double rx = ca * jx - sa * jy;
        const double ry = sa * jx + ca * jy;
        const int v = rng.uniform() < cfg.occlusion_prob ? 1 : 2;
        shape.joints.push_back({rx, ry, v});
        if (first) {
            shape.min_x = shape.max_x = rx;
            shape.min_y = shape.max_y = ry;
            first = false;
        } else {
            shape.min_x = std::min(shape.min_x, rx);
            shape.max_x = std::max(shape.max_x, rx);
            shape.min_y = std::min(shape.min_y, ry);
            shape.max_y = std::max(shape.max_y, ry);
        }
    }
    return shape;
}

BBox tight_box_at(const PersonShape& s, double cx, double cy) {
    return {cx + s.min_x, cy + s.min_y, s.max_x - s.min_x, s.max_y - s.min_y, 1.0};
}

PersonAnnotation place_person(const PersonShape& s, double cx, double cy) {
    PersonAnnotation ann;
    for (const auto& j : s.joints) ann.pose.joints.push_back({cx + j.x, cy + j.y, j.v});
    // Tight box from the emitted joint values so that recomputing it from the
    // annotation reproduces the box bit-for-bit.
    double mnx = ann.pose.joints[0].x, mxx = mnx;
    double mny = ann.pose.joints[0].y, mxy = mny;
    for (const auto& j : ann.pose.joints) {
        mnx = std::min(mnx, j.x);
        mxx = std::max(mxx, j.x);
        mny = std::min(mny, j.y);
        mxy = std::max(mxy, j.y);
    }
    ann.box = {mnx, mny, mxx - mnx, mxy - mny, 1.0};
    return ann;
}

bool fits_image(const SceneConfig& cfg, const PersonShape& s, double cx, double cy) {
    const double margin = 1.5;
    return cx + s.min_x >= margin && cx + s.max_x <= cfg.image_w - 1 - margin &&
           cy + s.min_y >= margin && cy + s.max_y <= cfg.image_h - 1 - margin;
}

void draw_segment(GrayImage& img, double x0, double y0, double x1, double y1, double thickness,
                  double intensity) {
    const double r = 0.5 * thickness + 0.5;
    const int lo_x = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - r)));
    const int hi_x = std::min(img.width - 1, static_cast<int>(std::ceil(std::max(x0, x1) + r)));
    const int lo_y = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - r)));
    const int hi_y = std::min(img.height - 1, static_cast<int>(std::ceil(std::max(y0, y1) + r)));
    const double dx = x1 - x0, dy = y1 - y0;
    const double len2 = dx * dx + dy * dy;
    for (int y = lo_y; y <= hi_y; ++y)
        for (int x = lo_x; x <= hi_x; ++x) {
            double t = len2 > 0.0 ? ((x - x0) * dx + (y - y0) * dy) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double px = x0 + t * dx, py = y0 + t * dy;
            const double d = std::sqrt((x - px) * (x - px) + (y - py) * (y - py));
            const double cov = std::clamp(0.5 * thickness + 0.5 - d, 0.0, 1.0) * intensity;
            float& cell = img.at(y, x);
            cell = std::max(cell, static_cast<float>(cov));
        }
}

void draw_disc(GrayImage& img, double cx, double cy, double radius, double intensity) {
    const int lo_x = std::max(0, static_cast<int>(std::floor(cx - radius - 1)));
    const int hi_x = std::min(img.width - 1, static_cast<int>(std::ceil(cx + radius + 1)));
    const int lo_y = std::max(0, static_cast<int>(std::floor(cy - radius - 1)));
    const int hi_y = std::min(img.height - 1, static_cast<int>(std::ceil(cy + radius + 1)));
    for (int y = lo_y; y <= hi_y; ++y)
        for (int x = lo_x; x <= hi_x; ++x) {
            const double d = std::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy));
            const double cov = std::clamp(radius + 0.5 - d, 0.0, 1.0) * intensity;
            float& cell = img.at(y, x);
            cell = std::max(cell, static_cast<float>(cov));
        }
}

void draw_person(GrayImage& img, const PersonAnnotation& ann, const SceneConfig& cfg,
                 double intensity) {
    for (const auto& [a, b] : cfg.skeleton.limbs) {
        const auto& ja = ann.pose.joints[a];
        const auto& jb = ann.pose.joints[b];
        // Limbs to occluded joints are drawn dimmer, the joint disc not at all.
        const double dim = (ja.v == 2 && jb.v == 2) ? 1.0 : 0.5;
        draw_segment(img, ja.x, ja.y, jb.x, jb.y, 1.4, intensity * dim);
    }
    for (const auto& j : ann.pose.joints)
        if (j.v == 2) draw_disc(img, j.x, j.y, 1.8, std::min(1.0, intensity + 0.35));
}

// Number of persons for one image, sampled from cfg.persons_weights.
int sample_person_count(const SceneConfig& cfg, Rng& rng) {
    double total = 0.0;
    for (double w : cfg.persons_weights) total += w;
    double u = rng.uniform() * total;
    for (size_t i = 0; i < cfg.persons_weights.size(); ++i) {
        u -= cfg.persons_weights[i];
        if (u < 0.0) return static_cast<int>(i) + 1;
    }
    return static_cast<int>(cfg.persons_weights.size());
}

}  // namespace

void SceneConfig::validate() const {
    if (image_h < 16 || image_w < 16) throw config_error("scene: image dims too small");
    if (persons_weights.empty()) throw config_error("scene: persons_weights empty");
    double total = 0.0;
    for (double w : persons_weights) {
        if (w < 0.0) throw config_error("scene: negative persons weight");
        total += w;
    }
    if (total <= 0.0) throw config_error("scene: persons_weights sum to zero");
    if (!(overlap_lo < overlap_hi) || overlap_lo < 0.0 || overlap_hi >= 1.0)
        throw config_error("scene: overlap range must satisfy 0 <= lo < hi < 1");
    if (!(person_height_lo < person_height_hi) || person_height_lo <= 0.0)
        throw config_error("scene: person height range degenerate");
    if (occlusion_prob < 0.0 || occlusion_prob > 1.0)
        throw config_error("scene: occlusion_prob outside [0,1]");
    if (skeleton.joints != static_cast<int>(skeleton.offsets.size()))
        throw config_error("scene: skeleton offsets do not match joint count");
    for (const auto& [a, b] : skeleton.limbs)
        if (a < 0 || b < 0 || a >= skeleton.joints || b >= skeleton.joints)
            throw config_error("scene: limb index out of range");
}

Dataset generate_dataset(const SceneConfig& cfg, int n_images) {
    cfg.validate();
    if (n_images < 1) throw config_error("generate_dataset: n_images must be >= 1");

    Dataset ds;
    ds.config = cfg;
    ds.images.reserve(n_images);
    ds.annotations.reserve(n_images);

    for (int idx = 0; idx < n_images; ++idx) {
        Rng rng = Rng::derive(cfg.seed, static_cast<uint64_t>(idx));
        const int n_persons = sample_person_count(cfg, rng);

        std::vector<PersonAnnotation> persons;
        bool ok = false;
        for (int attempt = 0; attempt < cfg.max_retries && !ok; ++attempt) {
            persons.clear();

            // First person anywhere it fits.
            const double h0 = rng.uniform(cfg.person_height_lo, cfg.person_height_hi);
            PersonShape s0 = synth_person_shape(cfg, h0, rng);
            const double cx0 = rng.uniform(-s0.min_x + 2.0, cfg.image_w - 3.0 - s0.max_x);
            const double cy0 = rng.uniform(-s0.min_y + 2.0, cfg.image_h - 3.0 - s0.max_y);
            if (!fits_image(cfg, s0, cx0, cy0)) continue;
            persons.push_back(place_person(s0, cx0, cy0));
            std::vector<double> intensities = {s0.intensity};

            bool placed_all = true;
            for (int p = 1; p < n_persons; ++p) {
                // Person p overlaps person p-1 with a tight-box IoU bisected
                // onto a target drawn from [overlap_lo, overlap_hi].
                const BBox& prev = persons[p - 1].box;
                bool placed = false;
                for (int tries = 0; tries < cfg.max_retries && !placed; ++tries) {
                    const double hp =
                        std::clamp(h0 * rng.uniform(0.85, 1.18), cfg.person_height_lo,
                                   cfg.person_height_hi);
                    PersonShape sp = synth_person_shape(cfg, hp, rng);
                    const double target =
                        rng.uniform(cfg.overlap_lo + 0.02, cfg.overlap_hi - 0.02);
                    const double theta = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
                    const double ux = poly_cos(theta), uy = poly_sin(theta);

                    auto iou_at = [&](double d) {
                        return iou(prev, tight_box_at(sp, prev.cx() - sp.min_x -
                                                              0.5 * (sp.max_x - sp.min_x) +
                                                              d * ux,
                                                      prev.cy() - sp.min_y -
                                                          0.5 * (sp.max_y - sp.min_y) + d * uy));
                    };
                    if (iou_at(0.0) < target) continue;  // sizes too different
                    double lo = 0.0, hi = cfg.image_w + cfg.image_h;
                    for (int it = 0; it < 60; ++it) {
                        const double mid = 0.5 * (lo + hi);
                        if (iou_at(mid) >= target)
                            lo = mid;
                        else
                            hi = mid;
                    }
                    const double d = lo;
                    const double cxp =
                        prev.cx() - sp.min_x - 0.5 * (sp.max_x - sp.min_x) + d * ux;
                    const double cyp =
                        prev.cy() - sp.min_y - 0.5 * (sp.max_y - sp.min_y) + d * uy;
                    if (!fits_image(cfg, sp, cxp, cyp)) continue;
                    PersonAnnotation ann = place_person(sp, cxp, cyp);
                    const double got = iou(prev, ann.box);
                    if (got < cfg.overlap_lo || got > cfg.overlap_hi) continue;
                    // Keep every other pair at or below the range top.
                    bool clash = false;
                    for (int q = 0; q + 1 < p; ++q)
                        if (iou(persons[q].box, ann.box) > cfg.overlap_hi) clash = true;
                    if (clash) continue;
                    persons.push_back(std::move(ann));
                    intensities.push_back(sp.intensity);
                    placed = true;
                }
                if (!placed) {
                    placed_all = false;
                    break;
                }
            }
            if (!placed_all) continue;

            GrayImage img(cfg.image_h, cfg.image_w);
            for (size_t p = 0; p < persons.size(); ++p)
                draw_person(img, persons[p], cfg, intensities[p]);
            if (cfg.noise > 0.0)
                for (auto& v : img.data)
                    v = std::clamp(v + static_cast<float>(rng.uniform(-cfg.noise, cfg.noise)),
                                   0.0f, 1.0f);
            // Quantize to 8 bits so the in-memory dataset matches its PGM dump.
            for (auto& v : img.data)
                v = static_cast<float>(std::lround(v * 255.0f)) / 255.0f;

            ds.images.push_back(std::move(img));
            ImageAnnotation ann;
            ann.image_id = idx;
            ann.persons = std::move(persons);
            ds.annotations.push_back(std::move(ann));
            ok = true;
        }
        if (!ok)
            throw data_error("generate_dataset: image " + std::to_string(idx) +
                             ": could not satisfy overlap target after retries");
    }
    return ds;
}

InstanceCue sample_training_cue(const Pose& pose, double jitter_sigma, Rng& rng,
                                float cue_sigma) {
    std::vector<int> labeled;
    for (size_t i = 0; i < pose.joints.size(); ++i)
        if (pose.joints[i].v > 0) labeled.push_back(static_cast<int>(i));
    if (labeled.empty()) throw data_error("sample_training_cue: pose has no labeled joints");

    const Keypoint& j = pose.joints[labeled[rng.uniform_index(labeled.size())]];
    double dx = 0.0, dy = 0.0;
    if (jitter_sigma > 0.0) {
        auto truncated = [&rng, jitter_sigma]() {
            for (int i = 0; i < 100; ++i) {
                const double g = rng.normal(0.0, jitter_sigma);
                if (std::abs(g) <= 2.0 * jitter_sigma) return g;
            }
            return 0.0;
        };
        dx = truncated();
        dy = truncated();
    }
    return {static_cast<float>(j.x + dx), static_cast<float>(j.y + dy), cue_sigma};
}

TrainingSample make_training_sample(const GrayImage& image, const PersonAnnotation& person,
                                    const ModelConfig& mcfg, double jitter_sigma, Rng& rng) {
    const double aspect = static_cast<double>(mcfg.input_w) / mcfg.input_h;
    const BBox ebox = expand_to_aspect(person.box, aspect, 1.25);
    auto [crop, transform] = crop_affine(image, ebox, mcfg.input_h, mcfg.input_w);

    TrainingSample sample;
    sample.crop = std::move(crop);
    sample.transform = transform;
    for (const auto& j : person.pose.joints) {
        double cx, cy;
        transform.apply(j.x, j.y, cx, cy);
        sample.pose_in_crop.joints.push_back({cx, cy, j.v});
    }
    sample.cue = sample_training_cue(sample.pose_in_crop, jitter_sigma, rng, mcfg.cue_sigma);

    sample.target = Heatmap(mcfg.joints, mcfg.heatmap_h(), mcfg.heatmap_w());
    sample.joint_mask.assign(mcfg.joints, 0);
    const double inv_stride = 1.0 / mcfg.stride;
    for (int k = 0; k < mcfg.joints && k < static_cast<int>(sample.pose_in_crop.joints.size());
         ++k) {
        const auto& j = sample.pose_in_crop.joints[k];
        if (j.v <= 0) continue;
        sample.joint_mask[k] = 1;
        render_gaussian_into(sample.target, k, static_cast<float>(j.x * inv_stride),
                             static_cast<float>(j.y * inv_stride), kDefaultSigma);
    }
    return sample;
}

}  // namespace hintpose
