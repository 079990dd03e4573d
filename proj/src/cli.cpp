#include "hintpose/cli.hpp"

#include <atomic>
#include <malloc.h>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <CLI11.hpp>

#include "hintpose/io.hpp"
#include "hintpose/metrics.hpp"
#include "hintpose/synthdata.hpp"

namespace hintpose::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known,
                    const char* section) {
    if (!j.is_object()) throw config_error(std::string(section) + ": expected a JSON object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok)
            throw config_error(std::string(section) + ": unknown key '" + key + "'");
    }
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::vector<const Model*> model_pointers(const std::vector<Model>& models) {
    std::vector<const Model*> ptrs;
    for (const auto& m : models) ptrs.push_back(&m);
    return ptrs;
}

// Deterministic parallel map over image ids: each worker fills its own slots.
template <class Fn>
void parallel_for_images(int n, int workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            nn::NoGradGuard guard;
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream is(path);
    if (!is) throw config_error("config file not found: " + path);
    json j = json::parse(is, nullptr, false);
    if (j.is_discarded()) throw config_error("config file is not valid JSON: " + path);
    reject_unknown(j, {"scene", "model", "train", "pipeline", "eval", "ablate"}, path.c_str());
    return j;
}

ModelConfig model_config_from_json(const json& j) {
    reject_unknown(j,
                   {"input_h", "input_w", "joints", "stem_channels", "stride", "hops",
                    "cue_enabled", "feedback_enabled", "seed", "cue_sigma"},
                   "model config");
    ModelConfig c;
    c.input_h = j.value("input_h", c.input_h);
    c.input_w = j.value("input_w", c.input_w);
    c.joints = j.value("joints", c.joints);
    c.stem_channels = j.value("stem_channels", c.stem_channels);
    c.stride = j.value("stride", c.stride);
    c.hops = j.value("hops", c.hops);
    c.cue_enabled = j.value("cue_enabled", c.cue_enabled);
    c.feedback_enabled = j.value("feedback_enabled", c.feedback_enabled);
    c.seed = j.value("seed", c.seed);
    c.cue_sigma = j.value("cue_sigma", c.cue_sigma);
    return c;
}

TrainConfig train_config_from_json(const json& j) {
    reject_unknown(j,
                   {"epochs", "batch_size", "lr", "beta1", "beta2", "adam_eps", "clip_norm",
                    "jitter_sigma", "eval_every", "seed"},
                   "train config");
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.jitter_sigma = j.value("jitter_sigma", c.jitter_sigma);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.seed = j.value("seed", c.seed);
    return c;
}

PipelineConfig pipeline_config_from_json(const json& j) {
    reject_unknown(j,
                   {"peak_min_score", "peak_window", "max_cues", "nms_gamma", "kappa",
                    "area_factor", "margin", "min_box_side", "hops_override"},
                   "pipeline config");
    PipelineConfig c;
    c.peak_min_score = j.value("peak_min_score", c.peak_min_score);
    c.peak_window = j.value("peak_window", c.peak_window);
    c.max_cues = j.value("max_cues", c.max_cues);
    c.nms_gamma = j.value("nms_gamma", c.nms_gamma);
    c.kappa = j.value("kappa", c.kappa);
    c.area_factor = j.value("area_factor", c.area_factor);
    c.margin = j.value("margin", c.margin);
    c.min_box_side = j.value("min_box_side", c.min_box_side);
    c.hops_override = j.value("hops_override", c.hops_override);
    return c;
}

EvalConfig eval_config_from_json(const json& j) {
    reject_unknown(j, {"thresholds", "kappas", "kappa", "area_factor", "max_detections"},
                   "eval config");
    EvalConfig c;
    if (j.count("thresholds")) c.thresholds = j.at("thresholds").get<std::vector<double>>();
    if (j.count("kappas")) c.kappas = j.at("kappas").get<std::vector<double>>();
    c.kappa = j.value("kappa", c.kappa);
    c.area_factor = j.value("area_factor", c.area_factor);
    c.max_detections = j.value("max_detections", c.max_detections);
    return c;
}

namespace {

// ---- gen-data -----------------------------------------------------------

int cmd_gen_data(const std::string& config_path, const std::string& out_dir, int n_images,
                 int64_t seed_override) {
    Timer timer;
    json cfgj = load_config_file(config_path);
    SceneConfig scene = scene_config_from_json(cfgj.value("scene", json::object()));
    if (seed_override >= 0) scene.seed = static_cast<uint64_t>(seed_override);

    Dataset ds = generate_dataset(scene, n_images);
    write_dataset(out_dir, ds);
    log_info("gen-data: %d images -> %s", n_images, out_dir.c_str());

    RunManifest m;
    m.subcommand = "gen-data";
    m.resolved_config = json{{"scene", scene_config_to_json(scene)}, {"n_images", n_images}};
    m.seed = scene.seed;
    m.inputs = config_path.empty() ? std::vector<std::string>{} : std::vector<std::string>{config_path};
    m.outputs = {(fs::path(out_dir) / "annotations.jsonl").string(),
                 (fs::path(out_dir) / "detections.jsonl").string()};
    m.wallclock_sec = timer.seconds();
    write_manifest((fs::path(out_dir) / "manifest.json").string(), m);
    return 0;
}

// ---- train ----------------------------------------------------------------

int cmd_train(const std::string& config_path, const std::string& train_dir,
              const std::string& val_dir, const std::string& out_path, int64_t seed_override,
              int cue_flag, int feedback_flag) {
    Timer timer;
    json cfgj = load_config_file(config_path);
    ModelConfig mcfg = model_config_from_json(cfgj.value("model", json::object()));
    TrainConfig tcfg = train_config_from_json(cfgj.value("train", json::object()));
    if (seed_override >= 0) {
        tcfg.seed = static_cast<uint64_t>(seed_override);
        mcfg.seed = static_cast<uint64_t>(seed_override);
    }
    if (cue_flag >= 0) mcfg.cue_enabled = cue_flag != 0;
    if (feedback_flag >= 0) mcfg.feedback_enabled = feedback_flag != 0;

    Dataset train_set = read_dataset(train_dir);
    Dataset val_set;
    if (!val_dir.empty()) val_set = read_dataset(val_dir);

    Model model(mcfg);
    log_info("train: %lld parameters, %zu train images, %zu val images",
             static_cast<long long>(model.parameter_count()), train_set.images.size(),
             val_set.images.size());
    TrainResult result = train(model, train_set, val_set, tcfg);
    save_checkpoint(model, out_path);
    const std::string log_path = out_path + ".log.csv";
    write_training_log_csv(log_path, result.log, mcfg.hops);
    if (!result.log.empty())
        log_info("train: final loss %.6f -> %s", result.log.back().train_loss, out_path.c_str());

    RunManifest m;
    m.subcommand = "train";
    m.resolved_config = json{{"model",
                              {{"input_h", mcfg.input_h},
                               {"input_w", mcfg.input_w},
                               {"joints", mcfg.joints},
                               {"stem_channels", mcfg.stem_channels},
                               {"stride", mcfg.stride},
                               {"hops", mcfg.hops},
                               {"cue_enabled", mcfg.cue_enabled},
                               {"feedback_enabled", mcfg.feedback_enabled},
                               {"seed", mcfg.seed},
                               {"cue_sigma", mcfg.cue_sigma}}},
                             {"train",
                              {{"epochs", tcfg.epochs},
                               {"batch_size", tcfg.batch_size},
                               {"lr", tcfg.lr},
                               {"beta1", tcfg.beta1},
                               {"beta2", tcfg.beta2},
                               {"adam_eps", tcfg.adam_eps},
                               {"clip_norm", tcfg.clip_norm},
                               {"jitter_sigma", tcfg.jitter_sigma},
                               {"eval_every", tcfg.eval_every},
                               {"seed", tcfg.seed}}}};
    m.seed = tcfg.seed;
    m.inputs = {train_dir};
    if (!val_dir.empty()) m.inputs.push_back(val_dir);
    if (!config_path.empty()) m.inputs.push_back(config_path);
    m.outputs = {out_path, log_path};
    m.wallclock_sec = timer.seconds();
    write_manifest(out_path + ".manifest.json", m);
    return 0;
}

// ---- infer ------------------------------------------------------------------

int cmd_infer(const std::string& config_path, const std::vector<std::string>& checkpoint_paths,
              const std::string& data_dir, const std::string& out_path, int hops, double nms_oks,
              int min_box_side, int workers, const std::string& dump_heatmap_dir,
              bool require_ensemble) {
    Timer timer;
    if (checkpoint_paths.empty()) throw usage_error("infer: at least one --checkpoints required");
    if (require_ensemble && checkpoint_paths.size() < 2)
        throw usage_error("ensemble-infer: at least two --checkpoints required");

    json cfgj = load_config_file(config_path);
    PipelineConfig pcfg = pipeline_config_from_json(cfgj.value("pipeline", json::object()));
    if (hops > 0) pcfg.hops_override = hops;
    if (nms_oks > 0.0) pcfg.nms_gamma = nms_oks;
    if (min_box_side >= 0) pcfg.min_box_side = min_box_side;

    std::vector<Model> models;
    for (const auto& path : checkpoint_paths) models.push_back(load_checkpoint(path));
    const auto model_ptrs = model_pointers(models);

    const auto detections = read_detections_jsonl(
        (fs::path(data_dir) / "detections.jsonl").string());
    std::vector<int> image_ids;
    for (const auto& [id, _] : detections) image_ids.push_back(id);

    if (!dump_heatmap_dir.empty()) fs::create_directories(dump_heatmap_dir);

    std::vector<std::vector<ScoredPose>> per_image(image_ids.size());
    parallel_for_images(static_cast<int>(image_ids.size()), workers, [&](int i) {
        const int id = image_ids[i];
        char name[32];
        std::snprintf(name, sizeof(name), "img_%06d.pgm", id);
        GrayImage image = read_pgm((fs::path(data_dir) / "images" / name).string());
        auto boxes = filter_boxes(detections.at(id), pcfg.min_box_side);
        if (boxes.empty()) return;
        per_image[i] = estimate(image, boxes, model_ptrs, pcfg);
        if (!dump_heatmap_dir.empty()) {
            Heatmap image_map;
            generate_image_cues(image, boxes, *model_ptrs[0], pcfg, &image_map);
            char hname[40];
            std::snprintf(hname, sizeof(hname), "image_%06d.hpt", id);
            save_heatmap((fs::path(dump_heatmap_dir) / hname).string(), image_map, 1, 0.0, 0.0);
        }
    });

    std::map<int, std::vector<PredictedPose>> results;
    for (size_t i = 0; i < image_ids.size(); ++i) {
        std::vector<PredictedPose> poses;
        for (const auto& sp : per_image[i]) {
            PredictedPose pp;
            pp.pose = sp.pose;
            pp.kp_scores = sp.kp_scores;
            pp.score = sp.score;
            pp.box_id = sp.box_id;
            pp.hop = sp.hop;
            poses.push_back(std::move(pp));
        }
        results[image_ids[i]] = std::move(poses);
    }
    write_results_jsonl(out_path, results);
    log_info("infer: %zu images, %zu model(s) -> %s", image_ids.size(), models.size(),
             out_path.c_str());

    RunManifest m;
    m.subcommand = require_ensemble ? "ensemble-infer" : "infer";
    m.resolved_config = json{{"pipeline",
                              {{"peak_min_score", pcfg.peak_min_score},
                               {"peak_window", pcfg.peak_window},
                               {"max_cues", pcfg.max_cues},
                               {"nms_gamma", pcfg.nms_gamma},
                               {"kappa", pcfg.kappa},
                               {"area_factor", pcfg.area_factor},
                               {"margin", pcfg.margin},
                               {"min_box_side", pcfg.min_box_side},
                               {"hops_override", pcfg.hops_override}}},
                             {"checkpoints", checkpoint_paths}};
    m.inputs = checkpoint_paths;
    m.inputs.push_back(data_dir);
    m.outputs = {out_path};
    m.wallclock_sec = timer.seconds();
    write_manifest(out_path + ".manifest.json", m);
    return 0;
}

// ---- eval ----------------------------------------------------------------

int cmd_eval(const std::string& config_path, const std::string& results_path,
             const std::string& data_dir, const std::string& out_path) {
    Timer timer;
    json cfgj = load_config_file(config_path);
    EvalConfig ecfg = eval_config_from_json(cfgj.value("eval", json::object()));

    auto results = read_results_jsonl(results_path);
    auto gt = read_annotations_jsonl((fs::path(data_dir) / "annotations.jsonl").string());
    EvalResult r = evaluate(results, gt, ecfg);
    std::fputs(format_eval_table(r).c_str(), stdout);

    json report{{"ap", r.ap},
                {"ar", r.ar},
                {"ap50", r.ap50},
                {"ap75", r.ap75},
                {"thresholds", r.thresholds},
                {"ap_per_threshold", r.ap_per_threshold},
                {"ar_per_threshold", r.ar_per_threshold},
                {"n_ground_truth", r.n_ground_truth}};
    if (!out_path.empty()) {
        std::ofstream os(out_path);
        if (!os) throw data_error("eval: cannot open " + out_path);
        os << report.dump(2) << "\n";

        RunManifest m;
        m.subcommand = "eval";
        m.resolved_config = json{{"eval",
                                  {{"kappa", ecfg.kappa},
                                   {"area_factor", ecfg.area_factor},
                                   {"max_detections", ecfg.max_detections},
                                   {"thresholds", ecfg.thresholds}}}};
        m.inputs = {results_path, data_dir};
        m.outputs = {out_path};
        m.wallclock_sec = timer.seconds();
        write_manifest(out_path + ".manifest.json", m);
    }
    return 0;
}

// ---- ablate ------------------------------------------------------------------

struct VariantSpec {
    const char* name;
    bool cue;
    bool feedback;
};

int cmd_ablate(const std::string& config_path, const std::string& out_dir, int seeds,
               int workers) {
    Timer timer;
    json cfgj = load_config_file(config_path);
    const json ablate_cfg = cfgj.value("ablate", json::object());
    reject_unknown(ablate_cfg, {"seeds", "n_train", "n_val"}, "ablate config");
    if (seeds <= 0) seeds = ablate_cfg.value("seeds", 3);
    const int n_train = ablate_cfg.value("n_train", 2000);
    const int n_val = ablate_cfg.value("n_val", 500);

    SceneConfig scene = scene_config_from_json(cfgj.value("scene", json::object()));
    ModelConfig mcfg_base = model_config_from_json(cfgj.value("model", json::object()));
    TrainConfig tcfg_base = train_config_from_json(cfgj.value("train", json::object()));
    PipelineConfig pcfg = pipeline_config_from_json(cfgj.value("pipeline", json::object()));
    EvalConfig ecfg = eval_config_from_json(cfgj.value("eval", json::object()));

    static const VariantSpec kVariants[] = {{"baseline", false, false},
                                            {"instance_cue", true, false},
                                            {"recurrent_refinement", false, true},
                                            {"cue_and_refinement", true, true}};

    fs::create_directories(out_dir);
    json report;
    report["config"] = cfgj;
    report["seeds"] = seeds;
    json variants = json::object();
    for (const auto& v : kVariants) variants[v.name] = json{{"per_seed", json::array()}};
    json datasets = json::array();

    for (int s = 0; s < seeds; ++s) {
        const fs::path seed_dir = fs::path(out_dir) / ("seed" + std::to_string(s));
        const std::string train_dir = (seed_dir / "train_data").string();
        const std::string val_dir = (seed_dir / "val_data").string();

        SceneConfig train_scene = scene;
        train_scene.seed = scene.seed + 1000 + 2 * static_cast<uint64_t>(s);
        SceneConfig val_scene = scene;
        val_scene.seed = scene.seed + 1001 + 2 * static_cast<uint64_t>(s);
        log_info("ablate: seed %d generating %d train / %d val images", s, n_train, n_val);
        write_dataset(train_dir, generate_dataset(train_scene, n_train));
        write_dataset(val_dir, generate_dataset(val_scene, n_val));
        datasets.push_back(json{{"train", train_dir}, {"val", val_dir}});

        Dataset train_set = read_dataset(train_dir);
        Dataset val_set = read_dataset(val_dir);

        for (const auto& variant : kVariants) {
            ModelConfig mcfg = mcfg_base;
            mcfg.cue_enabled = variant.cue;
            mcfg.feedback_enabled = variant.feedback;
            mcfg.seed = mcfg_base.seed + static_cast<uint64_t>(s);
            TrainConfig tcfg = tcfg_base;
            tcfg.seed = tcfg_base.seed + static_cast<uint64_t>(s);

            log_info("ablate: seed %d training %s", s, variant.name);
            Model model(mcfg);
            TrainResult tr = train(model, train_set, val_set, tcfg);
            const std::string ckpt = (seed_dir / (std::string(variant.name) + ".ckpt")).string();
            save_checkpoint(model, ckpt);
            write_training_log_csv(ckpt + ".log.csv", tr.log, mcfg.hops);

            // Validation inference + eval (hop T, and hop 1 for refinement rows).
            const auto detections =
                read_detections_jsonl((fs::path(val_dir) / "detections.jsonl").string());
            std::map<int, size_t> image_index;
            for (size_t i = 0; i < val_set.annotations.size(); ++i)
                image_index[val_set.annotations[i].image_id] = i;
            auto run_eval = [&](int hops_override, const std::string& tag) {
                PipelineConfig pc = pcfg;
                pc.hops_override = hops_override;
                std::vector<int> ids;
                for (const auto& [id, _] : detections) ids.push_back(id);
                std::vector<std::vector<ScoredPose>> per_image(ids.size());
                const Model* mp = &model;
                parallel_for_images(static_cast<int>(ids.size()), workers, [&](int i) {
                    auto boxes = filter_boxes(detections.at(ids[i]), pc.min_box_side);
                    if (boxes.empty()) return;
                    per_image[i] =
                        estimate(val_set.images[image_index.at(ids[i])], boxes, {mp}, pc);
                });
                std::map<int, std::vector<PredictedPose>> results;
                for (size_t i = 0; i < ids.size(); ++i) {
                    std::vector<PredictedPose> poses;
                    for (const auto& sp : per_image[i]) {
                        PredictedPose pp;
                        pp.pose = sp.pose;
                        pp.kp_scores = sp.kp_scores;
                        pp.score = sp.score;
                        pp.box_id = sp.box_id;
                        pp.hop = sp.hop;
                        poses.push_back(std::move(pp));
                    }
                    results[ids[i]] = std::move(poses);
                }
                const std::string results_path =
                    (seed_dir / (std::string(variant.name) + tag + ".results.jsonl")).string();
                write_results_jsonl(results_path, results);
                auto gt =
                    read_annotations_jsonl((fs::path(val_dir) / "annotations.jsonl").string());
                EvalResult r = evaluate(results, gt, ecfg);
                return std::make_pair(r, results_path);
            };

            auto [full, results_path] = run_eval(0, "");
            json entry{{"seed", s},
                       {"ap", full.ap},
                       {"ar", full.ar},
                       {"ap50", full.ap50},
                       {"checkpoint", ckpt},
                       {"results", results_path},
                       {"log", ckpt + ".log.csv"},
                       {"val_mse_final", tr.log.back().val_mse_per_hop}};
            if (variant.feedback) {
                auto [hop1, hop1_path] = run_eval(1, ".hop1");
                entry["ap_hop1"] = hop1.ap;
                entry["ar_hop1"] = hop1.ar;
                entry["results_hop1"] = hop1_path;
            }
            log_info("ablate: seed %d %s AP %.4f AR %.4f", s, variant.name, full.ap, full.ar);
            variants[variant.name]["per_seed"].push_back(std::move(entry));
        }
    }

    // Seed-averaged table, mirroring the 2x2 method grid.
    std::printf("method                 AP       AR\n");
    for (const auto& v : kVariants) {
        double ap = 0.0, ar = 0.0;
        for (const auto& e : variants[v.name]["per_seed"]) {
            ap += e["ap"].get<double>();
            ar += e["ar"].get<double>();
        }
        ap /= seeds;
        ar /= seeds;
        variants[v.name]["ap_mean"] = ap;
        variants[v.name]["ar_mean"] = ar;
        std::printf("%-22s %.4f   %.4f\n", v.name, ap, ar);
    }
    report["variants"] = variants;
    report["datasets"] = datasets;
    report["wallclock_sec"] = timer.seconds();

    const std::string report_path = (fs::path(out_dir) / "ablation_report.json").string();
    std::ofstream os(report_path);
    if (!os) throw data_error("ablate: cannot open " + report_path);
    os << report.dump(2) << "\n";

    RunManifest m;
    m.subcommand = "ablate";
    m.resolved_config = cfgj;
    m.seed = scene.seed;
    if (!config_path.empty()) m.inputs = {config_path};
    m.outputs = {report_path};
    m.wallclock_sec = timer.seconds();
    write_manifest((fs::path(out_dir) / "manifest.json").string(), m);
    return 0;
}

// ---- render -------------------------------------------------------------------

const uint8_t kPalette[6][3] = {{230, 60, 60},  {60, 200, 90},  {70, 110, 235},
                                {235, 190, 40}, {200, 70, 200}, {60, 200, 200}};

void draw_line_rgb(RgbImage& img, double x0, double y0, double x1, double y1,
                   const uint8_t* rgb) {
    const double dx = x1 - x0, dy = y1 - y0;
    const int steps = std::max(2, static_cast<int>(std::ceil(std::max(std::abs(dx),
                                                                      std::abs(dy)) * 2)));
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        const int x = static_cast<int>(std::lround(x0 + t * dx));
        const int y = static_cast<int>(std::lround(y0 + t * dy));
        if (x < 0 || x >= img.width || y < 0 || y >= img.height) continue;
        uint8_t* p = img.px(y, x);
        p[0] = rgb[0];
        p[1] = rgb[1];
        p[2] = rgb[2];
    }
}

int cmd_render(const std::string& data_dir, const std::string& results_path,
               const std::string& out_dir, int limit) {
    Timer timer;
    auto results = read_results_jsonl(results_path);
    std::ifstream cs((fs::path(data_dir) / "scene_config.json").string());
    SkeletonTemplate skeleton;
    if (cs) {
        json cj = json::parse(cs, nullptr, false);
        if (!cj.is_discarded()) skeleton = scene_config_from_json(cj).skeleton;
    }
    fs::create_directories(out_dir);

    int rendered = 0;
    std::vector<std::string> outputs;
    for (const auto& [id, poses] : results) {
        if (rendered >= limit) break;
        if (poses.empty()) continue;
        char name[32];
        std::snprintf(name, sizeof(name), "img_%06d.pgm", id);
        GrayImage image = read_pgm((fs::path(data_dir) / "images" / name).string());

        // Two panels: skeleton overlay on the left, predicted-keypoint
        // heatmap rendering on the right.
        RgbImage canvas(image.height, image.width * 2);
        for (int y = 0; y < image.height; ++y)
            for (int x = 0; x < image.width; ++x) {
                const uint8_t g = static_cast<uint8_t>(std::lround(image.at(y, x) * 255.0f));
                uint8_t* l = canvas.px(y, x);
                l[0] = l[1] = l[2] = g;
                uint8_t* r = canvas.px(y, x + image.width);
                r[0] = r[1] = r[2] = g / 3;
            }

        for (size_t p = 0; p < poses.size(); ++p) {
            const uint8_t* rgb = kPalette[p % 6];
            const auto& joints = poses[p].pose.joints;
            for (const auto& [a, b] : skeleton.limbs)
                if (a < static_cast<int>(joints.size()) && b < static_cast<int>(joints.size()))
                    draw_line_rgb(canvas, joints[a].x, joints[a].y, joints[b].x, joints[b].y,
                                  rgb);
            for (size_t k = 0; k < joints.size(); ++k) {
                Heatmap bump = render_gaussian(static_cast<float>(joints[k].x),
                                               static_cast<float>(joints[k].y), 2.0f,
                                               image.height, image.width);
                const uint8_t* krgb = kPalette[k % 6];
                for (int y = 0; y < image.height; ++y)
                    for (int x = 0; x < image.width; ++x) {
                        const float v = bump.at(0, y, x);
                        if (v <= 0.01f) continue;
                        uint8_t* px = canvas.px(y, x + image.width);
                        for (int c = 0; c < 3; ++c)
                            px[c] = static_cast<uint8_t>(
                                std::min(255.0f, px[c] + v * krgb[c] * 0.8f));
                    }
            }
        }
        char out_name[40];
        std::snprintf(out_name, sizeof(out_name), "render_%06d.png", id);
        const std::string out_path = (fs::path(out_dir) / out_name).string();
        write_png(out_path, canvas);
        outputs.push_back(out_path);
        ++rendered;
    }
    log_info("render: %d overlays -> %s", rendered, out_dir.c_str());

    RunManifest m;
    m.subcommand = "render";
    m.resolved_config = json{{"limit", limit}};
    m.inputs = {data_dir, results_path};
    m.outputs = outputs;
    m.wallclock_sec = timer.seconds();
    write_manifest((fs::path(out_dir) / "manifest.json").string(), m);
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
#ifdef __GLIBC__
    // Training allocates and frees multi-megabyte activation buffers every
    // step; keep them on the heap instead of mmap/munmap round trips.
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
    CLI::App app{"hintpose: instance-cue + recurrent-refinement pose toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_path, data_dir, val_dir, results_path, dump_dir;
    std::vector<std::string> checkpoints;
    int n_images = 100, workers = static_cast<int>(std::thread::hardware_concurrency());
    int hops = 0, min_box_side = -1, seeds = 0, limit = 20;
    int64_t seed = -1;
    double nms_oks = 0.0;
    int cue_flag = -1, feedback_flag = -1;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic crowded-scene dataset");
    gen->add_option("--config", config_path);
    gen->add_option("--out", out_path)->required();
    gen->add_option("--n-images", n_images);
    gen->add_option("--seed", seed);

    auto* tr = app.add_subcommand("train", "train a model on a generated dataset");
    tr->add_option("--config", config_path);
    tr->add_option("--data", data_dir)->required();
    tr->add_option("--val", val_dir);
    tr->add_option("--out", out_path)->required();
    tr->add_option("--seed", seed);
    tr->add_option("--cue", cue_flag, "override model cue_enabled (0/1)");
    tr->add_option("--feedback", feedback_flag, "override model feedback_enabled (0/1)");

    auto* inf = app.add_subcommand("infer", "run inference over a dataset's detections");
    inf->add_option("--config", config_path);
    inf->add_option("--checkpoints", checkpoints)->required();
    inf->add_option("--data", data_dir)->required();
    inf->add_option("--out", out_path)->required();
    inf->add_option("--hops", hops);
    inf->add_option("--nms-oks", nms_oks);
    inf->add_option("--min-box-side", min_box_side);
    inf->add_option("--workers", workers);
    inf->add_option("--dump-heatmaps", dump_dir);

    auto* ens = app.add_subcommand("ensemble-infer", "infer with an averaged-heatmap ensemble");
    ens->add_option("--config", config_path);
    ens->add_option("--checkpoints", checkpoints)->required();
    ens->add_option("--data", data_dir)->required();
    ens->add_option("--out", out_path)->required();
    ens->add_option("--hops", hops);
    ens->add_option("--nms-oks", nms_oks);
    ens->add_option("--min-box-side", min_box_side);
    ens->add_option("--workers", workers);

    auto* ev = app.add_subcommand("eval", "evaluate a results file against ground truth");
    ev->add_option("--config", config_path);
    ev->add_option("--results", results_path)->required();
    ev->add_option("--data", data_dir)->required();
    ev->add_option("--out", out_path);

    auto* ab = app.add_subcommand("ablate", "train and evaluate the 2x2 cue/refinement grid");
    ab->add_option("--config", config_path);
    ab->add_option("--out", out_path)->required();
    ab->add_option("--seeds", seeds);
    ab->add_option("--workers", workers);

    auto* rd = app.add_subcommand("render", "render skeleton/heatmap overlays for results");
    rd->add_option("--data", data_dir)->required();
    rd->add_option("--results", results_path)->required();
    rd->add_option("--out", out_path)->required();
    rd->add_option("--limit", limit);

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen_data(config_path, out_path, n_images, seed);
        if (tr->parsed())
            return cmd_train(config_path, data_dir, val_dir, out_path, seed, cue_flag,
                             feedback_flag);
        if (inf->parsed())
            return cmd_infer(config_path, checkpoints, data_dir, out_path, hops, nms_oks,
                             min_box_side, workers, dump_dir, false);
        if (ens->parsed())
            return cmd_infer(config_path, checkpoints, data_dir, out_path, hops, nms_oks,
                             min_box_side, workers, "", true);
        if (ev->parsed()) return cmd_eval(config_path, results_path, data_dir, out_path);
        if (ab->parsed()) return cmd_ablate(config_path, out_path, seeds, workers);
        if (rd->parsed()) return cmd_render(data_dir, results_path, out_path, limit);
        throw usage_error("no subcommand");
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const numeric_error& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const data_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace hintpose::cli
