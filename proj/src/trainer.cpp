#include "hintpose/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hintpose {

namespace {

struct AdamState {
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;
    int64_t step = 0;
};

double global_grad_norm(Model& model) {
    double sq = 0.0;
    for (auto& p : model.parameters())
        for (float g : p.grad()) sq += static_cast<double>(g) * g;
    return std::sqrt(sq);
}

void clip_gradients(Model& model, double max_norm, double norm) {
    if (norm <= max_norm || norm == 0.0) return;
    const float scale = static_cast<float>(max_norm / norm);
    for (auto& p : model.parameters())
        for (float& g : p.grad()) g *= scale;
}

void adam_step(Model& model, AdamState& state, const TrainConfig& cfg, double lr) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    auto& params = model.parameters();
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params[i].trainable) continue;
        auto& value = params[i].value.values();
        auto& grad = params[i].grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (size_t j = 0; j < value.size(); ++j) {
            const double g = grad[j];
            m[j] = static_cast<float>(cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g);
            v[j] = static_cast<float>(cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g);
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            value[j] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + cfg.adam_eps));
        }
    }
}

struct Batch {
    nn::Tensor<float> crops;
    nn::Tensor<float> cues;
    nn::Tensor<float> targets;
    std::vector<uint8_t> mask;
};

Batch assemble_batch(const std::vector<TrainingSample>& samples, const ModelConfig& mcfg) {
    const int n = static_cast<int>(samples.size());
    const int hw = mcfg.input_h * mcfg.input_w;
    const int thw = mcfg.joints * mcfg.heatmap_h() * mcfg.heatmap_w();
    Batch b;
    b.crops = nn::Tensor<float>::zeros(nn::Shape{n, 1, mcfg.input_h, mcfg.input_w});
    b.cues = nn::Tensor<float>::zeros(nn::Shape{n, 1, mcfg.input_h, mcfg.input_w});
    b.targets = nn::Tensor<float>::zeros(nn::Shape{n, mcfg.joints, mcfg.heatmap_h(),
                                                   mcfg.heatmap_w()});
    b.mask.resize(static_cast<size_t>(n) * mcfg.joints);
    for (int i = 0; i < n; ++i) {
        const auto& s = samples[i];
        std::copy(s.crop.data.begin(), s.crop.data.end(),
                  b.crops.values().begin() + static_cast<size_t>(i) * hw);
        Heatmap cue = render_gaussian(s.cue.x, s.cue.y, s.cue.sigma, mcfg.input_h, mcfg.input_w);
        std::copy(cue.data.begin(), cue.data.end(),
                  b.cues.values().begin() + static_cast<size_t>(i) * hw);
        std::copy(s.target.data.begin(), s.target.data.end(),
                  b.targets.values().begin() + static_cast<size_t>(i) * thw);
        std::copy(s.joint_mask.begin(), s.joint_mask.end(),
                  b.mask.begin() + static_cast<size_t>(i) * mcfg.joints);
    }
    return b;
}

// Per-hop masked MSE over a full set, accumulated outside the tape.
std::vector<double> validation_mse(const Model& model, const std::vector<Batch>& batches) {
    nn::NoGradGuard guard;
    const int hops = model.config().hops;
    std::vector<double> num(hops, 0.0);
    std::vector<double> den(hops, 0.0);
    for (const auto& b : batches) {
        auto outputs = model.forward_hops(b.crops, b.cues);
        const nn::Shape& s = b.targets.shape();
        const size_t hw = static_cast<size_t>(s.d[2]) * s.d[3];
        for (int t = 0; t < hops; ++t) {
            const auto& pred = outputs[t].values();
            const auto& target = b.targets.values();
            for (int nc = 0; nc < s.d[0] * s.d[1]; ++nc) {
                if (!b.mask[nc]) continue;
                for (size_t i = nc * hw; i < (nc + 1) * hw; ++i) {
                    const double d = static_cast<double>(pred[i]) - target[i];
                    num[t] += d * d;
                }
                den[t] += static_cast<double>(hw);
            }
        }
    }
    std::vector<double> mse(hops, 0.0);
    for (int t = 0; t < hops; ++t) mse[t] = den[t] > 0.0 ? num[t] / den[t] : 0.0;
    return mse;
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw config_error("train: epochs must be >= 1");
    if (batch_size < 1) throw config_error("train: batch_size must be >= 1");
    if (lr < 0.0) throw config_error("train: lr must be >= 0");
    if (clip_norm <= 0.0) throw config_error("train: clip_norm must be positive");
}

TrainResult train(Model& model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.images.empty()) throw data_error("train: empty training set");
    const ModelConfig& mcfg = model.config();

    AdamState adam;
    for (auto& p : model.parameters()) {
        adam.m.emplace_back(p.value.numel(), 0.0f);
        adam.v.emplace_back(p.value.numel(), 0.0f);
    }

    // Fixed validation samples: one deterministic (person, cue) pick per
    // val image, so per-hop MSE is comparable across epochs.
    std::vector<Batch> val_batches;
    if (!val_set.images.empty()) {
        std::vector<TrainingSample> pending;
        for (size_t i = 0; i < val_set.images.size(); ++i) {
            Rng rng = Rng::derive(cfg.seed ^ 0x76616c5f73616d70ULL, i);
            const auto& ann = val_set.annotations[i];
            if (ann.persons.empty()) continue;
            const auto& person = ann.persons[rng.uniform_index(ann.persons.size())];
            pending.push_back(
                make_training_sample(val_set.images[i], person, mcfg, cfg.jitter_sigma, rng));
            if (static_cast<int>(pending.size()) == cfg.batch_size) {
                val_batches.push_back(assemble_batch(pending, mcfg));
                pending.clear();
            }
        }
        if (!pending.empty()) val_batches.push_back(assemble_batch(pending, mcfg));
    }

    TrainResult result;
    const auto t0 = std::chrono::steady_clock::now();
    int64_t step = 0;
    const int decay1 = static_cast<int>(0.7 * cfg.epochs);
    const int decay2 = static_cast<int>(0.9 * cfg.epochs);

    std::vector<size_t> order(train_set.images.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = cfg.lr;
        if (epoch >= decay2)
            lr *= 0.01;
        else if (epoch >= decay1)
            lr *= 0.1;

        Rng rng = Rng::derive(cfg.seed ^ 0x65706f63685f726eULL, static_cast<uint64_t>(epoch));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_index(i)]);

        double loss_sum = 0.0;
        int64_t loss_count = 0;
        std::vector<TrainingSample> pending;
        auto flush = [&](bool force) {
            if (pending.empty()) return;
            if (!force && static_cast<int>(pending.size()) < cfg.batch_size) return;
            Batch b = assemble_batch(pending, mcfg);
            pending.clear();

            auto outputs = model.forward_hops(b.crops, b.cues);
            auto hop_loss = loss_all_hops(outputs, b.targets, b.mask);
            if (hop_loss.all_masked) return;
            const double loss = hop_loss.loss.item();
            nn::backward(hop_loss.loss);
            const double norm = global_grad_norm(model);
            if (!std::isfinite(loss) || !std::isfinite(norm)) {
                model.zero_grads();
                throw numeric_error("train: non-finite loss at step " + std::to_string(step) +
                                    " (lr " + std::to_string(lr) + ", grad norm " +
                                    std::to_string(norm) + ")");
            }
            clip_gradients(model, cfg.clip_norm, norm);
            adam_step(model, adam, cfg, lr);
            model.zero_grads();
            result.final_grad_norm = norm;
            loss_sum += loss;
            ++loss_count;
            ++step;
        };

        for (size_t idx : order) {
            const auto& ann = train_set.annotations[idx];
            if (ann.persons.empty()) continue;
            const auto& person = ann.persons[rng.uniform_index(ann.persons.size())];
            pending.push_back(
                make_training_sample(train_set.images[idx], person, mcfg, cfg.jitter_sigma, rng));
            flush(false);
        }
        flush(true);

        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
        entry.lr = lr;
        if (!val_batches.empty() &&
            (epoch % cfg.eval_every == 0 || epoch == cfg.epochs - 1))
            entry.val_mse_per_hop = validation_mse(model, val_batches);
        else
            entry.val_mse_per_hop.assign(mcfg.hops, 0.0);
        entry.wallclock_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log_debug("epoch %d loss %.6f lr %.5f (%.1fs)", epoch, entry.train_loss, lr,
                  entry.wallclock_sec);
        result.log.push_back(std::move(entry));
    }
    return result;
}

void write_training_log_csv(const std::string& path, const std::vector<EpochLog>& log,
                            int hops) {
    std::ofstream os(path);
    if (!os) throw data_error("write_training_log_csv: cannot open " + path);
    os << "epoch,train_loss";
    for (int t = 1; t <= hops; ++t) os << ",val_mse_hop" << t;
    os << ",lr,wallclock\n";
    os.precision(17);
    for (const auto& e : log) {
        os << e.epoch << ',' << e.train_loss;
        for (int t = 0; t < hops; ++t)
            os << ',' << (t < static_cast<int>(e.val_mse_per_hop.size()) ? e.val_mse_per_hop[t]
                                                                         : 0.0);
        os << ',' << e.lr << ',' << e.wallclock_sec << '\n';
    }
}

std::vector<EpochLog> read_training_log_csv(const std::string& path, int hops) {
    std::ifstream is(path);
    if (!is) throw data_error("read_training_log_csv: cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw data_error("read_training_log_csv: empty file " + path);
    std::vector<EpochLog> log;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        EpochLog e;
        auto next = [&]() {
            if (!std::getline(ss, field, ','))
                throw data_error("read_training_log_csv: short row in " + path);
            return field;
        };
        e.epoch = std::stoi(next());
        e.train_loss = std::stod(next());
        for (int t = 0; t < hops; ++t) e.val_mse_per_hop.push_back(std::stod(next()));
        e.lr = std::stod(next());
        e.wallclock_sec = std::stod(next());
        log.push_back(std::move(e));
    }
    return log;
}

}  // namespace hintpose
