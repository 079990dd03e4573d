#include "hintpose/model.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "hintpose/nn/serialize.hpp"
#include "hintpose/rng.hpp"

namespace hintpose {

using nlohmann::json;

void ModelConfig::validate() const {
    if (input_h < 1 || input_w < 1) throw config_error("model: input dims must be >= 1");
    if (stride < 1 || input_h % stride != 0 || input_w % stride != 0)
        throw config_error("model: input dims must be divisible by stride");
    if (joints < 1) throw config_error("model: joints must be >= 1");
    if (stem_channels < 1) throw config_error("model: stem_channels must be >= 1");
    if (hops < 1) throw config_error("model: hops must be >= 1");
    if (cue_sigma <= 0.0f) throw config_error("model: cue_sigma must be positive");
    if (input_h % 8 != 0 || input_w % 8 != 0)
        throw config_error("model: input dims must be divisible by 8 (stride-8 branch)");
}

namespace {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

template <class S>
typename ModelT<S>::Conv ModelT<S>::add_conv(const std::string& name, int cout, int cin, int k,
                                             bool zero_init) {
    nn::Shape ws{cout, cin, k, k};
    std::vector<S> w(static_cast<size_t>(ws.numel()), S(0));
    if (!zero_init) {
        // He fan-in initialization, seeded per parameter name so ablation
        // variants share the init of their common layers.
        Rng rng = Rng::derive(config_.seed, fnv1a(name));
        const double std = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
        for (auto& v : w) v = static_cast<S>(rng.normal(0.0, std));
    }
    Conv c;
    c.w = static_cast<int>(params_.size());
    params_.emplace_back(name + ".w", nn::Tensor<S>::from_data(ws, std::move(w)));
    c.b = static_cast<int>(params_.size());
    params_.emplace_back(name + ".b",
                         nn::Tensor<S>::zeros(nn::Shape{cout}));
    return c;
}

template <class S>
ModelT<S>::ModelT(const ModelConfig& config) : config_(config) {
    config_.validate();
    const int C = config_.stem_channels;
    const int C2 = 2 * C;
    const int K = config_.joints;

    stem_ = add_conv("stem", C, 1, 3, false);
    layer1_ = add_conv("layer1", C, C, 3, false);
    if (config_.cue_enabled) {
        cue_embed1_ = add_conv("cue_embed1", C, 1, 3, false);
        // Zero init keeps the freshly built network identical to the
        // baseline; the path becomes live through this conv's gradient.
        cue_embed2_ = add_conv("cue_embed2", C, C, 3, true);
    }
    if (config_.feedback_enabled) {
        fb_extract_ = add_conv("fb_extract", C, K, 1, false);
        fb_update_ = add_conv("fb_update", C, C, 1, true);
    }
    branch4a_ = add_conv("body.branch4a", C, C, 3, false);
    branch8a_ = add_conv("body.branch8a", C2, C, 3, false);
    fuse_8to4_ = add_conv("body.fuse_8to4", C, C2, 1, false);
    fuse_4to8_ = add_conv("body.fuse_4to8", C2, C, 1, false);
    fuse2_8to4_ = add_conv("body.fuse2_8to4", C, C2, 1, false);
    branch4b_ = add_conv("body.branch4b", C, C, 3, false);
    head_ = add_conv("head", K, C, 1, false);
}

template <class S>
int64_t ModelT<S>::parameter_count() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
}

template <class S>
nn::Tensor<S> ModelT<S>::apply(const Conv& c, const nn::Tensor<S>& x, int stride,
                               int padding) const {
    return nn::conv2d(x, params_[c.w].value, params_[c.b].value, stride, padding);
}

template <class S>
nn::Tensor<S> ModelT<S>::make_cue_maps(const std::vector<const InstanceCue*>& cues) const {
    const int N = static_cast<int>(cues.size());
    const int H = config_.input_h, W = config_.input_w;
    auto t = nn::Tensor<S>::zeros(nn::Shape{N, 1, H, W});
    for (int n = 0; n < N; ++n) {
        if (!cues[n]) continue;
        Heatmap hm = render_gaussian(cues[n]->x, cues[n]->y, cues[n]->sigma, H, W);
        S* dst = t.values().data() + static_cast<size_t>(n) * H * W;
        for (size_t i = 0; i < hm.data.size(); ++i) dst[i] = static_cast<S>(hm.data[i]);
    }
    return t;
}

template <class S>
std::vector<nn::Tensor<S>> ModelT<S>::forward_hops(const nn::Tensor<S>& crops,
                                                   const nn::Tensor<S>& cue_maps,
                                                   int hops_override) const {
    const nn::Shape& xs = crops.shape();
    if (xs.rank != 4 || xs.d[1] != 1 || xs.d[2] != config_.input_h || xs.d[3] != config_.input_w)
        throw config_error("forward_hops: crops must be (N,1," + std::to_string(config_.input_h) +
                           "," + std::to_string(config_.input_w) + "), got " + xs.str());
    const int hops = hops_override > 0 ? hops_override : config_.hops;

    auto f = nn::relu(apply(stem_, crops, 2, 1));
    f = nn::relu(apply(layer1_, f, 2, 1));

    if (config_.cue_enabled) {
        nn::Tensor<S> cue = cue_maps;
        if (!cue.defined()) cue = nn::Tensor<S>::zeros(nn::Shape{xs.d[0], 1, xs.d[2], xs.d[3]});
        if (cue.shape() != nn::Shape{xs.d[0], 1, xs.d[2], xs.d[3]})
            throw config_error("forward_hops: cue map shape " + cue.shape().str() +
                               " does not match crops " + xs.str());
        auto ce = nn::downsample_stride(cue, config_.stride);
        auto c1 = nn::relu(apply(cue_embed1_, ce, 1, 1));
        auto c2 = apply(cue_embed2_, c1, 1, 1);
        f = nn::add(f, c2);
    }

    std::vector<nn::Tensor<S>> outputs;
    outputs.reserve(hops);
    nn::Tensor<S> prev_heat;
    for (int t = 0; t < hops; ++t) {
        nn::Tensor<S> ft = f;
        if (t > 0 && config_.feedback_enabled) {
            auto hint = nn::relu(apply(fb_extract_, prev_heat, 1, 0));
            auto update = apply(fb_update_, hint, 1, 0);
            ft = nn::add(f, update);
        }
        auto x4 = nn::relu(apply(branch4a_, ft, 1, 1));
        auto x8 = nn::relu(apply(branch8a_, nn::downsample_stride(ft, 2), 1, 1));
        auto y4 = nn::relu(nn::add(x4, nn::upsample_bilinear(apply(fuse_8to4_, x8, 1, 0), 2)));
        auto y8 = nn::relu(nn::add(x8, apply(fuse_4to8_, nn::downsample_stride(x4, 2), 1, 0)));
        auto z4 = nn::relu(nn::add(y4, nn::upsample_bilinear(apply(fuse2_8to4_, y8, 1, 0), 2)));
        auto out4 = nn::relu(apply(branch4b_, z4, 1, 1));
        auto heat = apply(head_, out4, 1, 0);
        outputs.push_back(heat);
        prev_heat = heat;
    }
    return outputs;
}

template <class S>
std::vector<nn::Tensor<S>> ModelT<S>::forward_hops(const nn::Tensor<S>& crop,
                                                   const InstanceCue* cue,
                                                   int hops_override) const {
    nn::Tensor<S> cue_maps;
    if (cue && config_.cue_enabled) cue_maps = make_cue_maps({cue});
    return forward_hops(crop, cue_maps, hops_override);
}

template <class S>
void ModelT<S>::zero_grads() {
    for (auto& p : params_) p.zero_grad();
}

template <class S>
HopLossT<S> loss_all_hops(const std::vector<nn::Tensor<S>>& outputs, const nn::Tensor<S>& target,
                          const std::vector<uint8_t>& joint_mask) {
    if (outputs.empty()) throw usage_error("loss_all_hops: no hop outputs");
    bool any = false;
    for (uint8_t m : joint_mask) any = any || (m != 0);
    HopLossT<S> result;
    if (!any) {
        result.loss = nn::Tensor<S>::scalar(S(0));
        result.all_masked = true;
        return result;
    }
    const double w = 1.0 / static_cast<double>(outputs.size());
    nn::Tensor<S> total = nn::mse_masked(outputs[0], target, joint_mask, w);
    for (size_t t = 1; t < outputs.size(); ++t)
        total = nn::add(total, nn::mse_masked(outputs[t], target, joint_mask, w));
    result.loss = total;
    return result;
}

template <class S>
Heatmap tensor_to_heatmap(const nn::Tensor<S>& t, int sample) {
    const nn::Shape& s = t.shape();
    if (s.rank != 4 || sample < 0 || sample >= s.d[0])
        throw usage_error("tensor_to_heatmap: bad tensor or sample index");
    Heatmap hm(s.d[1], s.d[2], s.d[3]);
    const S* src = t.values().data() + static_cast<size_t>(sample) * s.d[1] * s.d[2] * s.d[3];
    for (size_t i = 0; i < hm.data.size(); ++i) hm.data[i] = static_cast<float>(src[i]);
    return hm;
}

namespace {

constexpr int kCheckpointVersion = 1;

json config_to_json(const ModelConfig& c) {
    return json{{"input_h", c.input_h},
                {"input_w", c.input_w},
                {"joints", c.joints},
                {"stem_channels", c.stem_channels},
                {"stride", c.stride},
                {"hops", c.hops},
                {"cue_enabled", c.cue_enabled},
                {"feedback_enabled", c.feedback_enabled},
                {"seed", c.seed},
                {"cue_sigma", c.cue_sigma}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.input_h = j.at("input_h").get<int>();
    c.input_w = j.at("input_w").get<int>();
    c.joints = j.at("joints").get<int>();
    c.stem_channels = j.at("stem_channels").get<int>();
    c.stride = j.at("stride").get<int>();
    c.hops = j.at("hops").get<int>();
    c.cue_enabled = j.at("cue_enabled").get<bool>();
    c.feedback_enabled = j.at("feedback_enabled").get<bool>();
    c.seed = j.at("seed").get<uint64_t>();
    c.cue_sigma = j.at("cue_sigma").get<float>();
    return c;
}

}  // namespace

void save_checkpoint(const ModelT<float>& model, const std::string& path) {
    json manifest = json::array();
    for (const auto& p : model.parameters()) {
        json shape = json::array();
        for (int i = 0; i < p.value.shape().rank; ++i) shape.push_back(p.value.shape().d[i]);
        manifest.push_back(json{{"name", p.name}, {"shape", shape}});
    }
    json header{{"format_version", kCheckpointVersion},
                {"config", config_to_json(model.config())},
                {"parameters", manifest}};
    const std::string hs = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("save_checkpoint: cannot open " + path);
    uint32_t len = static_cast<uint32_t>(hs.size());
    os.write(reinterpret_cast<const char*>(&len), 4);
    os.write(hs.data(), hs.size());
    for (const auto& p : model.parameters()) nn::write_hpt1(os, p.value);
    if (!os) throw data_error("save_checkpoint: write failed for " + path);
}

ModelT<float> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("load_checkpoint: cannot open " + path);
    uint32_t len = 0;
    is.read(reinterpret_cast<char*>(&len), 4);
    if (!is || len == 0 || len > (1u << 24)) throw data_error("load_checkpoint: bad header length");
    std::string hs(len, '\0');
    is.read(hs.data(), len);
    if (!is) throw data_error("load_checkpoint: truncated header");
    json header = json::parse(hs, nullptr, false);
    if (header.is_discarded()) throw data_error("load_checkpoint: invalid header JSON");
    const int version = header.at("format_version").get<int>();
    if (version != kCheckpointVersion)
        throw data_error("load_checkpoint: format_version " + std::to_string(version) +
                         " unsupported (expected " + std::to_string(kCheckpointVersion) + ")");

    ModelT<float> model(config_from_json(header.at("config")));
    const json& manifest = header.at("parameters");
    auto& params = model.parameters();
    if (manifest.size() != params.size())
        throw data_error("load_checkpoint: manifest lists " + std::to_string(manifest.size()) +
                         " parameters, model has " + std::to_string(params.size()));
    for (size_t i = 0; i < params.size(); ++i) {
        const std::string name = manifest[i].at("name").get<std::string>();
        if (name != params[i].name)
            throw data_error("load_checkpoint: parameter order mismatch at " + name);
        nn::Shape shape;
        std::vector<float> data = nn::read_hpt1(is, shape);
        if (shape != params[i].value.shape())
            throw data_error("load_checkpoint: shape mismatch for " + name);
        params[i].value.values() = std::move(data);
    }
    return model;
}

template class ModelT<float>;
template class ModelT<double>;
template HopLossT<float> loss_all_hops<float>(const std::vector<nn::Tensor<float>>&,
                                              const nn::Tensor<float>&,
                                              const std::vector<uint8_t>&);
template HopLossT<double> loss_all_hops<double>(const std::vector<nn::Tensor<double>>&,
                                                const nn::Tensor<double>&,
                                                const std::vector<uint8_t>&);
template Heatmap tensor_to_heatmap<float>(const nn::Tensor<float>&, int);
template Heatmap tensor_to_heatmap<double>(const nn::Tensor<double>&, int);

}  // namespace hintpose
