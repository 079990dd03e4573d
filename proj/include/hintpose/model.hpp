#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hintpose/heatmap.hpp"
#include "hintpose/nn/tensor.hpp"

namespace hintpose {

struct ModelConfig {
    int input_h = 64;
    int input_w = 64;
    int joints = 5;
    int stem_channels = 16;
    int stride = 4;
    int hops = 3;
    bool cue_enabled = true;
    bool feedback_enabled = true;
    uint64_t seed = 0;
    float cue_sigma = 2.0f;  // input-resolution pixels

    int heatmap_h() const { return input_h / stride; }
    int heatmap_w() const { return input_w / stride; }
    void validate() const;
};

// Pose network: stem + layer1 produce stride-4 features; an input refinement
// block fuses the instance-cue embedding by element-wise summation; a
// two-branch stride-4/8 body with cross-resolution fusion predicts heatmaps;
// a feedback connection re-injects the previous hop's heatmaps after layer1
// so each hop can refine the last one.
template <class S>
class ModelT {
public:
    explicit ModelT(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }

    std::vector<nn::Parameter<S>>& parameters() { return params_; }
    const std::vector<nn::Parameter<S>>& parameters() const { return params_; }
    int64_t parameter_count() const;

    // Batched forward. crops is (N,1,H,W); cue_maps is (N,1,H,W) or an
    // undefined tensor for "no cue". Returns one (N,K,h,w) heatmap tensor
    // per hop; hops_override > 0 runs that many hops instead of config.hops.
    std::vector<nn::Tensor<S>> forward_hops(const nn::Tensor<S>& crops,
                                            const nn::Tensor<S>& cue_maps,
                                            int hops_override = 0) const;

    // Single-crop forward; cue == nullptr renders an all-zero cue channel.
    std::vector<nn::Tensor<S>> forward_hops(const nn::Tensor<S>& crop,
                                            const InstanceCue* cue,
                                            int hops_override = 0) const;

    // Renders per-sample cues into an (N,1,H,W) tensor at input resolution.
    // Entries without a cue (nullptr) stay zero.
    nn::Tensor<S> make_cue_maps(const std::vector<const InstanceCue*>& cues) const;

    void zero_grads();

private:
    struct Conv {
        int w = -1;  // parameter indices
        int b = -1;
    };
    nn::Tensor<S> apply(const Conv& c, const nn::Tensor<S>& x, int stride, int padding) const;
    Conv add_conv(const std::string& name, int cout, int cin, int k, bool zero_init);

    ModelConfig config_;
    std::vector<nn::Parameter<S>> params_;

    Conv stem_, layer1_;
    Conv cue_embed1_, cue_embed2_;
    Conv fb_extract_, fb_update_;
    Conv branch4a_, branch8a_, fuse_8to4_, fuse_4to8_, fuse2_8to4_, branch4b_, head_;
};

using Model = ModelT<float>;

struct HopLoss {
    nn::Tensor<float> loss;
    bool all_masked = false;
};

// Mean over hops of per-channel-masked MSE. mask has N*K entries (labeled
// joints of each sample). Fully masked batches yield zero loss and a flag.
template <class S>
struct HopLossT {
    nn::Tensor<S> loss;
    bool all_masked = false;
};

template <class S>
HopLossT<S> loss_all_hops(const std::vector<nn::Tensor<S>>& outputs, const nn::Tensor<S>& target,
                          const std::vector<uint8_t>& joint_mask);

// Heatmap view of one sample of an (N,K,h,w) output tensor.
template <class S>
Heatmap tensor_to_heatmap(const nn::Tensor<S>& t, int sample);

// Checkpoint: u32 header length + JSON header {format_version, config,
// parameter manifest} + HPT1 payload per parameter in manifest order.
void save_checkpoint(const ModelT<float>& model, const std::string& path);
ModelT<float> load_checkpoint(const std::string& path);

}  // namespace hintpose
