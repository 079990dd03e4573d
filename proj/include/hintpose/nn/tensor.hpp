#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hintpose/common.hpp"

namespace hintpose::nn {

// Dense NCHW-or-lower tensor shape, rank 0 (scalar) through 4.
struct Shape {
    int rank = 0;
    int d[4] = {1, 1, 1, 1};

    Shape() = default;
    Shape(std::initializer_list<int> dims) {
        if (dims.size() > 4) throw config_error("Shape: rank > 4 unsupported");
        rank = static_cast<int>(dims.size());
        int i = 0;
        for (int v : dims) d[i++] = v;
    }

    int64_t numel() const {
        int64_t n = 1;
        for (int i = 0; i < rank; ++i) n *= d[i];
        return n;
    }
    bool operator==(const Shape& o) const {
        if (rank != o.rank) return false;
        for (int i = 0; i < rank; ++i)
            if (d[i] != o.d[i]) return false;
        return true;
    }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const {
        std::string s = "(";
        for (int i = 0; i < rank; ++i) s += std::to_string(d[i]) + (i + 1 < rank ? "," : "");
        return s + ")";
    }
};

template <class S>
struct Node {
    Shape shape;
    std::vector<S> value;
    std::vector<S> grad;  // allocated on first touch, same length as value
    bool needs_grad = false;
    std::vector<std::shared_ptr<Node<S>>> parents;
    std::function<void(Node<S>&)> backward_fn;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), S(0));
    }
};

// Autograd on/off switch. Inference runs with a NoGradGuard so ops skip
// recording parents and scratch buffers.
bool autograd_enabled();
void set_autograd_enabled(bool on);

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(autograd_enabled()) { set_autograd_enabled(false); }
    ~NoGradGuard() { set_autograd_enabled(prev); }
};

// Value-semantics handle onto a tape node. Values are treated as immutable
// once an op has consumed them; leaves may be filled via values().
template <class S>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& s) {
        Tensor t;
        t.node_ = std::make_shared<Node<S>>();
        t.node_->shape = s;
        t.node_->value.assign(static_cast<size_t>(s.numel()), S(0));
        return t;
    }
    static Tensor from_data(const Shape& s, std::vector<S> v) {
        if (static_cast<int64_t>(v.size()) != s.numel())
            throw config_error("Tensor: value count " + std::to_string(v.size()) +
                               " does not match shape " + s.str());
        Tensor t;
        t.node_ = std::make_shared<Node<S>>();
        t.node_->shape = s;
        t.node_->value = std::move(v);
        return t;
    }
    static Tensor scalar(S v) { return from_data(Shape{}, {v}); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int64_t numel() const { return node_->shape.numel(); }

    const std::vector<S>& values() const { return node_->value; }
    std::vector<S>& values() { return node_->value; }
    S item() const {
        if (numel() != 1) throw usage_error("Tensor::item on non-scalar " + shape().str());
        return node_->value[0];
    }

    bool needs_grad() const { return node_->needs_grad; }
    void set_needs_grad(bool b) { node_->needs_grad = b; }
    std::vector<S>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    void zero_grad() {
        node_->grad.assign(node_->value.size(), S(0));
    }

    // Same values, cut off from the tape.
    Tensor detach() const {
        Tensor t;
        t.node_ = std::make_shared<Node<S>>();
        t.node_->shape = node_->shape;
        t.node_->value = node_->value;
        return t;
    }

    std::shared_ptr<Node<S>>& node() { return node_; }
    const std::shared_ptr<Node<S>>& node() const { return node_; }

private:
    std::shared_ptr<Node<S>> node_;
};

// Trainable tensor with a persistent gradient accumulator.
template <class S>
struct Parameter {
    std::string name;
    Tensor<S> value;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, Tensor<S> v, bool train = true)
        : name(std::move(n)), value(std::move(v)), trainable(train) {
        value.set_needs_grad(trainable);
    }
    std::vector<S>& grad() { return value.grad(); }
    void zero_grad() { value.zero_grad(); }
};

template <class S>
void check_finite(const std::vector<S>& v, const char* op) {
    for (const S x : v) {
        if (!std::isfinite(static_cast<double>(x)))
            throw numeric_error(std::string(op) + ": non-finite value produced");
    }
}

// ---- op set ----------------------------------------------------------

// Cross-correlation. input (N,Cin,H,W), weight (Cout,Cin,kh,kw), bias (Cout).
// Output spatial size: Ho = (H + 2*padding - kh) / stride + 1 (floor).
template <class S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& weight, const Tensor<S>& bias,
                 int stride = 1, int padding = 0);

template <class S>
Tensor<S> conv2d(const Tensor<S>& input, const Parameter<S>& weight, const Parameter<S>& bias,
                 int stride = 1, int padding = 0) {
    return conv2d(input, weight.value, bias.value, stride, padding);
}

template <class S>
Tensor<S> relu(const Tensor<S>& input);

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);

// Bilinear upsampling by an integer factor (half-pixel centers, edges clamped).
template <class S>
Tensor<S> upsample_bilinear(const Tensor<S>& input, int factor);

// Strided factor x factor average pooling; H and W must be divisible by factor.
template <class S>
Tensor<S> downsample_stride(const Tensor<S>& input, int factor);

// mean((pred - target)^2) * weight, accumulated in double.
template <class S>
Tensor<S> mse(const Tensor<S>& pred, const Tensor<S>& target, double weight = 1.0);

// Masked variant for NCHW: mask has N*C entries; masked-out channels are
// excluded from numerator and denominator. All channels masked -> 0.
template <class S>
Tensor<S> mse_masked(const Tensor<S>& pred, const Tensor<S>& target,
                     const std::vector<uint8_t>& mask, double weight = 1.0);

// Reverse-mode sweep from a scalar loss. Gradients accumulate until reset.
template <class S>
void backward(Tensor<S>& loss);

}  // namespace hintpose::nn
