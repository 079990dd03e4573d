#include "hintpose/nn/tensor.hpp"

#include <algorithm>
#include <cstring>

#include "hintpose/nn/gemm.hpp"

namespace hintpose::nn {

namespace {
thread_local bool g_autograd_enabled = true;
}

bool autograd_enabled() { return g_autograd_enabled; }
void set_autograd_enabled(bool on) { g_autograd_enabled = on; }

namespace {

template <class S>
void require_nonempty(const Tensor<S>& t, const char* op) {
    if (!t.defined() || t.numel() <= 0)
        throw config_error(std::string(op) + ": zero-size tensor rejected");
}

// col layout: (Cin*kh*kw) rows x (Ho*Wo) cols.
template <class S>
void im2col(const S* src, int Cin, int H, int W, int kh, int kw, int stride, int pad,
            int Ho, int Wo, S* col) {
    for (int c = 0; c < Cin; ++c) {
        const S* plane = src + static_cast<size_t>(c) * H * W;
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
                S* row = col + (static_cast<size_t>(c) * kh * kw + ki * kw + kj) *
                                   (static_cast<size_t>(Ho) * Wo);
                for (int oh = 0; oh < Ho; ++oh) {
                    const int ih = oh * stride + ki - pad;
                    S* dst = row + static_cast<size_t>(oh) * Wo;
                    if (ih < 0 || ih >= H) {
                        std::fill(dst, dst + Wo, S(0));
                        continue;
                    }
                    const S* srow = plane + static_cast<size_t>(ih) * W;
                    for (int ow = 0; ow < Wo; ++ow) {
                        const int iw = ow * stride + kj - pad;
                        dst[ow] = (iw >= 0 && iw < W) ? srow[iw] : S(0);
                    }
                }
            }
        }
    }
}

template <class S>
void col2im_acc(const S* col, int Cin, int H, int W, int kh, int kw, int stride, int pad,
                int Ho, int Wo, S* dst) {
    for (int c = 0; c < Cin; ++c) {
        S* plane = dst + static_cast<size_t>(c) * H * W;
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
                const S* row = col + (static_cast<size_t>(c) * kh * kw + ki * kw + kj) *
                                         (static_cast<size_t>(Ho) * Wo);
                for (int oh = 0; oh < Ho; ++oh) {
                    const int ih = oh * stride + ki - pad;
                    if (ih < 0 || ih >= H) continue;
                    const S* srow = row + static_cast<size_t>(oh) * Wo;
                    S* drow = plane + static_cast<size_t>(ih) * W;
                    for (int ow = 0; ow < Wo; ++ow) {
                        const int iw = ow * stride + kj - pad;
                        if (iw >= 0 && iw < W) drow[iw] += srow[ow];
                    }
                }
            }
        }
    }
}

template <class S>
Tensor<S> make_result(const Shape& shape, std::vector<S> value, const char* op,
                      std::vector<std::shared_ptr<Node<S>>> parents,
                      std::function<void(Node<S>&)> backward_fn) {
    check_finite(value, op);
    Tensor<S> out = Tensor<S>::from_data(shape, std::move(value));
    bool record = false;
    if (g_autograd_enabled) {
        for (const auto& p : parents)
            if (p->needs_grad) record = true;
    }
    if (record) {
        out.node()->needs_grad = true;
        out.node()->parents = std::move(parents);
        out.node()->backward_fn = std::move(backward_fn);
    }
    return out;
}

}  // namespace

template <class S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& weight, const Tensor<S>& bias,
                 int stride, int padding) {
    require_nonempty(input, "conv2d");
    require_nonempty(weight, "conv2d");
    require_nonempty(bias, "conv2d");
    const Shape& xs = input.shape();
    const Shape& ws = weight.shape();
    if (xs.rank != 4 || ws.rank != 4)
        throw config_error("conv2d: input and weight must be rank-4, got " + xs.str() + " and " +
                           ws.str());
    if (stride < 1) throw config_error("conv2d: stride must be >= 1");
    if (padding < 0) throw config_error("conv2d: padding must be >= 0");
    const int N = xs.d[0], Cin = xs.d[1], H = xs.d[2], W = xs.d[3];
    const int Cout = ws.d[0], kh = ws.d[2], kw = ws.d[3];
    if (ws.d[1] != Cin)
        throw config_error("conv2d: weight expects " + std::to_string(ws.d[1]) +
                           " input channels, input has " + std::to_string(Cin));
    if (bias.shape().rank != 1 || bias.shape().d[0] != Cout)
        throw config_error("conv2d: bias must be rank-1 of size Cout");
    if (kh > H + 2 * padding || kw > W + 2 * padding)
        throw config_error("conv2d: kernel does not fit padded input");

    const int Ho = (H + 2 * padding - kh) / stride + 1;
    const int Wo = (W + 2 * padding - kw) / stride + 1;
    const int K = Cin * kh * kw;
    const int P = Ho * Wo;
    const bool fast1x1 = (kh == 1 && kw == 1 && stride == 1 && padding == 0);

    auto xnode = input.node();
    auto wnode = weight.node();
    auto bnode = bias.node();
    const bool record = g_autograd_enabled &&
                        (xnode->needs_grad || wnode->needs_grad || bnode->needs_grad);
    // The column matrix is kept for the weight gradient; 1x1 convs read the
    // input directly.
    const bool keep_col = !fast1x1 && record;

    std::vector<S> value(static_cast<size_t>(N) * Cout * P);
    auto colbuf = std::make_shared<std::vector<S>>();
    std::vector<S> scratch;
    if (keep_col)
        colbuf->resize(static_cast<size_t>(N) * K * P);
    else if (!fast1x1)
        scratch.resize(static_cast<size_t>(K) * P);

    const S* wptr = wnode->value.data();
    const S* bptr = bnode->value.data();
    for (int n = 0; n < N; ++n) {
        const S* xn = xnode->value.data() + static_cast<size_t>(n) * Cin * H * W;
        const S* col = xn;
        if (!fast1x1) {
            S* cdst = keep_col ? colbuf->data() + static_cast<size_t>(n) * K * P : scratch.data();
            im2col(xn, Cin, H, W, kh, kw, stride, padding, Ho, Wo, cdst);
            col = cdst;
        }
        S* on = value.data() + static_cast<size_t>(n) * Cout * P;
        for (int co = 0; co < Cout; ++co)
            std::fill(on + static_cast<size_t>(co) * P, on + static_cast<size_t>(co + 1) * P,
                      bptr[co]);
        gemm_acc(wptr, col, on, Cout, K, P);
    }

    auto backward_fn = [xnode, wnode, bnode, colbuf, N, Cin, H, W, Cout, kh, kw, stride, padding,
                        Ho, Wo, K, P, fast1x1](Node<S>& self) {
        const S* g = self.grad.data();
        if (bnode->needs_grad) {
            bnode->ensure_grad();
            for (int n = 0; n < N; ++n)
                for (int co = 0; co < Cout; ++co) {
                    const S* gp = g + (static_cast<size_t>(n) * Cout + co) * P;
                    S acc = S(0);
                    for (int p = 0; p < P; ++p) acc += gp[p];
                    bnode->grad[co] += acc;
                }
        }
        if (wnode->needs_grad) {
            wnode->ensure_grad();
            // dW = dOut * col^T, with col transposed up front so the inner
            // GEMM loop stays contiguous (a plain dot-product form does not
            // vectorize without reassociation).
            std::vector<S> colt(static_cast<size_t>(P) * K);
            for (int n = 0; n < N; ++n) {
                const S* col = fast1x1
                                   ? xnode->value.data() + static_cast<size_t>(n) * Cin * H * W
                                   : colbuf->data() + static_cast<size_t>(n) * K * P;
                for (int k = 0; k < K; ++k)
                    for (int p = 0; p < P; ++p)
                        colt[static_cast<size_t>(p) * K + k] = col[static_cast<size_t>(k) * P + p];
                gemm_acc(g + static_cast<size_t>(n) * Cout * P, colt.data(), wnode->grad.data(),
                         Cout, P, K);
            }
        }
        if (xnode->needs_grad) {
            xnode->ensure_grad();
            const S* wptr = wnode->value.data();
            if (fast1x1) {
                for (int n = 0; n < N; ++n)
                    gemm_acc_at(wptr, g + static_cast<size_t>(n) * Cout * P,
                                xnode->grad.data() + static_cast<size_t>(n) * Cin * H * W, K,
                                Cout, P);
            } else {
                std::vector<S> dcol(static_cast<size_t>(K) * P);
                for (int n = 0; n < N; ++n) {
                    std::fill(dcol.begin(), dcol.end(), S(0));
                    gemm_acc_at(wptr, g + static_cast<size_t>(n) * Cout * P, dcol.data(), K,
                                Cout, P);
                    col2im_acc(dcol.data(), Cin, H, W, kh, kw, stride, padding, Ho, Wo,
                               xnode->grad.data() + static_cast<size_t>(n) * Cin * H * W);
                }
            }
        }
    };

    return make_result<S>(Shape{N, Cout, Ho, Wo}, std::move(value), "conv2d",
                       {xnode, wnode, bnode}, std::move(backward_fn));
}

template <class S>
Tensor<S> relu(const Tensor<S>& input) {
    require_nonempty(input, "relu");
    auto xnode = input.node();
    std::vector<S> value(xnode->value.size());
    for (size_t i = 0; i < value.size(); ++i) value[i] = xnode->value[i] > S(0) ? xnode->value[i] : S(0);

    auto backward_fn = [xnode](Node<S>& self) {
        xnode->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
            if (xnode->value[i] > S(0)) xnode->grad[i] += self.grad[i];
    };
    return make_result<S>(input.shape(), std::move(value), "relu", {xnode}, std::move(backward_fn));
}

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    require_nonempty(a, "add");
    require_nonempty(b, "add");
    if (a.shape() != b.shape())
        throw config_error("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    auto anode = a.node();
    auto bnode = b.node();
    std::vector<S> value(anode->value.size());
    for (size_t i = 0; i < value.size(); ++i) value[i] = anode->value[i] + bnode->value[i];

    auto backward_fn = [anode, bnode](Node<S>& self) {
        if (anode->needs_grad) {
            anode->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) anode->grad[i] += self.grad[i];
        }
        if (bnode->needs_grad) {
            bnode->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) bnode->grad[i] += self.grad[i];
        }
    };
    return make_result<S>(a.shape(), std::move(value), "add", {anode, bnode}, std::move(backward_fn));
}

template <class S>
Tensor<S> upsample_bilinear(const Tensor<S>& input, int factor) {
    require_nonempty(input, "upsample_bilinear");
    if (factor < 1) throw config_error("upsample_bilinear: factor must be >= 1");
    const Shape& xs = input.shape();
    if (xs.rank != 4) throw config_error("upsample_bilinear: input must be rank-4");
    const int N = xs.d[0], C = xs.d[1], H = xs.d[2], W = xs.d[3];
    const int Ho = H * factor, Wo = W * factor;

    // Half-pixel-center sampling tables, shared by forward and backward.
    auto make_table = [factor](int in_dim, int out_dim, std::vector<int>& i0, std::vector<int>& i1,
                               std::vector<S>& w1) {
        i0.resize(out_dim);
        i1.resize(out_dim);
        w1.resize(out_dim);
        for (int o = 0; o < out_dim; ++o) {
            double s = (o + 0.5) / factor - 0.5;
            int lo = static_cast<int>(std::floor(s));
            double f = s - lo;
            int hi = lo + 1;
            if (lo < 0) lo = 0;
            if (hi < 0) hi = 0;
            if (lo > in_dim - 1) lo = in_dim - 1;
            if (hi > in_dim - 1) hi = in_dim - 1;
            i0[o] = lo;
            i1[o] = hi;
            w1[o] = static_cast<S>(f);
        }
    };
    auto y0 = std::make_shared<std::vector<int>>();
    auto y1 = std::make_shared<std::vector<int>>();
    auto wy = std::make_shared<std::vector<S>>();
    auto x0 = std::make_shared<std::vector<int>>();
    auto x1 = std::make_shared<std::vector<int>>();
    auto wx = std::make_shared<std::vector<S>>();
    make_table(H, Ho, *y0, *y1, *wy);
    make_table(W, Wo, *x0, *x1, *wx);

    auto xnode = input.node();
    std::vector<S> value(static_cast<size_t>(N) * C * Ho * Wo);
    for (int nc = 0; nc < N * C; ++nc) {
        const S* src = xnode->value.data() + static_cast<size_t>(nc) * H * W;
        S* dst = value.data() + static_cast<size_t>(nc) * Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
            const S* r0 = src + static_cast<size_t>((*y0)[oy]) * W;
            const S* r1 = src + static_cast<size_t>((*y1)[oy]) * W;
            const S fy = (*wy)[oy];
            S* drow = dst + static_cast<size_t>(oy) * Wo;
            for (int ox = 0; ox < Wo; ++ox) {
                const S fx = (*wx)[ox];
                const S top = r0[(*x0)[ox]] * (S(1) - fx) + r0[(*x1)[ox]] * fx;
                const S bot = r1[(*x0)[ox]] * (S(1) - fx) + r1[(*x1)[ox]] * fx;
                drow[ox] = top * (S(1) - fy) + bot * fy;
            }
        }
    }

    auto backward_fn = [xnode, y0, y1, wy, x0, x1, wx, N, C, H, W, Ho, Wo](Node<S>& self) {
        xnode->ensure_grad();
        for (int nc = 0; nc < N * C; ++nc) {
            S* dsrc = xnode->grad.data() + static_cast<size_t>(nc) * H * W;
            const S* g = self.grad.data() + static_cast<size_t>(nc) * Ho * Wo;
            for (int oy = 0; oy < Ho; ++oy) {
                const S fy = (*wy)[oy];
                S* g0 = dsrc + static_cast<size_t>((*y0)[oy]) * W;
                S* g1 = dsrc + static_cast<size_t>((*y1)[oy]) * W;
                const S* grow = g + static_cast<size_t>(oy) * Wo;
                for (int ox = 0; ox < Wo; ++ox) {
                    const S fx = (*wx)[ox];
                    const S gv = grow[ox];
                    g0[(*x0)[ox]] += gv * (S(1) - fx) * (S(1) - fy);
                    g0[(*x1)[ox]] += gv * fx * (S(1) - fy);
                    g1[(*x0)[ox]] += gv * (S(1) - fx) * fy;
                    g1[(*x1)[ox]] += gv * fx * fy;
                }
            }
        }
    };
    return make_result<S>(Shape{N, C, Ho, Wo}, std::move(value), "upsample_bilinear", {xnode},
                       std::move(backward_fn));
}

template <class S>
Tensor<S> downsample_stride(const Tensor<S>& input, int factor) {
    require_nonempty(input, "downsample_stride");
    if (factor < 1) throw config_error("downsample_stride: factor must be >= 1");
    const Shape& xs = input.shape();
    if (xs.rank != 4) throw config_error("downsample_stride: input must be rank-4");
    const int N = xs.d[0], C = xs.d[1], H = xs.d[2], W = xs.d[3];
    if (H % factor != 0 || W % factor != 0)
        throw config_error("downsample_stride: dims " + xs.str() + " not divisible by factor " +
                           std::to_string(factor));
    const int Ho = H / factor, Wo = W / factor;
    const S inv = S(1) / static_cast<S>(factor * factor);

    auto xnode = input.node();
    std::vector<S> value(static_cast<size_t>(N) * C * Ho * Wo);
    for (int nc = 0; nc < N * C; ++nc) {
        const S* src = xnode->value.data() + static_cast<size_t>(nc) * H * W;
        S* dst = value.data() + static_cast<size_t>(nc) * Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy)
            for (int ox = 0; ox < Wo; ++ox) {
                S acc = S(0);
                for (int ky = 0; ky < factor; ++ky) {
                    const S* row = src + static_cast<size_t>(oy * factor + ky) * W + ox * factor;
                    for (int kx = 0; kx < factor; ++kx) acc += row[kx];
                }
                dst[static_cast<size_t>(oy) * Wo + ox] = acc * inv;
            }
    }

    auto backward_fn = [xnode, N, C, H, W, Ho, Wo, factor, inv](Node<S>& self) {
        xnode->ensure_grad();
        for (int nc = 0; nc < N * C; ++nc) {
            S* dsrc = xnode->grad.data() + static_cast<size_t>(nc) * H * W;
            const S* g = self.grad.data() + static_cast<size_t>(nc) * Ho * Wo;
            for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                    const S gv = g[static_cast<size_t>(oy) * Wo + ox] * inv;
                    for (int ky = 0; ky < factor; ++ky) {
                        S* row = dsrc + static_cast<size_t>(oy * factor + ky) * W + ox * factor;
                        for (int kx = 0; kx < factor; ++kx) row[kx] += gv;
                    }
                }
        }
    };
    return make_result<S>(Shape{N, C, Ho, Wo}, std::move(value), "downsample_stride", {xnode},
                       std::move(backward_fn));
}

template <class S>
Tensor<S> mse(const Tensor<S>& pred, const Tensor<S>& target, double weight) {
    require_nonempty(pred, "mse");
    require_nonempty(target, "mse");
    if (pred.shape() != target.shape())
        throw config_error("mse: shape mismatch " + pred.shape().str() + " vs " +
                           target.shape().str());
    auto pnode = pred.node();
    auto tnode = target.node();
    const size_t n = pnode->value.size();
    double sum = 0.0;  // 64-bit accumulation regardless of S
    for (size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(pnode->value[i]) - static_cast<double>(tnode->value[i]);
        sum += d * d;
    }
    const double val = sum / static_cast<double>(n) * weight;

    auto backward_fn = [pnode, tnode, n, weight](Node<S>& self) {
        const S g = self.grad[0];
        const S scale = static_cast<S>(2.0 * weight / static_cast<double>(n)) * g;
        if (pnode->needs_grad) {
            pnode->ensure_grad();
            for (size_t i = 0; i < n; ++i)
                pnode->grad[i] += scale * (pnode->value[i] - tnode->value[i]);
        }
        if (tnode->needs_grad) {
            tnode->ensure_grad();
            for (size_t i = 0; i < n; ++i)
                tnode->grad[i] -= scale * (pnode->value[i] - tnode->value[i]);
        }
    };
    return make_result<S>(Shape{}, {static_cast<S>(val)}, "mse", {pnode, tnode},
                       std::move(backward_fn));
}

template <class S>
Tensor<S> mse_masked(const Tensor<S>& pred, const Tensor<S>& target,
                     const std::vector<uint8_t>& mask, double weight) {
    require_nonempty(pred, "mse_masked");
    require_nonempty(target, "mse_masked");
    if (pred.shape() != target.shape())
        throw config_error("mse_masked: shape mismatch " + pred.shape().str() + " vs " +
                           target.shape().str());
    const Shape& s = pred.shape();
    if (s.rank != 4) throw config_error("mse_masked: input must be rank-4");
    const int N = s.d[0], C = s.d[1];
    const size_t HW = static_cast<size_t>(s.d[2]) * s.d[3];
    if (mask.size() != static_cast<size_t>(N) * C)
        throw config_error("mse_masked: mask must have N*C entries");

    auto pnode = pred.node();
    auto tnode = target.node();
    size_t kept = 0;
    double sum = 0.0;
    for (int nc = 0; nc < N * C; ++nc) {
        if (!mask[nc]) continue;
        kept += HW;
        const S* p = pnode->value.data() + nc * HW;
        const S* t = tnode->value.data() + nc * HW;
        for (size_t i = 0; i < HW; ++i) {
            const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
            sum += d * d;
        }
    }
    if (kept == 0)
        return Tensor<S>::scalar(S(0));  // fully masked, caller flags the warning
    const double val = sum / static_cast<double>(kept) * weight;

    auto mcopy = std::make_shared<std::vector<uint8_t>>(mask);
    auto backward_fn = [pnode, tnode, mcopy, N, C, HW, kept, weight](Node<S>& self) {
        const S scale = static_cast<S>(2.0 * weight / static_cast<double>(kept)) * self.grad[0];
        for (int nc = 0; nc < N * C; ++nc) {
            if (!(*mcopy)[nc]) continue;
            const S* p = pnode->value.data() + nc * HW;
            const S* t = tnode->value.data() + nc * HW;
            if (pnode->needs_grad) {
                pnode->ensure_grad();
                S* gp = pnode->grad.data() + nc * HW;
                for (size_t i = 0; i < HW; ++i) gp[i] += scale * (p[i] - t[i]);
            }
            if (tnode->needs_grad) {
                tnode->ensure_grad();
                S* gt = tnode->grad.data() + nc * HW;
                for (size_t i = 0; i < HW; ++i) gt[i] -= scale * (p[i] - t[i]);
            }
        }
    };
    return make_result<S>(Shape{}, {static_cast<S>(val)}, "mse_masked", {pnode, tnode},
                       std::move(backward_fn));
}

template <class S>
void backward(Tensor<S>& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw usage_error("backward: loss must be a scalar");
    auto root = loss.node();

    // Post-order over the tape, iterative to survive deep hop graphs.
    std::vector<Node<S>*> order;
    std::vector<std::pair<Node<S>*, size_t>> stack;
    std::vector<Node<S>*> seen;
    auto visited = [&seen](Node<S>* n) {
        return std::find(seen.begin(), seen.end(), n) != seen.end();
    };
    stack.push_back({root.get(), 0});
    seen.push_back(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node<S>* p = node->parents[idx++].get();
            if (!visited(p)) {
                seen.push_back(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] += S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<S>* node = *it;
        if (node->needs_grad && node->backward_fn) {
            node->ensure_grad();
            node->backward_fn(*node);
        }
    }
}

#define HINTPOSE_INSTANTIATE(S)                                                              \
    template Tensor<S> conv2d<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, int, \
                                 int);                                                       \
    template Tensor<S> relu<S>(const Tensor<S>&);                                           \
    template Tensor<S> add<S>(const Tensor<S>&, const Tensor<S>&);                          \
    template Tensor<S> upsample_bilinear<S>(const Tensor<S>&, int);                         \
    template Tensor<S> downsample_stride<S>(const Tensor<S>&, int);                         \
    template Tensor<S> mse<S>(const Tensor<S>&, const Tensor<S>&, double);                  \
    template Tensor<S> mse_masked<S>(const Tensor<S>&, const Tensor<S>&,                    \
                                     const std::vector<uint8_t>&, double);                  \
    template void backward<S>(Tensor<S>&);

HINTPOSE_INSTANTIATE(float)
HINTPOSE_INSTANTIATE(double)

#undef HINTPOSE_INSTANTIATE

}  // namespace hintpose::nn
