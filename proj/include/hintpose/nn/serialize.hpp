#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <vector>

#include "hintpose/nn/tensor.hpp"

namespace hintpose::nn {

// HPT1 tensor dump: magic "HPT1", u32 rank, u32 dims[rank], f32 payload,
// row-major, little-endian. Shared by checkpoints and heatmap dumps.

inline void write_hpt1(std::ostream& os, const Shape& shape, const float* data) {
    os.write("HPT1", 4);
    uint32_t rank = static_cast<uint32_t>(shape.rank);
    os.write(reinterpret_cast<const char*>(&rank), 4);
    for (int i = 0; i < shape.rank; ++i) {
        uint32_t d = static_cast<uint32_t>(shape.d[i]);
        os.write(reinterpret_cast<const char*>(&d), 4);
    }
    os.write(reinterpret_cast<const char*>(data), shape.numel() * sizeof(float));
}

template <class S>
void write_hpt1(std::ostream& os, const Tensor<S>& t) {
    if constexpr (std::is_same_v<S, float>) {
        write_hpt1(os, t.shape(), t.values().data());
    } else {
        std::vector<float> tmp(t.values().begin(), t.values().end());
        write_hpt1(os, t.shape(), tmp.data());
    }
}

inline std::vector<float> read_hpt1(std::istream& is, Shape& shape) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "HPT1", 4) != 0)
        throw data_error("HPT1: bad magic");
    uint32_t rank = 0;
    is.read(reinterpret_cast<char*>(&rank), 4);
    if (!is || rank > 4) throw data_error("HPT1: bad rank");
    shape = Shape{};
    shape.rank = static_cast<int>(rank);
    for (uint32_t i = 0; i < rank; ++i) {
        uint32_t d = 0;
        is.read(reinterpret_cast<char*>(&d), 4);
        if (!is || d == 0) throw data_error("HPT1: bad dimension");
        shape.d[i] = static_cast<int>(d);
    }
    std::vector<float> data(static_cast<size_t>(shape.numel()));
    is.read(reinterpret_cast<char*>(data.data()), data.size() * sizeof(float));
    if (!is) throw data_error("HPT1: truncated payload");
    return data;
}

}  // namespace hintpose::nn
