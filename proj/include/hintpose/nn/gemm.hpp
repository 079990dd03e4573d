#pragma once

#include <cstddef>

namespace hintpose::nn {

// C(M x N) += A(M x K) * B(K x N), row-major, no aliasing.
// Loop order m-k-n keeps the inner loop contiguous in B and C so the
// compiler can vectorize it.
template <class S>
inline void gemm_acc(const S* A, const S* B, S* C, int M, int K, int N) {
    for (int m = 0; m < M; ++m) {
        const S* arow = A + static_cast<size_t>(m) * K;
        S* crow = C + static_cast<size_t>(m) * N;
        for (int k = 0; k < K; ++k) {
            const S a = arow[k];
            if (a == S(0)) continue;
            const S* brow = B + static_cast<size_t>(k) * N;
            for (int n = 0; n < N; ++n) crow[n] += a * brow[n];
        }
    }
}

// C(M x N) += A(M x K) * B(N x K)^T, i.e. C[m,n] += dot(A[m,:], B[n,:]).
template <class S>
inline void gemm_acc_bt(const S* A, const S* B, S* C, int M, int K, int N) {
    for (int m = 0; m < M; ++m) {
        const S* arow = A + static_cast<size_t>(m) * K;
        S* crow = C + static_cast<size_t>(m) * N;
        for (int n = 0; n < N; ++n) {
            const S* brow = B + static_cast<size_t>(n) * K;
            S acc = S(0);
            for (int k = 0; k < K; ++k) acc += arow[k] * brow[k];
            crow[n] += acc;
        }
    }
}

// C(M x N) += A(K x M)^T * B(K x N).
template <class S>
inline void gemm_acc_at(const S* A, const S* B, S* C, int M, int K, int N) {
    for (int k = 0; k < K; ++k) {
        const S* arow = A + static_cast<size_t>(k) * M;
        const S* brow = B + static_cast<size_t>(k) * N;
        for (int m = 0; m < M; ++m) {
            const S a = arow[m];
            if (a == S(0)) continue;
            S* crow = C + static_cast<size_t>(m) * N;
            for (int n = 0; n < N; ++n) crow[n] += a * brow[n];
        }
    }
}

}  // namespace hintpose::nn
