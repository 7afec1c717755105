// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

// Dense inner loops shared by the differentiable ops. All matrices are
// row-major with explicit leading dimensions; every routine accumulates into
// its output (C += ...), callers zero it first when needed.

#pragma once

#include <cstddef>

namespace gcbase::kernels {

template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  T tail = T(0);
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <typename T>
inline T sum(const T* a, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l];
  T tail = T(0);
  for (; i < n; ++i) tail += a[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <typename T>
inline void axpy(T alpha, const T* __restrict x, T* __restrict y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// C[M x N] += A[M x K] * B[K x N]
template <typename T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C) {
  for (std::size_t i = 0; i < M; ++i) {
    T* c = C + i * N;
    const T* a = A + i * K;
    for (std::size_t p = 0; p < K; ++p) {
      axpy(a[p], B + p * N, c, N);
    }
  }
}

// C[M x N] += A^T * B, with A stored [K x M] and B [K x N]
template <typename T>
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C) {
  for (std::size_t p = 0; p < K; ++p) {
    const T* a = A + p * M;
    const T* b = B + p * N;
    for (std::size_t i = 0; i < M; ++i) axpy(a[i], b, C + i * N, N);
  }
}

// C[M x N] += A * B^T, with A stored [M x K] and B [N x K]
template <typename T>
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C) {
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < N; ++j) C[i * N + j] += dot(A + i * K, B + j * K, K);
}

}  // namespace gcbase::kernels
