#pragma once

#include <algorithm>
#include <cstdint>

// Dense matrix kernels. All loops have a fixed evaluation order per output
// element, so results are bitwise identical for any thread count.

namespace facetok {

inline constexpr int64_t kParallelFlops = 1 << 16;

// C[M,N] = A[M,K] * B[K,N]
template <typename T>
void mm_nn(const T* a, const T* b, T* c, int m, int k, int n) {
  const int64_t work = int64_t(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParallelFlops)
  for (int i = 0; i < m; ++i) {
    T* ci = c + int64_t(i) * n;
    std::fill(ci, ci + n, T(0));
    const T* ai = a + int64_t(i) * k;
    for (int p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* bp = b + int64_t(p) * n;
#pragma omp simd
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[M,N] += A[M,K] * B[K,N]
template <typename T>
void mm_nn_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  const int64_t work = int64_t(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParallelFlops)
  for (int i = 0; i < m; ++i) {
    T* ci = c + int64_t(i) * n;
    const T* ai = a + int64_t(i) * k;
    for (int p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* bp = b + int64_t(p) * n;
#pragma omp simd
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[M,N] = A[M,K] * B[N,K]^T
template <typename T>
void mm_nt(const T* a, const T* b, T* c, int m, int k, int n) {
  const int64_t work = int64_t(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParallelFlops)
  for (int i = 0; i < m; ++i) {
    const T* ai = a + int64_t(i) * k;
    T* ci = c + int64_t(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* bj = b + int64_t(j) * k;
      T acc = T(0);
#pragma omp simd reduction(+ : acc)
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = acc;
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
template <typename T>
void mm_nt_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  const int64_t work = int64_t(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParallelFlops)
  for (int i = 0; i < m; ++i) {
    const T* ai = a + int64_t(i) * k;
    T* ci = c + int64_t(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* bj = b + int64_t(j) * k;
      T acc = T(0);
#pragma omp simd reduction(+ : acc)
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

// C[K,N] += A[M,K]^T * B[M,N].  Gradient accumulation for weight matrices;
// parallel threads own disjoint rows of C.
template <typename T>
void mm_tn_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  const int64_t work = int64_t(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParallelFlops)
  for (int p = 0; p < k; ++p) {
    T* cp = c + int64_t(p) * n;
    for (int i = 0; i < m; ++i) {
      const T av = a[int64_t(i) * k + p];
      const T* bi = b + int64_t(i) * n;
#pragma omp simd
      for (int j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

}  // namespace facetok
