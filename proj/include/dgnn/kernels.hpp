#ifndef DGNN_KERNELS_HPP
#define DGNN_KERNELS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

// Dense/sparse inner loops shared by the autodiff ops and the metrics.
//
// Every kernel comes in two flavors: a *_serial reference and an OpenMP
// version used by default. The parallel versions only split loops whose
// output elements each have a fixed serial reduction order, so results are
// bit-identical to the reference for any thread count. Reductions that
// cross the parallel dimension (pairwise distance sums) go through per-index
// partial buffers combined in index order.

namespace dgnn::kernels {

// Work size below which the OpenMP versions stay on one thread.
inline constexpr std::int64_t kParallelCutoff = 1 << 15;

// ---------------------------------------------------------------- gemm ----

/// C[m x n] = A[m x k] * B[k x n]; accumulates into C when acc is true.
template <class T>
void gemm_nn_serial(const T* a, const T* b, T* c, int m, int k, int n, bool acc = false) {
    for (int i = 0; i < m; ++i) {
        T* ci = c + static_cast<std::int64_t>(i) * n;
        if (!acc) std::fill(ci, ci + n, T(0));
        const T* ai = a + static_cast<std::int64_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const T aip = ai[p];
            if (aip == T(0)) continue;
            const T* bp = b + static_cast<std::int64_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

template <class T>
void gemm_nn(const T* a, const T* b, T* c, int m, int k, int n, bool acc = false) {
    const std::int64_t work = static_cast<std::int64_t>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParallelCutoff)
    for (int i = 0; i < m; ++i) {
        T* ci = c + static_cast<std::int64_t>(i) * n;
        if (!acc) std::fill(ci, ci + n, T(0));
        const T* ai = a + static_cast<std::int64_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const T aip = ai[p];
            if (aip == T(0)) continue;
            const T* bp = b + static_cast<std::int64_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

/// C[k x n] = A[m x k]^T * B[m x n]; row p of C reduces over rows of A/B
/// in ascending order.
template <class T>
void gemm_tn_serial(const T* a, const T* b, T* c, int m, int k, int n, bool acc = false) {
    for (int p = 0; p < k; ++p) {
        T* cp = c + static_cast<std::int64_t>(p) * n;
        if (!acc) std::fill(cp, cp + n, T(0));
        for (int i = 0; i < m; ++i) {
            const T aip = a[static_cast<std::int64_t>(i) * k + p];
            if (aip == T(0)) continue;
            const T* bi = b + static_cast<std::int64_t>(i) * n;
            for (int j = 0; j < n; ++j) cp[j] += aip * bi[j];
        }
    }
}

template <class T>
void gemm_tn(const T* a, const T* b, T* c, int m, int k, int n, bool acc = false) {
    const std::int64_t work = static_cast<std::int64_t>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParallelCutoff)
    for (int p = 0; p < k; ++p) {
        T* cp = c + static_cast<std::int64_t>(p) * n;
        if (!acc) std::fill(cp, cp + n, T(0));
        for (int i = 0; i < m; ++i) {
            const T aip = a[static_cast<std::int64_t>(i) * k + p];
            if (aip == T(0)) continue;
            const T* bi = b + static_cast<std::int64_t>(i) * n;
            for (int j = 0; j < n; ++j) cp[j] += aip * bi[j];
        }
    }
}

/// C[m x p] = A[m x n] * B[p x n]^T. B is transposed into a scratch buffer
/// so the multiply reuses the vectorizing ikj loop (row-dot products defeat
/// strict-FP vectorization); each output still reduces over ascending j.
template <class T>
void gemm_nt_serial(const T* a, const T* b, T* c, int m, int n, int p, bool acc = false) {
    std::vector<T> bt(static_cast<std::size_t>(n) * p);
    for (int q = 0; q < p; ++q)
        for (int j = 0; j < n; ++j)
            bt[static_cast<std::size_t>(j) * p + q] = b[static_cast<std::size_t>(q) * n + j];
    gemm_nn_serial(a, bt.data(), c, m, n, p, acc);
}

template <class T>
void gemm_nt(const T* a, const T* b, T* c, int m, int n, int p, bool acc = false) {
    std::vector<T> bt(static_cast<std::size_t>(n) * p);
#pragma omp parallel for schedule(static) if (static_cast<std::int64_t>(n) * p > kParallelCutoff)
    for (int q = 0; q < p; ++q)
        for (int j = 0; j < n; ++j)
            bt[static_cast<std::size_t>(j) * p + q] = b[static_cast<std::size_t>(q) * n + j];
    gemm_nn(a, bt.data(), c, m, n, p, acc);
}

// ---------------------------------------------------------------- spmm ----

/// Y[n x d] = M * X for a CSR matrix M with double-typed values.
/// Row v reduces over its CSR entries in stored (ascending-column) order.
template <class T>
void spmm_csr_serial(const int* row_ptr, const int* col, const double* val, const T* x, T* y,
                     int n, int d, bool acc = false) {
    for (int v = 0; v < n; ++v) {
        T* yv = y + static_cast<std::int64_t>(v) * d;
        if (!acc) std::fill(yv, yv + d, T(0));
        for (int idx = row_ptr[v]; idx < row_ptr[v + 1]; ++idx) {
            const T w = static_cast<T>(val[idx]);
            const T* xu = x + static_cast<std::int64_t>(col[idx]) * d;
            for (int j = 0; j < d; ++j) yv[j] += w * xu[j];
        }
    }
}

template <class T>
void spmm_csr(const int* row_ptr, const int* col, const double* val, const T* x, T* y,
              int n, int d, bool acc = false) {
    const std::int64_t work = static_cast<std::int64_t>(row_ptr[n]) * d;
#pragma omp parallel for schedule(static) if (work > kParallelCutoff)
    for (int v = 0; v < n; ++v) {
        T* yv = y + static_cast<std::int64_t>(v) * d;
        if (!acc) std::fill(yv, yv + d, T(0));
        for (int idx = row_ptr[v]; idx < row_ptr[v + 1]; ++idx) {
            const T w = static_cast<T>(val[idx]);
            const T* xu = x + static_cast<std::int64_t>(col[idx]) * d;
            for (int j = 0; j < d; ++j) yv[j] += w * xu[j];
        }
    }
}

// --------------------------------------------------------------- softmax --

/// Row-wise softmax with max subtraction.
template <class T>
void row_softmax_serial(const T* in, T* out, int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        const T* x = in + static_cast<std::int64_t>(i) * cols;
        T* y = out + static_cast<std::int64_t>(i) * cols;
        T mx = x[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
        T sum = 0;
        for (int j = 0; j < cols; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        const T inv = T(1) / sum;
        for (int j = 0; j < cols; ++j) y[j] *= inv;
    }
}

template <class T>
void row_softmax(const T* in, T* out, int rows, int cols) {
    const std::int64_t work = static_cast<std::int64_t>(rows) * cols;
#pragma omp parallel for schedule(static) if (work > kParallelCutoff)
    for (int i = 0; i < rows; ++i) {
        const T* x = in + static_cast<std::int64_t>(i) * cols;
        T* y = out + static_cast<std::int64_t>(i) * cols;
        T mx = x[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
        T sum = 0;
        for (int j = 0; j < cols; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        const T inv = T(1) / sum;
        for (int j = 0; j < cols; ++j) y[j] *= inv;
    }
}

// --------------------------------------------------------------- moments --

/// Per-column mean and population variance of X[n x d]. Columns reduce over
/// rows in ascending order; parallel split is across column blocks.
template <class T>
void colwise_moments_serial(const T* x, int n, int d, T* mean, T* var) {
    std::fill(mean, mean + d, T(0));
    std::fill(var, var + d, T(0));
    for (int i = 0; i < n; ++i) {
        const T* xi = x + static_cast<std::int64_t>(i) * d;
        for (int j = 0; j < d; ++j) {
            mean[j] += xi[j];
            var[j] += xi[j] * xi[j];
        }
    }
    const T inv = T(1) / static_cast<T>(n);
    for (int j = 0; j < d; ++j) {
        mean[j] *= inv;
        var[j] = var[j] * inv - mean[j] * mean[j];
        if (var[j] < T(0)) var[j] = T(0);
    }
}

template <class T>
void colwise_moments(const T* x, int n, int d, T* mean, T* var) {
    constexpr int kBlock = 128;
    const int nblocks = (d + kBlock - 1) / kBlock;
    const std::int64_t work = static_cast<std::int64_t>(n) * d;
#pragma omp parallel for schedule(static) if (work > kParallelCutoff)
    for (int blk = 0; blk < nblocks; ++blk) {
        const int j0 = blk * kBlock;
        const int j1 = std::min(d, j0 + kBlock);
        for (int j = j0; j < j1; ++j) {
            mean[j] = T(0);
            var[j] = T(0);
        }
        for (int i = 0; i < n; ++i) {
            const T* xi = x + static_cast<std::int64_t>(i) * d;
            for (int j = j0; j < j1; ++j) {
                mean[j] += xi[j];
                var[j] += xi[j] * xi[j];
            }
        }
        const T inv = T(1) / static_cast<T>(n);
        for (int j = j0; j < j1; ++j) {
            mean[j] *= inv;
            var[j] = var[j] * inv - mean[j] * mean[j];
            if (var[j] < T(0)) var[j] = T(0);
        }
    }
}

// ------------------------------------------------------ pairwise distance --

inline double l2_distance(const double* a, const double* b, int d) {
    double s = 0;
    for (int j = 0; j < d; ++j) {
        const double diff = a[j] - b[j];
        s += diff * diff;
    }
    return std::sqrt(s);
}

/// Sum over u in `left` of sum over v in `right` of ||H[u]-H[v]||_2.
/// The outer sum combines per-u partials in index order.
inline double pair_distance_sum_serial(const double* h, int d, const std::vector<int>& left,
                                       const std::vector<int>& right) {
    std::vector<double> partial(left.size());
    for (std::size_t u = 0; u < left.size(); ++u) {
        const double* hu = h + static_cast<std::int64_t>(left[u]) * d;
        double s = 0;
        for (int v : right) s += l2_distance(hu, h + static_cast<std::int64_t>(v) * d, d);
        partial[u] = s;
    }
    double total = 0;
    for (double p : partial) total += p;
    return total;
}

inline double pair_distance_sum(const double* h, int d, const std::vector<int>& left,
                                const std::vector<int>& right) {
    std::vector<double> partial(left.size());
    const std::int64_t work = static_cast<std::int64_t>(left.size()) * right.size() * d;
    const int m = static_cast<int>(left.size());
#pragma omp parallel for schedule(static) if (work > kParallelCutoff)
    for (int u = 0; u < m; ++u) {
        const double* hu = h + static_cast<std::int64_t>(left[u]) * d;
        double s = 0;
        for (int v : right) s += l2_distance(hu, h + static_cast<std::int64_t>(v) * d, d);
        partial[u] = s;
    }
    double total = 0;
    for (double p : partial) total += p;
    return total;
}

/// Distance sum over an explicit (u,v) pair list, reduced in list order.
inline double pair_list_distance_sum(const double* h, int d,
                                     const std::vector<std::pair<int, int>>& pairs) {
    std::vector<double> partial(pairs.size());
    const std::int64_t work = static_cast<std::int64_t>(pairs.size()) * d;
    const int m = static_cast<int>(pairs.size());
#pragma omp parallel for schedule(static) if (work > kParallelCutoff)
    for (int p = 0; p < m; ++p) {
        partial[p] = l2_distance(h + static_cast<std::int64_t>(pairs[p].first) * d,
                                 h + static_cast<std::int64_t>(pairs[p].second) * d, d);
    }
    double total = 0;
    for (double v : partial) total += v;
    return total;
}

}  // namespace dgnn::kernels

#endif
