#ifndef DGNN_OPS_HPP
#define DGNN_OPS_HPP

#include <cmath>
#include <string>
#include <vector>

#include "dgnn/csr.hpp"
#include "dgnn/error.hpp"
#include "dgnn/kernels.hpp"
#include "dgnn/rng.hpp"
#include "dgnn/tensor.hpp"

// Differentiable tensor operations. Each op computes its result eagerly and,
// when the tape is recording and some input requires a gradient, pushes a
// closure implementing the exact reverse rule. Closures capture tensors by
// handle, so saved activations live until the closure fires.

namespace dgnn::core {

template <class T>
inline std::string shape_str(const Tensor<T>& t) {
    return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

template <class T>
inline void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                         " differ");
}

/// C = A·B.
template <class T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dims of " + shape_str(a) + " and " + shape_str(b) +
                         " do not match");
    Tensor<T> out(a.rows(), b.cols());
    kernels::gemm_nn(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
    if (tape.recording() && (a.requires_grad() || b.requires_grad())) {
        out.set_requires_grad(true);
        tape.push([a, b, out]() mutable {
            const T* go = out.grad();
            if (a.requires_grad())
                kernels::gemm_nt(go, b.data(), a.grad(), a.rows(), b.cols(), a.cols(), true);
            if (b.requires_grad())
                kernels::gemm_tn(a.data(), go, b.grad(), a.rows(), a.cols(), b.cols(), true);
        });
    }
    debug_check_finite(out, "matmul");
    return out;
}

/// C = A + B (same shape).
template <class T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "add");
    Tensor<T> out(a.rows(), a.cols());
    const std::int64_t n = a.size();
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    if (tape.recording() && (a.requires_grad() || b.requires_grad())) {
        out.set_requires_grad(true);
        tape.push([a, b, out]() mutable {
            const T* go = out.grad();
            const std::int64_t m = out.size();
            if (a.requires_grad()) {
                T* ga = a.grad();
                for (std::int64_t i = 0; i < m; ++i) ga[i] += go[i];
            }
            if (b.requires_grad()) {
                T* gb = b.grad();
                for (std::int64_t i = 0; i < m; ++i) gb[i] += go[i];
            }
        });
    }
    debug_check_finite(out, "add");
    return out;
}

/// C = A ∘ B (elementwise product).
template <class T>
Tensor<T> hadamard(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "hadamard");
    Tensor<T> out(a.rows(), a.cols());
    const std::int64_t n = a.size();
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
    if (tape.recording() && (a.requires_grad() || b.requires_grad())) {
        out.set_requires_grad(true);
        tape.push([a, b, out]() mutable {
            const T* go = out.grad();
            const std::int64_t m = out.size();
            if (a.requires_grad()) {
                T* ga = a.grad();
                const T* pb2 = b.data();
                for (std::int64_t i = 0; i < m; ++i) ga[i] += go[i] * pb2[i];
            }
            if (b.requires_grad()) {
                T* gb = b.grad();
                const T* pa2 = a.data();
                for (std::int64_t i = 0; i < m; ++i) gb[i] += go[i] * pa2[i];
            }
        });
    }
    debug_check_finite(out, "hadamard");
    return out;
}

/// C = s·A for a non-differentiated scalar s.
template <class T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T s) {
    Tensor<T> out(a.rows(), a.cols());
    const std::int64_t n = a.size();
    const T* pa = a.data();
    T* po = out.data();
    for (std::int64_t i = 0; i < n; ++i) po[i] = s * pa[i];
    if (tape.recording() && a.requires_grad()) {
        out.set_requires_grad(true);
        tape.push([a, out, s]() mutable {
            const T* go = out.grad();
            T* ga = a.grad();
            const std::int64_t m = out.size();
            for (std::int64_t i = 0; i < m; ++i) ga[i] += s * go[i];
        });
    }
    debug_check_finite(out, "scale");
    return out;
}

/// 1x1 sum of all elements.
template <class T>
Tensor<T> sum_all(Tape<T>& tape, const Tensor<T>& a) {
    Tensor<T> out(1, 1);
    const std::int64_t n = a.size();
    const T* pa = a.data();
    T s = 0;
    for (std::int64_t i = 0; i < n; ++i) s += pa[i];
    out.data()[0] = s;
    if (tape.recording() && a.requires_grad()) {
        out.set_requires_grad(true);
        tape.push([a, out]() mutable {
            const T g = out.grad()[0];
            T* ga = a.grad();
            const std::int64_t m = a.size();
            for (std::int64_t i = 0; i < m; ++i) ga[i] += g;
        });
    }
    return out;
}

/// Elementwise max(0, x); the subgradient at exactly 0 is taken as 1.
template <class T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& a) {
    Tensor<T> out(a.rows(), a.cols());
    const std::int64_t n = a.size();
    const T* pa = a.data();
    T* po = out.data();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] > T(0) ? pa[i] : T(0);
    if (tape.recording() && a.requires_grad()) {
        out.set_requires_grad(true);
        tape.push([a, out]() mutable {
            const T* go = out.grad();
            const T* pa2 = a.data();
            T* ga = a.grad();
            const std::int64_t m = a.size();
            for (std::int64_t i = 0; i < m; ++i)
                if (pa2[i] >= T(0)) ga[i] += go[i];
        });
    }
    debug_check_finite(out, "relu");
    return out;
}

/// Elementwise x < 0 ? slope·x : x; subgradient at exactly 0 is 1.
template <class T>
Tensor<T> leaky_relu(Tape<T>& tape, const Tensor<T>& a, T slope) {
    Tensor<T> out(a.rows(), a.cols());
    const std::int64_t n = a.size();
    const T* pa = a.data();
    T* po = out.data();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] < T(0) ? slope * pa[i] : pa[i];
    if (tape.recording() && a.requires_grad()) {
        out.set_requires_grad(true);
        tape.push([a, out, slope]() mutable {
            const T* go = out.grad();
            const T* pa2 = a.data();
            T* ga = a.grad();
            const std::int64_t m = a.size();
            for (std::int64_t i = 0; i < m; ++i) ga[i] += (pa2[i] < T(0) ? slope : T(1)) * go[i];
        });
    }
    debug_check_finite(out, "leaky_relu");
    return out;
}

/// Row-wise softmax with max subtraction.
template <class T>
Tensor<T> row_softmax(Tape<T>& tape, const Tensor<T>& a) {
    Tensor<T> out(a.rows(), a.cols());
    kernels::row_softmax(a.data(), out.data(), a.rows(), a.cols());
    if (tape.recording() && a.requires_grad()) {
        out.set_requires_grad(true);
        tape.push([a, out]() mutable {
            const int rows = out.rows();
            const int cols = out.cols();
            const T* s = out.data();
            const T* go = out.grad();
            T* ga = a.grad();
            for (int i = 0; i < rows; ++i) {
                const T* si = s + static_cast<std::int64_t>(i) * cols;
                const T* gi = go + static_cast<std::int64_t>(i) * cols;
                T dot = 0;
                for (int j = 0; j < cols; ++j) dot += gi[j] * si[j];
                T* gai = ga + static_cast<std::int64_t>(i) * cols;
                for (int j = 0; j < cols; ++j) gai[j] += si[j] * (gi[j] - dot);
            }
        });
    }
    debug_check_finite(out, "row_softmax");
    return out;
}

/// Inverted dropout: zero with probability p, scale survivors by 1/(1−p).
/// Identity (same handle, no tape node) in eval mode or at p = 0.
template <class T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& a, double p, bool training, Rng& rng) {
    if (p < 0.0 || p >= 1.0)
        throw ParamError("dropout probability must be in [0,1), got " + std::to_string(p));
    if (!training || p == 0.0) return a;
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    const std::int64_t n = a.size();
    auto mask = std::make_shared<std::vector<T>>(n);
    T* pm = mask->data();
    for (std::int64_t i = 0; i < n; ++i) pm[i] = rng.uniform() < p ? T(0) : keep_scale;
    Tensor<T> out(a.rows(), a.cols());
    const T* pa = a.data();
    T* po = out.data();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] * pm[i];
    if (tape.recording() && a.requires_grad()) {
        out.set_requires_grad(true);
        tape.push([a, out, mask]() mutable {
            const T* go = out.grad();
            const T* pm2 = mask->data();
            T* ga = a.grad();
            const std::int64_t m = a.size();
            for (std::int64_t i = 0; i < m; ++i) ga[i] += go[i] * pm2[i];
        });
    }
    return out;
}

/// Glorot/Xavier uniform initialization on [−a, a], a = √(6/(rows+cols)).
template <class T>
Tensor<T> glorot_init(int rows, int cols, Rng& rng) {
    if (rows <= 0 || cols <= 0)
        throw ParamError("glorot_init needs positive dims, got " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    Tensor<T> out(rows, cols, true);
    const double a = std::sqrt(6.0 / (rows + cols));
    T* p = out.data();
    const std::int64_t n = out.size();
    for (std::int64_t i = 0; i < n; ++i) p[i] = static_cast<T>(rng.uniform(-a, a));
    return out;
}

/// Y = M·X for a constant symmetric sparse matrix M (the normalized
/// adjacency). Symmetry is what makes the backward rule dX += M·dY correct.
/// M is captured by reference and must outlive the backward pass.
template <class T>
Tensor<T> spmm_sym(Tape<T>& tape, const Csr& m, const Tensor<T>& x) {
    if (m.rows != m.cols)
        throw ShapeError("spmm_sym: matrix must be square, got " + std::to_string(m.rows) + "x" +
                         std::to_string(m.cols));
    if (m.cols != x.rows())
        throw ShapeError("spmm_sym: matrix cols " + std::to_string(m.cols) +
                         " do not match tensor rows " + std::to_string(x.rows()));
    Tensor<T> out(m.rows, x.cols());
    kernels::spmm_csr(m.row_ptr.data(), m.col.data(), m.val.data(), x.data(), out.data(), m.rows,
                      x.cols());
    if (tape.recording() && x.requires_grad()) {
        out.set_requires_grad(true);
        tape.push([&m, x, out]() mutable {
            kernels::spmm_csr(m.row_ptr.data(), m.col.data(), m.val.data(), out.grad(), x.grad(),
                              m.rows, x.cols(), true);
        });
    }
    debug_check_finite(out, "spmm_sym");
    return out;
}

}  // namespace dgnn::core

#endif
