#ifndef DGNN_LAYERS_HPP
#define DGNN_LAYERS_HPP

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "dgnn/csr.hpp"
#include "dgnn/error.hpp"
#include "dgnn/ops.hpp"
#include "dgnn/rng.hpp"
#include "dgnn/tensor.hpp"

// Layer states and the differentiable normalizers. The group normalizer is
// evaluated in matrix form: with S the n×G soft assignment, the per-group
// masked statistics are
//     μ = SᵀH / n,   E[x²] = (S∘S)ᵀ(H∘H) / n,   σ = √(E[x²] − μ² + ε)
// and the sum over groups of the normalized masked copies collapses to
//     Σ_i BN_i(S_i∘H) = H ∘ (S·Γ) + 1·b,
// with Γ[i,:] = γ_i/σ_i and b = Σ_i (β_i − γ_i∘μ_i/σ_i). This avoids ever
// materializing the G masked n×d matrices, so the cost grows only through
// the two G-wide products.

namespace dgnn::layers {

template <class T>
struct GcnLayer {
    Tensor<T> w;

    GcnLayer(int d_in, int d_out, Rng& rng) : w(core::glorot_init<T>(d_in, d_out, rng)) {}
};

template <class T>
struct GatLayer {
    Tensor<T> w;  // d_in×d_out
    Tensor<T> a;  // 2·d_out×1, split into source/destination halves
    static constexpr T kLeakySlope = static_cast<T>(0.2);

    GatLayer(int d_in, int d_out, Rng& rng)
        : w(core::glorot_init<T>(d_in, d_out, rng)),
          a(core::glorot_init<T>(2 * d_out, 1, rng)) {}
};

template <class T>
struct BatchNormState {
    Tensor<T> gamma;  // 1×d
    Tensor<T> beta;   // 1×d
    std::vector<T> run_mean;
    std::vector<T> run_std;
    double momentum = 0.1;
    double eps = 1e-5;

    explicit BatchNormState(int d)
        : gamma(1, d, true), beta(1, d, true), run_mean(d, T(0)), run_std(d, T(1)) {
        gamma.fill(T(1));
    }
};

template <class T>
struct DgnState {
    int groups;
    double lambda;
    Tensor<T> u;      // d×G assignment weights
    Tensor<T> gamma;  // G×d, row i = γ_i
    Tensor<T> beta;   // G×d, row i = β_i
    std::vector<T> run_mean;  // G·d
    std::vector<T> run_std;   // G·d
    double momentum = 0.1;
    double eps = 1e-5;

    DgnState(int d, int groups_, double lambda_, Rng& rng)
        : groups(groups_),
          lambda(lambda_),
          u(core::glorot_init<T>(d, std::max(groups_, 1), rng)),
          gamma(groups_ >= 1 ? groups_ : 1, d, true),
          beta(groups_ >= 1 ? groups_ : 1, d, true),
          run_mean(static_cast<std::size_t>(std::max(groups_, 1)) * d, T(0)),
          run_std(static_cast<std::size_t>(std::max(groups_, 1)) * d, T(1)) {
        if (groups_ < 1) throw ParamError("group count must be >= 1, got " + std::to_string(groups_));
        if (lambda_ < 0) throw ParamError("lambda must be >= 0, got " + std::to_string(lambda_));
        gamma.fill(T(1));
    }
};

/// Per-column batch normalization with trainable affine parameters and
/// EMA-tracked running statistics (used in eval mode).
template <class T>
Tensor<T> batch_norm(Tape<T>& tape, const Tensor<T>& x, BatchNormState<T>& state, bool training) {
    const int n = x.rows();
    const int d = x.cols();
    if (d != state.gamma.cols())
        throw ShapeError("batch_norm: input width " + std::to_string(d) +
                         " does not match state width " + std::to_string(state.gamma.cols()));
    if (n == 0) throw ShapeError("batch_norm: empty input");

    auto mu = std::make_shared<std::vector<T>>(d);
    auto sigma = std::make_shared<std::vector<T>>(d);
    if (training) {
        std::vector<T> var(d);
        kernels::colwise_moments(x.data(), n, d, mu->data(), var.data());
        const T m = static_cast<T>(state.momentum);
        for (int j = 0; j < d; ++j) {
            (*sigma)[j] = std::sqrt(var[j] + static_cast<T>(state.eps));
            state.run_mean[j] = (T(1) - m) * state.run_mean[j] + m * (*mu)[j];
            state.run_std[j] = (T(1) - m) * state.run_std[j] + m * (*sigma)[j];
        }
    } else {
        *mu = state.run_mean;
        *sigma = state.run_std;
    }

    Tensor<T> out(n, d);
    {
        const T* px = x.data();
        const T* pg = state.gamma.data();
        const T* pb = state.beta.data();
        T* po = out.data();
        for (int i = 0; i < n; ++i) {
            const std::int64_t off = static_cast<std::int64_t>(i) * d;
            for (int j = 0; j < d; ++j)
                po[off + j] = pg[j] * (px[off + j] - (*mu)[j]) / (*sigma)[j] + pb[j];
        }
    }

    Tensor<T> gamma = state.gamma;
    Tensor<T> beta = state.beta;
    if (tape.recording() && (x.requires_grad() || gamma.requires_grad() || beta.requires_grad())) {
        out.set_requires_grad(true);
        tape.push([x, gamma, beta, out, mu, sigma, training]() mutable {
            const int n2 = x.rows();
            const int d2 = x.cols();
            const T* go = out.grad();
            const T* px = x.data();
            const T* pg = gamma.data();
            std::vector<T> dgamma(d2, T(0)), dbeta(d2, T(0));
            std::vector<T> t1(d2, T(0)), t2(d2, T(0));
            for (int i = 0; i < n2; ++i) {
                const std::int64_t off = static_cast<std::int64_t>(i) * d2;
                for (int j = 0; j < d2; ++j) {
                    const T centered = px[off + j] - (*mu)[j];
                    const T xhat = centered / (*sigma)[j];
                    const T g = go[off + j];
                    dbeta[j] += g;
                    dgamma[j] += g * xhat;
                    const T dxhat = g * pg[j];
                    t1[j] += dxhat;
                    t2[j] += dxhat * centered;
                }
            }
            if (gamma.requires_grad()) {
                T* gg = gamma.grad();
                for (int j = 0; j < d2; ++j) gg[j] += dgamma[j];
            }
            if (beta.requires_grad()) {
                T* gb = beta.grad();
                for (int j = 0; j < d2; ++j) gb[j] += dbeta[j];
            }
            if (!x.requires_grad()) return;
            T* gx = x.grad();
            if (!training) {
                for (int i = 0; i < n2; ++i) {
                    const std::int64_t off = static_cast<std::int64_t>(i) * d2;
                    for (int j = 0; j < d2; ++j)
                        gx[off + j] += go[off + j] * pg[j] / (*sigma)[j];
                }
                return;
            }
            // Through σ = √(E[x²]−μ²+ε) with batch statistics.
            const T inv_n = T(1) / static_cast<T>(n2);
            std::vector<T> dvar(d2), dmu(d2);
            for (int j = 0; j < d2; ++j) {
                const T s = (*sigma)[j];
                const T ds = -t2[j] / (s * s);
                dvar[j] = ds / (2 * s);
                dmu[j] = -t1[j] / s - 2 * (*mu)[j] * dvar[j];
            }
            for (int i = 0; i < n2; ++i) {
                const std::int64_t off = static_cast<std::int64_t>(i) * d2;
                for (int j = 0; j < d2; ++j) {
                    const T dxhat = go[off + j] * pg[j];
                    gx[off + j] += dxhat / (*sigma)[j] +
                                   dvar[j] * 2 * px[off + j] * inv_n + dmu[j] * inv_n;
                }
            }
        });
    }
    debug_check_finite(out, "batch_norm");
    return out;
}

/// Per-column standardization with batch statistics only — no affine
/// parameters, no running state. The tiny ε keeps idempotence tight while
/// still mapping constant columns to zero.
template <class T>
Tensor<T> pair_norm(Tape<T>& tape, const Tensor<T>& x) {
    constexpr T kEps = static_cast<T>(1e-12);
    const int n = x.rows();
    const int d = x.cols();
    if (n == 0) throw ShapeError("pair_norm: empty input");

    auto mu = std::make_shared<std::vector<T>>(d);
    auto sigma = std::make_shared<std::vector<T>>(d);
    {
        std::vector<T> var(d);
        kernels::colwise_moments(x.data(), n, d, mu->data(), var.data());
        for (int j = 0; j < d; ++j) (*sigma)[j] = std::sqrt(var[j] + kEps);
    }

    Tensor<T> out(n, d);
    {
        const T* px = x.data();
        T* po = out.data();
        for (int i = 0; i < n; ++i) {
            const std::int64_t off = static_cast<std::int64_t>(i) * d;
            for (int j = 0; j < d; ++j) po[off + j] = (px[off + j] - (*mu)[j]) / (*sigma)[j];
        }
    }

    if (tape.recording() && x.requires_grad()) {
        out.set_requires_grad(true);
        tape.push([x, out, mu, sigma]() mutable {
            const int n2 = x.rows();
            const int d2 = x.cols();
            const T* go = out.grad();
            const T* px = x.data();
            T* gx = x.grad();
            std::vector<T> t1(d2, T(0)), t2(d2, T(0));
            for (int i = 0; i < n2; ++i) {
                const std::int64_t off = static_cast<std::int64_t>(i) * d2;
                for (int j = 0; j < d2; ++j) {
                    t1[j] += go[off + j];
                    t2[j] += go[off + j] * (px[off + j] - (*mu)[j]);
                }
            }
            const T inv_n = T(1) / static_cast<T>(n2);
            std::vector<T> dvar(d2), dmu(d2);
            for (int j = 0; j < d2; ++j) {
                const T s = (*sigma)[j];
                const T ds = -t2[j] / (s * s);
                dvar[j] = ds / (2 * s);
                dmu[j] = -t1[j] / s - 2 * (*mu)[j] * dvar[j];
            }
            for (int i = 0; i < n2; ++i) {
                const std::int64_t off = static_cast<std::int64_t>(i) * d2;
                for (int j = 0; j < d2; ++j)
                    gx[off + j] += go[off + j] / (*sigma)[j] +
                                   dvar[j] * 2 * px[off + j] * inv_n + dmu[j] * inv_n;
            }
        });
    }
    debug_check_finite(out, "pair_norm");
    return out;
}

/// Soft group assignment S = softmax(H·U), row-stochastic.
template <class T>
Tensor<T> dgn_assign(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& u) {
    return core::row_softmax(tape, core::matmul(tape, x, u));
}

/// Group normalization: S = softmax(H·U); each group's soft-masked copy
/// S[:,i]∘H is batch-normalized with group-i statistics and affine
/// parameters; the output is H + λ·Σ_i BN_i(S[:,i]∘H), evaluated in the
/// collapsed matrix form described at the top of this header.
/// When `s_out` is non-null it receives the assignment matrix.
template <class T>
Tensor<T> dgn_forward(Tape<T>& tape, const Tensor<T>& x, DgnState<T>& state, bool training,
                      Tensor<T>* s_out = nullptr) {
    const int n = x.rows();
    const int d = x.cols();
    const int G = state.groups;
    if (G < 1) throw ParamError("group count must be >= 1, got " + std::to_string(G));
    if (d != state.gamma.cols() || d != state.u.rows())
        throw ShapeError("dgn_forward: input width " + std::to_string(d) +
                         " does not match state width " + std::to_string(state.gamma.cols()));
    if (n == 0) throw ShapeError("dgn_forward: empty input");

    const T lambda = static_cast<T>(state.lambda);
    if (lambda == T(0)) {
        if (s_out) *s_out = dgn_assign(tape, x, state.u);
        return x;  // Eq. with λ=0: the identity, bit-for-bit
    }

    Tensor<T> s = dgn_assign(tape, x, state.u);
    if (s_out) *s_out = s;

    const std::size_t gd = static_cast<std::size_t>(G) * d;
    auto mu = std::make_shared<std::vector<T>>(gd);
    auto sigma = std::make_shared<std::vector<T>>(gd);
    auto var_raw = std::make_shared<std::vector<T>>(gd);
    if (training) {
        std::vector<T> p(gd), q(gd);
        kernels::gemm_tn(s.data(), x.data(), p.data(), n, G, d);
        {
            std::vector<T> s2(static_cast<std::size_t>(n) * G);
            std::vector<T> h2(static_cast<std::size_t>(n) * d);
            const T* ps = s.data();
            for (std::size_t i = 0; i < s2.size(); ++i) s2[i] = ps[i] * ps[i];
            const T* px = x.data();
            for (std::size_t i = 0; i < h2.size(); ++i) h2[i] = px[i] * px[i];
            kernels::gemm_tn(s2.data(), h2.data(), q.data(), n, G, d);
        }
        const T inv_n = T(1) / static_cast<T>(n);
        const T m = static_cast<T>(state.momentum);
        const T eps = static_cast<T>(state.eps);
        for (std::size_t i = 0; i < gd; ++i) {
            (*mu)[i] = p[i] * inv_n;
            (*var_raw)[i] = q[i] * inv_n - (*mu)[i] * (*mu)[i];
            const T v = (*var_raw)[i] > T(0) ? (*var_raw)[i] : T(0);
            (*sigma)[i] = std::sqrt(v + eps);
            state.run_mean[i] = (T(1) - m) * state.run_mean[i] + m * (*mu)[i];
            state.run_std[i] = (T(1) - m) * state.run_std[i] + m * (*sigma)[i];
        }
    } else {
        for (std::size_t i = 0; i < gd; ++i) {
            (*mu)[i] = state.run_mean[i];
            (*sigma)[i] = state.run_std[i];
        }
    }

    Tensor<T> gamma = state.gamma;
    Tensor<T> beta = state.beta;

    // Γ[i,:] = γ_i/σ_i and b = Σ_i (β_i − γ_i∘μ_i/σ_i), then
    // out = H + λ·(H∘(S·Γ) + 1·b).
    std::vector<T> gamma_hat(gd);
    std::vector<T> bias(d, T(0));
    {
        const T* pg = gamma.data();
        const T* pb = beta.data();
        for (int g = 0; g < G; ++g) {
            const std::size_t off = static_cast<std::size_t>(g) * d;
            for (int j = 0; j < d; ++j) {
                gamma_hat[off + j] = pg[off + j] / (*sigma)[off + j];
                bias[j] += pb[off + j] - gamma_hat[off + j] * (*mu)[off + j];
            }
        }
    }
    Tensor<T> out(n, d);
    {
        std::vector<T> a(static_cast<std::size_t>(n) * d);
        kernels::gemm_nn(s.data(), gamma_hat.data(), a.data(), n, G, d);
        const T* px = x.data();
        T* po = out.data();
        for (int i = 0; i < n; ++i) {
            const std::int64_t off = static_cast<std::int64_t>(i) * d;
            for (int j = 0; j < d; ++j)
                po[off + j] = px[off + j] + lambda * (px[off + j] * a[off + j] + bias[j]);
        }
    }

    if (tape.recording() && (x.requires_grad() || s.requires_grad() || gamma.requires_grad() ||
                             beta.requires_grad())) {
        out.set_requires_grad(true);
        tape.push([x, s, gamma, beta, out, mu, sigma, var_raw, lambda, training]() mutable {
            const int n2 = x.rows();
            const int d2 = x.cols();
            const int G2 = s.cols();
            const std::size_t gd2 = static_cast<std::size_t>(G2) * d2;
            const T* go = out.grad();
            const T* px = x.data();
            const T* pg = gamma.data();

            std::vector<T> gamma_hat(gd2);
            for (std::size_t i = 0; i < gd2; ++i) gamma_hat[i] = pg[i] / (*sigma)[i];

            // dH += dOut·(1 + λA); dA = λ·dOut∘H; db = λ·colsum(dOut).
            std::vector<T> a(static_cast<std::size_t>(n2) * d2);
            kernels::gemm_nn(s.data(), gamma_hat.data(), a.data(), n2, G2, d2);
            std::vector<T> da(static_cast<std::size_t>(n2) * d2);
            std::vector<T> dbias(d2, T(0));
            {
                T* gx = x.requires_grad() ? x.grad() : nullptr;
                for (int i = 0; i < n2; ++i) {
                    const std::int64_t off = static_cast<std::int64_t>(i) * d2;
                    for (int j = 0; j < d2; ++j) {
                        const T g = go[off + j];
                        if (gx) gx[off + j] += g * (T(1) + lambda * a[off + j]);
                        da[off + j] = lambda * g * px[off + j];
                        dbias[j] += lambda * g;
                    }
                }
            }

            if (s.requires_grad())
                kernels::gemm_nt(da.data(), gamma_hat.data(), s.grad(), n2, d2, G2, true);
            std::vector<T> dgamma_hat(gd2);
            kernels::gemm_tn(s.data(), da.data(), dgamma_hat.data(), n2, G2, d2);

            // Unpack Γ and b into γ, β, μ, σ.
            std::vector<T> dmu(gd2), dsigma(gd2);
            {
                T* gg = gamma.requires_grad() ? gamma.grad() : nullptr;
                T* gb = beta.requires_grad() ? beta.grad() : nullptr;
                for (int g = 0; g < G2; ++g) {
                    const std::size_t off = static_cast<std::size_t>(g) * d2;
                    for (int j = 0; j < d2; ++j) {
                        const std::size_t k = off + j;
                        const T sg = (*sigma)[k];
                        if (gb) gb[k] += dbias[j];
                        if (gg) gg[k] += dgamma_hat[k] / sg - dbias[j] * (*mu)[k] / sg;
                        dmu[k] = -dbias[j] * gamma_hat[k];
                        dsigma[k] =
                            -dgamma_hat[k] * pg[k] / (sg * sg) + dbias[j] * gamma_hat[k] * (*mu)[k] / sg;
                    }
                }
            }

            if (!training) return;  // running stats are constants
            if (!x.requires_grad() && !s.requires_grad()) return;

            // Through σ=√(var+ε), var=Q/n−μ², μ=P/n with P=SᵀH, Q=(S∘S)ᵀ(H∘H).
            const T inv_n = T(1) / static_cast<T>(n2);
            std::vector<T> dp(gd2), dq(gd2);
            for (std::size_t k = 0; k < gd2; ++k) {
                const T dvar = (*var_raw)[k] > T(0) ? dsigma[k] / (2 * (*sigma)[k]) : T(0);
                dq[k] = dvar * inv_n;
                dp[k] = (dmu[k] - 2 * (*mu)[k] * dvar) * inv_n;
            }
            if (s.requires_grad())
                kernels::gemm_nt(px, dp.data(), s.grad(), n2, d2, G2, true);
            if (x.requires_grad())
                kernels::gemm_nn(s.data(), dp.data(), x.grad(), n2, G2, d2, true);

            std::vector<T> s2(static_cast<std::size_t>(n2) * G2);
            const T* ps = s.data();
            for (std::size_t i = 0; i < s2.size(); ++i) s2[i] = ps[i] * ps[i];
            if (s.requires_grad()) {
                std::vector<T> h2(static_cast<std::size_t>(n2) * d2);
                for (std::size_t i = 0; i < h2.size(); ++i) h2[i] = px[i] * px[i];
                std::vector<T> ds2(static_cast<std::size_t>(n2) * G2);
                kernels::gemm_nt(h2.data(), dq.data(), ds2.data(), n2, d2, G2);
                T* gs = s.grad();
                for (std::size_t i = 0; i < s2.size(); ++i) gs[i] += 2 * ps[i] * ds2[i];
            }
            if (x.requires_grad()) {
                std::vector<T> dh2(static_cast<std::size_t>(n2) * d2);
                kernels::gemm_nn(s2.data(), dq.data(), dh2.data(), n2, G2, d2);
                T* gx = x.grad();
                for (std::size_t i = 0; i < dh2.size(); ++i) gx[i] += 2 * px[i] * dh2[i];
            }
        });
    }
    debug_check_finite(out, "dgn_forward");
    return out;
}

/// Single-head attention aggregation over closed neighborhoods:
/// e_vu = leaky_relu(a_srcᵀWh_v + a_dstᵀWh_u), α_v· = softmax over the
/// CSR row of `pattern` (which must include self-loops), out_v = Σ_u α_vu·Wh_u.
/// `pattern` is captured by reference and must outlive the backward pass.
template <class T>
Tensor<T> gat_attention(Tape<T>& tape, const Csr& pattern, const Tensor<T>& wh,
                        const Tensor<T>& a, T slope) {
    const int n = wh.rows();
    const int d = wh.cols();
    if (pattern.rows != pattern.cols || pattern.rows != n)
        throw ShapeError("gat_attention: pattern is " + std::to_string(pattern.rows) + "x" +
                         std::to_string(pattern.cols) + " for " + std::to_string(n) + " nodes");
    if (a.rows() != 2 * d || a.cols() != 1)
        throw ShapeError("gat_attention: attention vector is " + core::shape_str(a) +
                         ", expected " + std::to_string(2 * d) + "x1");

    auto pv = std::make_shared<std::vector<T>>(n);
    auto qv = std::make_shared<std::vector<T>>(n);
    {
        const T* pw = wh.data();
        const T* pa = a.data();
        for (int v = 0; v < n; ++v) {
            const T* row = pw + static_cast<std::int64_t>(v) * d;
            T sp = 0, sq = 0;
            for (int j = 0; j < d; ++j) {
                sp += row[j] * pa[j];
                sq += row[j] * pa[d + j];
            }
            (*pv)[v] = sp;
            (*qv)[v] = sq;
        }
    }

    const int nnz = pattern.nnz();
    auto alpha = std::make_shared<std::vector<T>>(nnz);
    Tensor<T> out(n, d);
    {
        T* po = out.data();
        for (int v = 0; v < n; ++v) {
            const int lo = pattern.row_ptr[v];
            const int hi = pattern.row_ptr[v + 1];
            if (lo == hi)
                throw ShapeError("gat_attention: node " + std::to_string(v) +
                                 " has an empty neighborhood (self-loop missing)");
            T mx = -std::numeric_limits<T>::infinity();
            for (int idx = lo; idx < hi; ++idx) {
                const T sc = (*pv)[v] + (*qv)[pattern.col[idx]];
                const T e = sc < T(0) ? slope * sc : sc;
                (*alpha)[idx] = e;
                mx = std::max(mx, e);
            }
            T sum = 0;
            for (int idx = lo; idx < hi; ++idx) {
                (*alpha)[idx] = std::exp((*alpha)[idx] - mx);
                sum += (*alpha)[idx];
            }
            const T inv = T(1) / sum;
            T* orow = po + static_cast<std::int64_t>(v) * d;
            for (int idx = lo; idx < hi; ++idx) {
                (*alpha)[idx] *= inv;
                const T* urow = wh.data() + static_cast<std::int64_t>(pattern.col[idx]) * d;
                const T w = (*alpha)[idx];
                for (int j = 0; j < d; ++j) orow[j] += w * urow[j];
            }
        }
    }

    if (tape.recording() && (wh.requires_grad() || a.requires_grad())) {
        out.set_requires_grad(true);
        tape.push([&pattern, wh, a, out, pv, qv, alpha, slope]() mutable {
            const int n2 = wh.rows();
            const int d2 = wh.cols();
            const T* go = out.grad();
            const T* pw = wh.data();
            std::vector<T> dpv(n2, T(0)), dqv(n2, T(0));
            T* gw = wh.requires_grad() ? wh.grad() : nullptr;
            for (int v = 0; v < n2; ++v) {
                const int lo = pattern.row_ptr[v];
                const int hi = pattern.row_ptr[v + 1];
                const T* gv = go + static_cast<std::int64_t>(v) * d2;
                T dot = 0;
                std::vector<T> dalpha(static_cast<std::size_t>(hi - lo));
                for (int idx = lo; idx < hi; ++idx) {
                    const int u = pattern.col[idx];
                    const T* urow = pw + static_cast<std::int64_t>(u) * d2;
                    T s = 0;
                    for (int j = 0; j < d2; ++j) s += gv[j] * urow[j];
                    dalpha[idx - lo] = s;
                    dot += s * (*alpha)[idx];
                    if (gw) {
                        T* gu = gw + static_cast<std::int64_t>(u) * d2;
                        const T w = (*alpha)[idx];
                        for (int j = 0; j < d2; ++j) gu[j] += w * gv[j];
                    }
                }
                for (int idx = lo; idx < hi; ++idx) {
                    const int u = pattern.col[idx];
                    const T de = (*alpha)[idx] * (dalpha[idx - lo] - dot);
                    const T sc = (*pv)[v] + (*qv)[u];
                    const T ds = sc < T(0) ? slope * de : de;
                    dpv[v] += ds;
                    dqv[u] += ds;
                }
            }
            if (gw) {
                const T* pa = a.data();
                for (int v = 0; v < n2; ++v) {
                    T* grow = gw + static_cast<std::int64_t>(v) * d2;
                    for (int j = 0; j < d2; ++j)
                        grow[j] += dpv[v] * pa[j] + dqv[v] * pa[d2 + j];
                }
            }
            if (a.requires_grad()) {
                T* ga = a.grad();
                for (int v = 0; v < n2; ++v) {
                    const T* row = pw + static_cast<std::int64_t>(v) * d2;
                    for (int j = 0; j < d2; ++j) {
                        ga[j] += row[j] * dpv[v];
                        ga[d2 + j] += row[j] * dqv[v];
                    }
                }
            }
        });
    }
    debug_check_finite(out, "gat_attention");
    return out;
}

}  // namespace dgnn::layers

#endif
