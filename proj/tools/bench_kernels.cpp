// Times each OpenMP kernel against its serial reference on shapes typical
// for full-graph training, and verifies the two produce bit-identical
// output (the parallel schedules are chosen so they must).
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dgnn/csr.hpp"
#include "dgnn/kernels.hpp"
#include "dgnn/rng.hpp"

namespace {

using namespace dgnn;

double time_best_of(int reps, const std::function<void()>& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

template <class T>
void report(const char* name, const char* shape, int reps, std::vector<T>& out_serial,
            std::vector<T>& out_parallel, const std::function<void()>& serial,
            const std::function<void()>& parallel) {
    const double ts = time_best_of(reps, serial);
    const double tp = time_best_of(reps, parallel);
    const bool identical =
        std::memcmp(out_serial.data(), out_parallel.data(), out_serial.size() * sizeof(T)) == 0;
    std::printf("%-22s %-20s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   %s\n", name,
                shape, ts, tp, ts / tp, identical ? "bit-identical" : "MISMATCH");
}

Csr random_graph(int n, int avg_degree, Rng& rng) {
    std::vector<std::vector<int>> nbrs(n);
    for (int v = 0; v < n; ++v) {
        nbrs[v].push_back(v);
        for (int e = 0; e < avg_degree; ++e) {
            int u = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
            nbrs[v].push_back(u);
        }
        std::sort(nbrs[v].begin(), nbrs[v].end());
        nbrs[v].erase(std::unique(nbrs[v].begin(), nbrs[v].end()), nbrs[v].end());
    }
    Csr c;
    c.rows = c.cols = n;
    c.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
    for (int v = 0; v < n; ++v) c.row_ptr[v + 1] = c.row_ptr[v] + static_cast<int>(nbrs[v].size());
    for (int v = 0; v < n; ++v)
        for (int u : nbrs[v]) {
            c.col.push_back(u);
            c.val.push_back(1.0 / avg_degree);
        }
    return c;
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; parallel variants run serially\n\n");
#endif
    Rng rng(7);

    {
        const int m = 2708, k = 512, n = 512;
        std::vector<float> a(static_cast<std::size_t>(m) * k), b(static_cast<std::size_t>(k) * n);
        for (auto& v : a) v = static_cast<float>(rng.uniform(-1, 1));
        for (auto& v : b) v = static_cast<float>(rng.uniform(-1, 1));
        std::vector<float> cs(static_cast<std::size_t>(m) * n), cp(cs.size());
        report<float>(
            "gemm_nn", "2708x512 * 512x512", 5, cs, cp,
            [&] { kernels::gemm_nn_serial(a.data(), b.data(), cs.data(), m, k, n, false); },
            [&] { kernels::gemm_nn(a.data(), b.data(), cp.data(), m, k, n, false); });

        std::vector<float> gs(static_cast<std::size_t>(k) * n), gp(gs.size());
        report<float>(
            "gemm_tn", "(2708x512)^T * ...", 5, gs, gp,
            [&] { kernels::gemm_tn_serial(a.data(), cs.data(), gs.data(), m, k, n, false); },
            [&] { kernels::gemm_tn(a.data(), cs.data(), gp.data(), m, k, n, false); });

        std::vector<float> hs(static_cast<std::size_t>(m) * k), hp(hs.size());
        report<float>(
            "gemm_nt", "2708x512 * (512x512)^T", 5, hs, hp,
            [&] { kernels::gemm_nt_serial(cs.data(), b.data(), hs.data(), m, n, k, false); },
            [&] { kernels::gemm_nt(cs.data(), b.data(), hp.data(), m, n, k, false); });
    }

    {
        const int n = 20000, d = 64;
        const Csr g = random_graph(n, 16, rng);
        std::vector<float> x(static_cast<std::size_t>(n) * d);
        for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
        std::vector<float> ys(x.size()), yp(x.size());
        char shape[32];
        std::snprintf(shape, sizeof shape, "n=%d nnz=%d d=%d", n, static_cast<int>(g.nnz()), d);
        report<float>(
            "spmm_csr", shape, 5, ys, yp,
            [&] {
                kernels::spmm_csr_serial(g.row_ptr.data(), g.col.data(), g.val.data(), x.data(),
                                         ys.data(), n, d);
            },
            [&] {
                kernels::spmm_csr(g.row_ptr.data(), g.col.data(), g.val.data(), x.data(),
                                  yp.data(), n, d);
            });
    }

    {
        const int n = 20000, d = 256;
        std::vector<float> x(static_cast<std::size_t>(n) * d);
        for (auto& v : x) v = static_cast<float>(rng.uniform(-4, 4));
        std::vector<float> ss(x.size()), sp(x.size());
        report<float>(
            "row_softmax", "20000x256", 5, ss, sp,
            [&] { kernels::row_softmax_serial(x.data(), ss.data(), n, d); },
            [&] { kernels::row_softmax(x.data(), sp.data(), n, d); });

        std::vector<float> ms(d), vs(d), mp(d), vp(d);
        report<float>(
            "colwise_moments", "20000x256", 5, ms, mp,
            [&] { kernels::colwise_moments_serial(x.data(), n, d, ms.data(), vs.data()); },
            [&] { kernels::colwise_moments(x.data(), n, d, mp.data(), vp.data()); });
    }

    {
        const int n = 1200, d = 32;
        std::vector<double> h(static_cast<std::size_t>(n) * d);
        for (auto& v : h) v = rng.uniform(-1, 1);
        std::vector<int> idx(n);
        for (int v = 0; v < n; ++v) idx[v] = v;
        std::vector<double> outs(1), outp(1);
        report<double>(
            "pair_distance_sum", "1200x32 all pairs", 5, outs, outp,
            [&] { outs[0] = kernels::pair_distance_sum_serial(h.data(), d, idx, idx); },
            [&] { outp[0] = kernels::pair_distance_sum(h.data(), d, idx, idx); });
    }
    return 0;
}
