#include "dgnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dgnn/error.hpp"
#include "dgnn/kernels.hpp"
#include "dgnn/rng.hpp"

namespace dgnn::metrics {

namespace {

// Nonempty groups in ascending label order.
std::vector<std::vector<int>> collect_groups(int n, const std::vector<int>& labels) {
    if (static_cast<int>(labels.size()) != n)
        throw ShapeError("labels size " + std::to_string(labels.size()) +
                         " does not match row count " + std::to_string(n));
    std::map<int, std::vector<int>> by_label;
    for (int v = 0; v < n; ++v) by_label[labels[v]].push_back(v);
    std::vector<std::vector<int>> groups;
    groups.reserve(by_label.size());
    for (auto& [label, members] : by_label) groups.push_back(std::move(members));
    return groups;
}

// Mean pairwise distance over left×right (ordered pairs, self-pairs kept
// when the sets coincide); falls back to pair_cap uniform samples when the
// population exceeds the cap.
double mean_pair_distance(const double* h, int d, const std::vector<int>& left,
                          const std::vector<int>& right, std::int64_t pair_cap, Rng& rng,
                          std::int64_t& pairs_used) {
    const std::int64_t population =
        static_cast<std::int64_t>(left.size()) * static_cast<std::int64_t>(right.size());
    if (pair_cap <= 0 || population <= pair_cap) {
        pairs_used += population;
        return kernels::pair_distance_sum(h, d, left, right) / static_cast<double>(population);
    }
    std::vector<std::pair<int, int>> pairs(static_cast<std::size_t>(pair_cap));
    for (auto& p : pairs)
        p = {left[rng.below(static_cast<std::uint64_t>(left.size()))],
             right[rng.below(static_cast<std::uint64_t>(right.size()))]};
    pairs_used += pair_cap;
    return kernels::pair_list_distance_sum(h, d, pairs) / static_cast<double>(pair_cap);
}

double intra_sum(const double* h, int d, const std::vector<std::vector<int>>& groups,
                 std::int64_t pair_cap, Rng& rng, std::int64_t& pairs_used) {
    double sum = 0.0;
    for (const auto& members : groups)
        sum += mean_pair_distance(h, d, members, members, pair_cap, rng, pairs_used);
    return sum / static_cast<double>(groups.size());
}

}  // namespace

double group_distance_ratio(const double* h, int n, int d, const std::vector<int>& labels,
                            std::int64_t pair_cap, std::uint64_t seed,
                            std::int64_t* pairs_used, double* intra_out) {
    const auto groups = collect_groups(n, labels);
    const int c = static_cast<int>(groups.size());
    if (c < 2) throw ParamError("group distance ratio needs at least 2 nonempty groups, got " +
                                std::to_string(c));

    Rng rng(seed);
    std::int64_t used = 0;
    const double den = intra_sum(h, d, groups, pair_cap, rng, used);
    if (intra_out) *intra_out = den;

    double num = 0.0;
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < c; ++j) {
            if (i == j) continue;
            num += mean_pair_distance(h, d, groups[i], groups[j], pair_cap, rng, used);
        }
    num /= static_cast<double>(c - 1) * static_cast<double>(c - 1);
    if (pairs_used) *pairs_used = used;

    if (den < kRatioEps) return num < kRatioEps ? 1.0 : num / kRatioEps;
    return num / den;
}

double intra_group_distance(const double* h, int n, int d, const std::vector<int>& labels,
                            std::int64_t pair_cap, std::uint64_t seed,
                            std::int64_t* pairs_used) {
    const auto groups = collect_groups(n, labels);
    if (groups.empty()) throw ParamError("intra-group distance needs a nonempty group");
    Rng rng(seed);
    std::int64_t used = 0;
    const double den = intra_sum(h, d, groups, pair_cap, rng, used);
    if (pairs_used) *pairs_used = used;
    return den;
}

double instance_info_gain(const double* x, int n, int d, const double* logits, int c,
                          double sigma2) {
    if (n <= 0) throw ParamError("instance information gain needs a nonempty input");
    if (sigma2 <= 0) throw ParamError("sigma2 must be positive, got " + std::to_string(sigma2));
    if (c < 1) throw ParamError("logits need at least one column");

    // Argmax bins; ties go to the lowest class index.
    std::vector<int> z(static_cast<std::size_t>(n));
    std::vector<std::int64_t> bin_count(static_cast<std::size_t>(c), 0);
    for (int v = 0; v < n; ++v) {
        const double* row = logits + static_cast<std::int64_t>(v) * c;
        int best = 0;
        for (int j = 1; j < c; ++j)
            if (row[j] > row[best]) best = j;
        z[v] = best;
        ++bin_count[best];
    }

    // Sparse view of the feature rows: squared-distance evaluations walk
    // only the nonzeros of row i against a dense row j.
    std::vector<std::int64_t> nz_ptr(static_cast<std::size_t>(n) + 1, 0);
    std::vector<int> nz_idx;
    std::vector<double> sq_norm(static_cast<std::size_t>(n), 0.0);
    {
        std::int64_t total = 0;
        for (int v = 0; v < n; ++v) {
            const double* row = x + static_cast<std::int64_t>(v) * d;
            for (int j = 0; j < d; ++j)
                if (row[j] != 0.0) ++total;
            nz_ptr[v + 1] = total;
        }
        nz_idx.resize(static_cast<std::size_t>(total));
        std::int64_t out = 0;
        for (int v = 0; v < n; ++v) {
            const double* row = x + static_cast<std::int64_t>(v) * d;
            double s = 0.0;
            for (int j = 0; j < d; ++j) {
                if (row[j] != 0.0) nz_idx[out++] = j;
                s += row[j] * row[j];
            }
            sq_norm[v] = s;
        }
    }

    // Per-node contribution log(class_i/P_{z_i}) − log(total_i/n); both
    // kernel sums accumulate over j in ascending order so that a single
    // occupied bin cancels exactly.
    const double inv_denom = 1.0 / (8.0 * sigma2);
    std::vector<double> contrib(static_cast<std::size_t>(n));
    const std::int64_t work = static_cast<std::int64_t>(n) * n;
#pragma omp parallel for schedule(static) if (work > kernels::kParallelCutoff)
    for (int i = 0; i < n; ++i) {
        const double* xi = x + static_cast<std::int64_t>(i) * d;
        const int zi = z[i];
        double total = 0.0, cls = 0.0;
        for (int j = 0; j < n; ++j) {
            const double* xj = x + static_cast<std::int64_t>(j) * d;
            double dot = 0.0;
            for (std::int64_t t = nz_ptr[i]; t < nz_ptr[i + 1]; ++t)
                dot += xi[nz_idx[t]] * xj[nz_idx[t]];
            const double dist2 = std::max(0.0, sq_norm[i] + sq_norm[j] - 2.0 * dot);
            const double k = std::exp(-dist2 * inv_denom);
            total += k;
            if (z[j] == zi) cls += k;
        }
        contrib[i] = std::log(cls / static_cast<double>(bin_count[zi])) -
                     std::log(total / static_cast<double>(n));
    }

    double gain = 0.0;
    for (int i = 0; i < n; ++i) gain += contrib[i];
    gain /= static_cast<double>(n);
    return gain > 0.0 ? gain : 0.0;
}

}  // namespace dgnn::metrics
