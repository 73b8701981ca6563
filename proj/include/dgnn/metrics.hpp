#ifndef DGNN_METRICS_HPP
#define DGNN_METRICS_HPP

#include <cstdint>
#include <vector>

namespace dgnn::metrics {

struct MetricsReport {
    int depth = 0;
    double test_accuracy = 0.0;
    double r_group = 0.0;
    double g_ins = 0.0;
    double intra_group = 0.0;
    std::int64_t pair_sample_size = 0;
};

inline constexpr std::int64_t kDefaultPairCap = 1'000'000;
inline constexpr double kRatioEps = 1e-12;

/// Ratio of mean inter-group to mean intra-group pairwise L2 distance:
///   num = 1/(C−1)² Σ_{i≠j} mean_{u∈L_i, v∈L_j} ‖h_u−h_v‖
///   den = 1/C      Σ_i     mean_{u,v∈L_i}      ‖h_u−h_v‖   (self-pairs kept)
/// over the groups present in `labels` (C = nonempty group count). Group
/// pairs whose population exceeds pair_cap are estimated from pair_cap
/// uniform samples drawn from the seeded generator; the intra sums are
/// drawn first, in ascending group order, so intra_group_distance with the
/// same seed reproduces the denominator exactly. Degenerate inputs: both
/// sums below 1e-12 → 1.0 (total collapse); denominator alone below →
/// num/1e-12. `pairs_used` and `intra_out`, when given, receive the
/// evaluated pair count and the denominator.
double group_distance_ratio(const double* h, int n, int d, const std::vector<int>& labels,
                            std::int64_t pair_cap = kDefaultPairCap, std::uint64_t seed = 0,
                            std::int64_t* pairs_used = nullptr, double* intra_out = nullptr);

/// The denominator of group_distance_ratio alone, same sampling rules.
double intra_group_distance(const double* h, int n, int d, const std::vector<int>& labels,
                            std::int64_t pair_cap = kDefaultPairCap, std::uint64_t seed = 0,
                            std::int64_t* pairs_used = nullptr);

/// KDE lower bound on the mutual information between the rows of X and the
/// argmax bin of the logits: max(0, Ĥ(X) − Ĥ(X|Z)) with kernel
/// exp(−‖x_i−x_j‖²/(8σ²)), z_v = argmax_c logits[v,c] (lowest index wins
/// ties) and p_c = P_c/n. Sparse feature rows are exploited, so the n²
/// kernel evaluations cost O(n·nnz-per-row) each.
double instance_info_gain(const double* x, int n, int d, const double* logits, int c,
                          double sigma2 = 1.0);

}  // namespace dgnn::metrics

#endif
