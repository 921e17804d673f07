#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace phenoscreen {

struct PermutationConfig {
    std::uint64_t K = 1000;  // null-sample count, >= 1
    std::uint64_t seed = 0;
};

// Two-sample distances for one replicate pair; n is the per-sample cardinality.
struct TwoSampleStat {
    double ks = 0.0;
    double cvm = 0.0;
    std::size_t n = 0;
};

// <u,v>/(|u||v|), accumulated in double, clamped to [-1,1].
// Throws on zero-norm (< 1e-12) input.
double cosine_similarity(std::span<const float> u, std::span<const float> v);
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// (1/n^2) * sum_{i,j} cos(x_i, x_j), the diagonal included.
// `vectors` is n rows of `dim` floats, row-major. O(n*dim) via the
// norm-of-sum identity: with u_i = x_i/|x_i|, the statistic is |sum u_i|^2/n^2.
double mean_pairwise_similarity(std::span<const float> vectors, std::size_t n,
                                std::size_t dim);

// max(#{null >= observed}, 1) / K.
double permutation_pvalue(double observed, std::span<const double> null_stats);

// Cauchy combination: T = mean(tan((0.5 - p)*pi)); returns 0.5 - atan(T)/pi.
// Inputs are clamped to [1e-15, 1 - 1e-15] before the transform.
double cauchy_combine(std::span<const double> pvalues);

// sup_x |ECDF_a(x) - ECDF_b(x)| over the pooled points.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

// Equal-N two-sample Cramer-von Mises via pooled ranks:
//   (1/(2N^2)) * sum_m [(r_m - m)^2 + (s_m - m)^2] - (4N^2 - 1)/(12N)
// Ties in the pooled ordering break with a's elements before b's.
double cvm_two_sample(std::span<const double> a, std::span<const double> b);

TwoSampleStat two_sample_stat(std::span<const double> a, std::span<const double> b);

// L2-normalize each row, average, re-normalize. Throws if the mean vector is
// degenerate (norm < 1e-12).
std::vector<double> spherical_mean(std::span<const float> vectors, std::size_t n,
                                   std::size_t dim);
std::vector<double> spherical_mean_d(std::span<const double> vectors, std::size_t n,
                                     std::size_t dim);

// Midranks (average rank for ties), 1-based.
std::vector<double> midranks(std::span<const double> values);

// Pearson correlation of midranks. Throws on length mismatch, length < 2, or
// zero rank variance.
double spearman_rho(std::span<const double> x, std::span<const double> y);

}  // namespace phenoscreen
