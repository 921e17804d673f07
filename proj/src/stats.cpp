#include "phenoscreen/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "phenoscreen/error.hpp"

namespace phenoscreen {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNormFloor = 1e-12;

template <typename T>
double cosine_impl(std::span<const T> u, std::span<const T> v) {
    if (u.size() != v.size()) {
        fail("dimension_mismatch", "cosine of vectors with dimensions " +
                                       std::to_string(u.size()) + " and " +
                                       std::to_string(v.size()));
    }
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double a = u[i], b = v[i];
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    const double denom = std::sqrt(nu) * std::sqrt(nv);
    if (std::sqrt(nu) < kNormFloor || std::sqrt(nv) < kNormFloor) {
        fail("zero_norm", "cosine of a zero-norm vector");
    }
    return std::clamp(dot / denom, -1.0, 1.0);
}

}  // namespace

double cosine_similarity(std::span<const float> u, std::span<const float> v) {
    return cosine_impl(u, v);
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    return cosine_impl(u, v);
}

double mean_pairwise_similarity(std::span<const float> vectors, std::size_t n,
                                std::size_t dim) {
    if (n == 0) fail("empty_input", "mean_pairwise_similarity of zero vectors");
    if (vectors.size() != n * dim) {
        fail("dimension_mismatch", "vector storage size mismatch");
    }
    std::vector<double> acc(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const float* row = vectors.data() + i * dim;
        double norm2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) norm2 += double(row[j]) * double(row[j]);
        const double norm = std::sqrt(norm2);
        if (norm < kNormFloor) fail("zero_norm", "zero-norm member at row " + std::to_string(i));
        for (std::size_t j = 0; j < dim; ++j) acc[j] += double(row[j]) / norm;
    }
    double sum2 = 0.0;
    for (const double a : acc) sum2 += a * a;
    const double nn = static_cast<double>(n);
    return std::clamp(sum2 / (nn * nn), -1.0, 1.0);
}

double permutation_pvalue(double observed, std::span<const double> null_stats) {
    if (null_stats.empty()) fail("empty_input", "permutation p-value with empty null");
    std::size_t count = 0;
    for (const double s : null_stats) {
        if (s >= observed) ++count;
    }
    if (count == 0) count = 1;
    return static_cast<double>(count) / static_cast<double>(null_stats.size());
}

double cauchy_combine(std::span<const double> pvalues) {
    if (pvalues.empty()) fail("empty_input", "cauchy_combine of empty list");
    double t = 0.0;
    for (const double p : pvalues) {
        const double pc = std::clamp(p, 1e-15, 1.0 - 1e-15);
        t += std::tan((0.5 - pc) * kPi);
    }
    t /= static_cast<double>(pvalues.size());
    return 0.5 - std::atan(t) / kPi;
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) fail("empty_input", "KS with an empty sample");
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    // Integer counts keep the sup exact; one division at the end.
    const std::uint64_t na = sa.size();
    const std::uint64_t nb = sb.size();
    std::uint64_t sup = 0;
    std::size_t i = 0, j = 0;
    while (i < sa.size() && j < sb.size()) {
        const double x = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] <= x) ++i;
        while (j < sb.size() && sb[j] <= x) ++j;
        const std::uint64_t lhs = i * nb;
        const std::uint64_t rhs = j * na;
        sup = std::max(sup, lhs > rhs ? lhs - rhs : rhs - lhs);
    }
    return static_cast<double>(sup) /
           (static_cast<double>(na) * static_cast<double>(nb));
}

double cvm_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) fail("empty_input", "CVM with an empty sample");
    if (a.size() != b.size()) {
        fail("unequal_samples", "CVM requires equal cardinalities, got " +
                                    std::to_string(a.size()) + " and " +
                                    std::to_string(b.size()));
    }
    const std::size_t n = a.size();
    // Pooled order with a-before-b at ties: stable sort over (value, source)
    // where source a precedes b.
    struct Entry {
        double value;
        bool from_b;
    };
    std::vector<Entry> pool;
    pool.reserve(2 * n);
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    for (const double v : sa) pool.push_back({v, false});
    for (const double v : sb) pool.push_back({v, true});
    std::stable_sort(pool.begin(), pool.end(),
                     [](const Entry& x, const Entry& y) { return x.value < y.value; });
    double sum = 0.0;
    std::size_t ra = 0, rb = 0;
    for (std::size_t pos = 0; pos < pool.size(); ++pos) {
        const double rank = static_cast<double>(pos + 1);
        if (!pool[pos].from_b) {
            ++ra;
            const double d = rank - static_cast<double>(ra);
            sum += d * d;
        } else {
            ++rb;
            const double d = rank - static_cast<double>(rb);
            sum += d * d;
        }
    }
    const double nn = static_cast<double>(n);
    return sum / (2.0 * nn * nn) - (4.0 * nn * nn - 1.0) / (12.0 * nn);
}

TwoSampleStat two_sample_stat(std::span<const double> a, std::span<const double> b) {
    return {ks_two_sample(a, b), cvm_two_sample(a, b), a.size()};
}

namespace {

template <typename T>
std::vector<double> spherical_mean_impl(std::span<const T> vectors, std::size_t n,
                                        std::size_t dim) {
    if (n == 0) fail("empty_input", "spherical_mean of zero vectors");
    if (vectors.size() != n * dim) {
        fail("dimension_mismatch", "vector storage size mismatch");
    }
    std::vector<double> acc(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = vectors.data() + i * dim;
        double norm2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) norm2 += double(row[j]) * double(row[j]);
        const double norm = std::sqrt(norm2);
        if (norm < kNormFloor) fail("zero_norm", "zero-norm member at row " + std::to_string(i));
        for (std::size_t j = 0; j < dim; ++j) acc[j] += double(row[j]) / norm;
    }
    double norm2 = 0.0;
    for (double& x : acc) {
        x /= static_cast<double>(n);
        norm2 += x * x;
    }
    const double norm = std::sqrt(norm2);
    if (norm < kNormFloor) {
        fail("degenerate_mean", "spherical mean degenerates to zero norm");
    }
    for (double& x : acc) x /= norm;
    return acc;
}

}  // namespace

std::vector<double> spherical_mean(std::span<const float> vectors, std::size_t n,
                                   std::size_t dim) {
    return spherical_mean_impl(vectors, n, dim);
}

std::vector<double> spherical_mean_d(std::span<const double> vectors, std::size_t n,
                                     std::size_t dim) {
    return spherical_mean_impl(vectors, n, dim);
}

std::vector<double> midranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
        i = j + 1;
    }
    return ranks;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        fail("dimension_mismatch", "spearman_rho length mismatch");
    }
    if (x.size() < 2) fail("empty_input", "spearman_rho needs at least 2 points");
    const std::vector<double> rx = midranks(x);
    const std::vector<double> ry = midranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = rx[i] - mx;
        const double dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx < kNormFloor || syy < kNormFloor) {
        fail("zero_variance", "spearman_rho with zero rank variance");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace phenoscreen
