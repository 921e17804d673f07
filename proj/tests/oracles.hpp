#pragma once

// Independent reference implementations used only to validate the library.
// Deliberately naive (quadratic loops, full sorts, extended precision) and
// sharing no code with the implementation under test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace oracle {

inline double cosine(std::span<const double> a, std::span<const double> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Double loop over all ordered pairs, diagonal included.
inline double mean_pairwise(const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            total += cosine(rows[i], rows[j]);
        }
    }
    return total / (static_cast<double>(n) * static_cast<double>(n));
}

inline double ecdf_at(const std::vector<double>& sorted, double z) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), z);
    return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

// sup |F_a - F_b| over every pooled observation.
inline double ks(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    double sup = 0.0;
    for (const double z : pooled) {
        sup = std::max(sup, std::fabs(ecdf_at(a, z) - ecdf_at(b, z)));
    }
    return sup;
}

// ECDF-integral form: T = nm/(n+m)^2 * sum over pooled z of (F_a(z)-F_b(z))^2.
inline double cvm(std::vector<double> a, std::vector<double> b) {
    const double n = static_cast<double>(a.size());
    const double m = static_cast<double>(b.size());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    double total = 0.0;
    for (const double z : pooled) {
        const double d = ecdf_at(a, z) - ecdf_at(b, z);
        total += d * d;
    }
    return n * m / ((n + m) * (n + m)) * total;
}

// Average ranks by explicit tie groups (1-based).
inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(ranks(x), ranks(y));
}

// Extended-precision Cauchy combination with the same [1e-15, 1-1e-15] clamp.
inline double cauchy(std::vector<double> ps) {
    const long double pi = 3.14159265358979323846264338327950288L;
    long double t = 0.0L;
    for (double p : ps) {
        const long double c =
            std::min<long double>(1.0L - 1e-15L, std::max<long double>(1e-15L, p));
        t += std::tan((0.5L - c) * pi);
    }
    t /= static_cast<long double>(ps.size());
    return static_cast<double>(0.5L - std::atan(t) / pi);
}

// Full-sort quantile with linear interpolation between order statistics.
inline double quantile(std::vector<float> v, double q) {
    std::sort(v.begin(), v.end());
    const double h = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= v.size()) return v.back();
    const double frac = h - std::floor(h);
    return (1.0 - frac) * v[lo] + frac * v[lo + 1];
}

inline std::vector<double> column_means(const std::vector<std::vector<double>>& rows) {
    std::vector<double> m(rows.front().size(), 0.0);
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < m.size(); ++j) m[j] += r[j];
    }
    for (double& x : m) x /= static_cast<double>(rows.size());
    return m;
}

// Population covariance (1/n).
inline std::vector<std::vector<double>> covariance(
    const std::vector<std::vector<double>>& rows) {
    const std::vector<double> mean = column_means(rows);
    const std::size_t d = mean.size();
    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    for (auto& row : cov) {
        for (double& x : row) x /= static_cast<double>(rows.size());
    }
    return cov;
}

}  // namespace oracle
