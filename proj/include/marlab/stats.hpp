#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace marlab {

inline double mean(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean of empty vector");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Unbiased sample variance.
inline double variance(const std::vector<double>& v) {
    if (v.size() < 2) throw std::invalid_argument("variance needs >= 2 samples");
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / static_cast<double>(v.size() - 1);
}

/// Exact one-sided sign test on paired differences d_i = a_i - b_i.
/// H0: median difference <= 0. Returns P(#positives >= observed | Binomial(m, 1/2))
/// where m counts the non-zero differences (ties are dropped).
inline double sign_test_p(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("sign test: size mismatch");
    int pos = 0, m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d == 0.0) continue;
        ++m;
        if (d > 0.0) ++pos;
    }
    if (m == 0) return 1.0;  // all ties: no evidence either way
    // Tail sum of Binomial(m, 1/2) from pos upward, done in exact integers.
    // m is small (a handful of seeds), so binomials fit comfortably in 64 bits.
    double tail = 0.0;
    for (int k = pos; k <= m; ++k) {
        double c = 1.0;
        for (int j = 0; j < k; ++j) c = c * static_cast<double>(m - j) / static_cast<double>(j + 1);
        tail += c;
    }
    return tail * std::pow(0.5, m);
}

/// Exact one-sided Wilcoxon signed-rank test on paired differences.
/// H0: symmetric about 0 vs H1: a tends to exceed b. Zero differences are
/// dropped; ties in |d| get midranks. The null distribution is enumerated by
/// dynamic programming over doubled ranks (so midranks stay integral), which
/// is the exact permutation distribution conditional on the observed |d|.
inline double wilcoxon_signed_rank_p(const std::vector<double>& a,
                                     const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("wilcoxon: size mismatch");
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double di = a[i] - b[i];
        if (di != 0.0) d.push_back(di);
    }
    const int n = static_cast<int>(d.size());
    if (n == 0) return 1.0;
    if (n > 30) throw std::invalid_argument("wilcoxon: exact test limited to n <= 30");

    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](int i, int j) { return std::fabs(d[i]) < std::fabs(d[j]); });

    // Midranks, doubled to keep them integral under ties.
    std::vector<int> rank2(n);
    for (int i = 0; i < n;) {
        int j = i;
        while (j < n && std::fabs(d[idx[j]]) == std::fabs(d[idx[i]])) ++j;
        const int r2 = (i + 1) + j;  // 2 * average of ranks i+1 .. j
        for (int k = i; k < j; ++k) rank2[idx[k]] = r2;
        i = j;
    }

    int w2_obs = 0, total2 = 0;
    for (int i = 0; i < n; ++i) {
        total2 += rank2[i];
        if (d[i] > 0.0) w2_obs += rank2[i];
    }

    // dp[w] = number of sign assignments whose positive-rank sum (doubled) is w.
    std::vector<double> dp(total2 + 1, 0.0);
    dp[0] = 1.0;
    for (int i = 0; i < n; ++i) {
        for (int w = total2; w >= rank2[i]; --w) dp[w] += dp[w - rank2[i]];
    }
    double tail = 0.0;
    for (int w = w2_obs; w <= total2; ++w) tail += dp[w];
    return tail * std::pow(0.5, n);
}

/// Least-squares slope of log(y) against log(x). Values of y below `floor`
/// are clamped up to it before taking logs (regret curves can dip to zero
/// early on). x must be strictly positive and contain >= 2 distinct values.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y,
                           double floor = 1.0) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("loglog_slope: need >= 2 paired samples");
    std::vector<double> lx(x.size()), ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] <= 0.0) throw std::invalid_argument("loglog_slope: x must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(std::max(y[i], floor));
    }
    const double mx = mean(lx), my = mean(ly);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("loglog_slope: x values all equal");
    return sxy / sxx;
}

}  // namespace marlab
