#ifndef CASCADE_LAB_COUNTING_HPP
#define CASCADE_LAB_COUNTING_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "cascade_lab/errors.hpp"
#include "cascade_lab/orbits.hpp"

namespace cascade_lab {

/// Number of nondecreasing sequences 0 <= l_1 <= ... <= l_parts summing to r
/// (partitions of r into at most `parts` parts).
inline std::uint64_t partition_count(int r, int parts) {
    if (r < 0 || parts < 1) throw ArgumentError("partition_count needs r >= 0 and parts >= 1");
    // p[j][s]: partitions of s into at most j parts.
    std::vector<std::uint64_t> prev(static_cast<std::size_t>(r) + 1, 0), cur;
    prev[0] = 1;  // zero parts
    for (int j = 1; j <= parts; ++j) {
        cur.assign(prev.size(), 0);
        for (int s = 0; s <= r; ++s) {
            std::uint64_t v = prev[static_cast<std::size_t>(s)];
            if (s >= j) {
                std::uint64_t add = cur[static_cast<std::size_t>(s - j)];
                if (v > std::numeric_limits<std::uint64_t>::max() - add) throw ResourceError("partition count overflows 64 bits");
                v += add;
            }
            cur[static_cast<std::size_t>(s)] = v;
        }
        prev.swap(cur);
    }
    return prev[static_cast<std::size_t>(r)];
}

inline double factorial(int n) {
    double f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

namespace detail {

/// Upper bound for Σ_{r>=0} P(r) λ^r with P over `parts` parts: partial sum
/// to r0 plus the tail Σ_{r>r0} (r+1)^e λ^r with e = parts, bounded by a
/// geometric series once the term ratio ((r0+3)/(r0+2))^e λ drops below 1.
inline double partition_series_bound(double lambda, int parts) {
    const double e = parts;
    double partial = 0;
    for (int r0 = 0;; ++r0) {
        partial += static_cast<double>(partition_count(r0, parts)) * std::pow(lambda, r0);
        double rho = std::pow((r0 + 3.0) / (r0 + 2.0), e) * lambda;
        if (rho >= 1) continue;
        double tail = std::pow(r0 + 2.0, e) * std::pow(lambda, r0 + 1) / (1 - rho);
        if (tail < 1e-9 * partial) return (partial + tail) * (1 + 1e-12);
        if (r0 > 1000000) throw ResourceError("series truncation did not converge");
    }
}

} // namespace detail

/// M = (n-1)! Σ_r P(r) λ^r with n-1 parts; M = 1 for n = 1.
inline double bound_M(double lambda, int n) {
    if (!(lambda > 0 && lambda < 1)) throw ArgumentError("lambda must lie in (0,1)");
    if (n < 1) throw ArgumentError("n must be >= 1");
    if (n == 1) return 1.0;
    return factorial(n - 1) * detail::partition_series_bound(lambda, n - 1);
}

/// M⁺ = n! Σ_r P(r) λ^r / (1 - λ^ε).
inline double bound_M_plus(double lambda, double epsilon, int n) {
    if (!(lambda > 0 && lambda < 1)) throw ArgumentError("lambda must lie in (0,1)");
    if (!(epsilon > 0 && epsilon < 1)) throw ArgumentError("epsilon must lie in (0,1)");
    if (n < 1) throw ArgumentError("n must be >= 1");
    double series = n == 1 ? 1.0 : detail::partition_series_bound(lambda, n - 1);
    return factorial(n) * series / (1 - std::pow(lambda, epsilon));
}

/// Σ_{levels} N(levels) λ^{Σ levels}.
inline double lemma41_sum(const ClassCensus& census, double lambda) {
    double s = 0;
    for (const auto& [levels, count] : census.N)
        s += static_cast<double>(count) * std::pow(lambda, std::accumulate(levels.begin(), levels.end(), 0));
    return s;
}

/// Σ_{levels, l} N⁺(levels; l) λ^{Σ levels + ε l}.
inline double lemma41_sum_plus(const ClassCensus& census, double lambda, double epsilon) {
    double s = 0;
    for (const auto& [key, count] : census.N_plus) {
        const auto& [levels, l] = key;
        double exponent = std::accumulate(levels.begin(), levels.end(), 0) + epsilon * l;
        s += static_cast<double>(count) * std::pow(lambda, exponent);
    }
    return s;
}

/// Largest N and N⁺ in a census.
inline std::pair<std::uint64_t, std::uint64_t> census_maxima(const ClassCensus& census) {
    std::uint64_t a = 0, b = 0;
    for (const auto& [k, v] : census.N) a = std::max(a, v);
    for (const auto& [k, v] : census.N_plus) b = std::max(b, v);
    return {a, b};
}

} // namespace cascade_lab

#endif // CASCADE_LAB_COUNTING_HPP
