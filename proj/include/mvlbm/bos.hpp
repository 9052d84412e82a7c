#pragma once

#include <array>
#include <cmath>
#include <map>
#include <tuple>
#include <vector>

#include "mvlbm/common.hpp"

namespace mvlbm::bos {

// Binary ordinal search distribution on {1..m}: a value is produced by m-1
// stick-breaking steps. Each step picks a breakpoint uniformly in the current
// interval; with probability beta the sub-interval closest to mu is kept,
// otherwise one is kept at random proportional to its size.

constexpr double beta_clip = 1e-9;

inline double clip_beta(double beta) {
    return std::min(std::max(beta, beta_clip), 1.0 - beta_clip);
}

namespace detail {

inline int interval_distance(int lo, int hi, int mu) {
    if (mu < lo) return lo - mu;
    if (mu > hi) return mu - hi;
    return 0;
}

struct PmfBuilder {
    int m;
    int mu;
    double beta;
    std::map<std::tuple<int, int, int>, std::vector<double>> memo;

    // Distribution over final values for interval [lo, hi] with `steps` left.
    const std::vector<double>& dist(int lo, int hi, int steps) {
        auto key = std::make_tuple(lo, hi, steps);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;

        std::vector<double> out(m, 0.0);
        if (lo == hi) {
            out[lo - 1] = 1.0;
        } else {
            const int size = hi - lo + 1;
            const double inv = 1.0 / size;
            for (int y = lo; y <= hi; ++y) {
                // sub-intervals: left [lo, y-1], middle {y}, right [y+1, hi]
                std::array<std::pair<int, int>, 3> subs = {
                    std::make_pair(lo, y - 1), std::make_pair(y, y),
                    std::make_pair(y + 1, hi)};
                int best = -1, best_d = 0;
                for (int s = 0; s < 3; ++s) {
                    if (subs[s].first > subs[s].second) continue;
                    int d = interval_distance(subs[s].first, subs[s].second, mu);
                    if (best < 0 || d < best_d) {
                        best = s;
                        best_d = d;
                    }
                }
                for (int s = 0; s < 3; ++s) {
                    if (subs[s].first > subs[s].second) continue;
                    int sub_size = subs[s].second - subs[s].first + 1;
                    double p = (1.0 - beta) * sub_size / size;
                    if (s == best) p += beta;
                    if (p <= 0.0) continue;
                    const auto& child = dist(subs[s].first, subs[s].second, steps - 1);
                    for (int r = 0; r < m; ++r) out[r] += inv * p * child[r];
                }
            }
        }
        return memo.emplace(key, std::move(out)).first->second;
    }
};

}  // namespace detail

// Exact PMF over {1..m} by trajectory enumeration.
inline std::vector<double> pmf(int m, int mu, double beta) {
    if (m < 2 || mu < 1 || mu > m) throw data_error("bos::pmf: invalid (m, mu)");
    detail::PmfBuilder builder{m, mu, clip_beta(beta), {}};
    return builder.dist(1, m, m - 1);
}

// One draw by simulating the search trajectory. Returns a level in 1..m.
inline int sample(int m, int mu, double beta, Rng& rng) {
    double b = clip_beta(beta);
    int lo = 1, hi = m;
    for (int step = 0; step < m - 1 && lo < hi; ++step) {
        int size = hi - lo + 1;
        int y = lo + static_cast<int>(std::uniform_int_distribution<int>(0, size - 1)(rng));
        std::array<std::pair<int, int>, 3> subs = {std::make_pair(lo, y - 1),
                                                   std::make_pair(y, y),
                                                   std::make_pair(y + 1, hi)};
        int pick;
        if (uniform01(rng) < b) {
            pick = -1;
            int best_d = 0;
            for (int s = 0; s < 3; ++s) {
                if (subs[s].first > subs[s].second) continue;
                int d = detail::interval_distance(subs[s].first, subs[s].second, mu);
                if (pick < 0 || d < best_d) {
                    pick = s;
                    best_d = d;
                }
            }
        } else {
            std::vector<double> sizes(3, 0.0);
            for (int s = 0; s < 3; ++s)
                if (subs[s].first <= subs[s].second)
                    sizes[s] = subs[s].second - subs[s].first + 1;
            pick = static_cast<int>(sample_index(sizes, rng));
        }
        lo = subs[pick].first;
        hi = subs[pick].second;
    }
    return lo;
}

// Weighted log-likelihood of level counts (index r = level r+1).
inline double weighted_loglik(const std::vector<double>& counts, int m, int mu, double beta) {
    auto table = pmf(m, mu, beta);
    double ll = 0.0;
    for (int r = 0; r < m; ++r) {
        if (counts[r] <= 0.0) continue;
        ll += counts[r] * std::log(std::max(table[r], 1e-300));
    }
    return ll;
}

struct FitResult {
    int mu = 1;
    double beta = 0.0;
    double loglik = neg_inf;
};

// Exhaustive scan over mu, golden-section over beta in [0, 1].
inline FitResult fit(const std::vector<double>& counts, int m, double tol = 1e-6) {
    double total = 0.0;
    for (double c : counts) total += c;
    if (!(total > 0.0)) throw data_error("bos::fit: empty block");

    FitResult best;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int mu = 1; mu <= m; ++mu) {
        double a = 0.0, b = 1.0;
        double c = b - gr * (b - a);
        double d = a + gr * (b - a);
        double fc = weighted_loglik(counts, m, mu, c);
        double fd = weighted_loglik(counts, m, mu, d);
        while (b - a > tol) {
            if (fc > fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = weighted_loglik(counts, m, mu, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = weighted_loglik(counts, m, mu, d);
            }
        }
        double beta = 0.5 * (a + b);
        double ll = weighted_loglik(counts, m, mu, beta);
        // golden section assumes unimodality; also check the endpoints
        for (double cand : {0.0, 1.0}) {
            double ll_cand = weighted_loglik(counts, m, mu, cand);
            if (ll_cand > ll) {
                beta = cand;
                ll = ll_cand;
            }
        }
        if (ll > best.loglik) best = {mu, beta, ll};
    }
    return best;
}

}  // namespace mvlbm::bos
