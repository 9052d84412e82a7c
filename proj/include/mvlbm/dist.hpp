#pragma once

#include <cmath>
#include <optional>
#include <variant>
#include <vector>

#include "mvlbm/bos.hpp"
#include "mvlbm/common.hpp"
#include "mvlbm/core.hpp"

namespace mvlbm::dist {

constexpr double default_variance_floor = 1e-6;

struct Multinomial {
    std::vector<double> p;  // length m, internal levels 0..m-1
};

struct Bos {
    int m = 2;
    int mu = 1;        // position, 1..m
    double beta = 0.0; // precision in [0, 1]
};

struct Gaussian {
    double mu = 0.0;
    double sigma2 = 1.0;
};

struct Poisson {
    double delta = 0.0;  // cell rate is n_i. * n_.j * delta
};

using BlockParams = std::variant<Multinomial, Bos, Gaussian, Poisson>;

// Row/column totals of a count feature set over observed cells.
struct PoissonMargins {
    std::vector<double> row_sums;  // n_i.
    std::vector<double> col_sums;  // n_.j
};

struct CellRef {
    std::size_t i = 0;
    std::size_t j = 0;
};

inline double log_poisson_pmf(double x, double rate) {
    if (rate <= 0.0) return x == 0.0 ? 0.0 : neg_inf;
    return x * std::log(rate) - rate - std::lgamma(x + 1.0);
}

inline double log_density(const BlockParams& params, double x,
                          const PoissonMargins* margins = nullptr,
                          CellRef cell = {}) {
    if (const auto* mn = std::get_if<Multinomial>(&params)) {
        int r = static_cast<int>(x);
        if (r < 0 || r >= static_cast<int>(mn->p.size()))
            throw data_error("log_density: level outside multinomial support");
        return std::log(std::max(mn->p[r], 1e-300));
    }
    if (const auto* b = std::get_if<Bos>(&params)) {
        int r = static_cast<int>(x);
        if (r < 0 || r >= b->m) throw data_error("log_density: level outside BOS support");
        auto table = bos::pmf(b->m, b->mu, b->beta);
        return std::log(std::max(table[r], 1e-300));
    }
    if (const auto* g = std::get_if<Gaussian>(&params)) {
        if (!std::isfinite(x)) throw data_error("log_density: non-finite continuous value");
        double d = x - g->mu;
        return -0.5 * std::log(2.0 * M_PI * g->sigma2) - d * d / (2.0 * g->sigma2);
    }
    const auto& po = std::get<Poisson>(params);
    if (margins == nullptr) throw data_error("log_density: Poisson family requires margins");
    if (x < 0.0 || x != std::floor(x))
        throw data_error("log_density: count value outside support");
    double rate = margins->row_sums[cell.i] * margins->col_sums[cell.j] * po.delta;
    return log_poisson_pmf(x, rate);
}

struct EmptyBlock : data_error {
    EmptyBlock() : data_error("empty block: no weight in M-step") {}
};

inline BlockParams multinomial_update(const std::vector<double>& level_weights) {
    double total = 0.0;
    for (double w : level_weights) total += w;
    if (!(total > 0.0)) throw EmptyBlock();
    Multinomial out;
    out.p.resize(level_weights.size());
    for (std::size_t r = 0; r < level_weights.size(); ++r) out.p[r] = level_weights[r] / total;
    return out;
}

// Weighted MLE: mean and biased variance, floored.
inline BlockParams gaussian_update(const std::vector<std::pair<double, double>>& weighted_values,
                                   double variance_floor = default_variance_floor) {
    double total = 0.0, sum = 0.0;
    for (const auto& [w, x] : weighted_values) {
        total += w;
        sum += w * x;
    }
    if (!(total > 0.0)) throw EmptyBlock();
    double mu = sum / total;
    double ss = 0.0;
    for (const auto& [w, x] : weighted_values) ss += w * (x - mu) * (x - mu);
    return Gaussian{mu, std::max(ss / total, variance_floor)};
}

// delta = block cell sum / (n_k. * n_.l); margins taken over cluster members.
inline BlockParams poisson_update(double block_sum, double row_margin_sum,
                                  double col_margin_sum) {
    double denom = row_margin_sum * col_margin_sum;
    if (!(denom > 0.0)) throw EmptyBlock();
    return Poisson{block_sum / denom};
}

inline BlockParams bos_update(const std::vector<double>& level_weights, int m,
                              double tol = 1e-6) {
    auto fit = bos::fit(level_weights, m, tol);
    return Bos{m, fit.mu, fit.beta};
}

inline double sample(const BlockParams& params, Rng& rng,
                     const PoissonMargins* margins = nullptr, CellRef cell = {}) {
    if (const auto* mn = std::get_if<Multinomial>(&params))
        return static_cast<double>(sample_index(mn->p, rng));
    if (const auto* b = std::get_if<Bos>(&params))
        return static_cast<double>(bos::sample(b->m, b->mu, b->beta, rng) - 1);
    if (const auto* g = std::get_if<Gaussian>(&params))
        return std::normal_distribution<double>(g->mu, std::sqrt(g->sigma2))(rng);
    const auto& po = std::get<Poisson>(params);
    if (margins == nullptr) throw data_error("sample: Poisson family requires margins");
    double rate = margins->row_sums[cell.i] * margins->col_sums[cell.j] * po.delta;
    if (rate <= 0.0) return 0.0;
    return static_cast<double>(std::poisson_distribution<long>(rate)(rng));
}

// Per-block free parameter count used by the ICL penalty.
inline int param_count(const FeatureType& type) {
    switch (type.kind) {
        case FeatureKind::Nominal: return type.levels - 1;
        case FeatureKind::Ordinal: return 2;
        case FeatureKind::Continuous: return 2;
        case FeatureKind::Count: return 1;
    }
    return 0;
}

inline PoissonMargins compute_margins(const FeatureSetData& set) {
    PoissonMargins m;
    m.row_sums.assign(set.values.rows(), 0.0);
    m.col_sums.assign(set.values.cols(), 0.0);
    for (std::size_t i = 0; i < set.values.rows(); ++i)
        for (std::size_t j = 0; j < set.values.cols(); ++j)
            if (set.observed(i, j)) {
                m.row_sums[i] += set.values(i, j);
                m.col_sums[j] += set.values(i, j);
            }
    return m;
}

}  // namespace mvlbm::dist
