#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mvlbm/common.hpp"
#include "mvlbm/core.hpp"
#include "mvlbm/dist.hpp"

namespace mvlbm::synthgen {

// Ground-truth generator spec. Block parameter tables are indexed k*L + l.
// Count blocks carry the direct cell rate (Poisson{delta} holds lambda_kl
// here, not the margin-normalized delta the fitted model uses).
struct GeneratorSpec {
    std::size_t n = 0;
    std::size_t K = 3;           // shared row-cluster count (V = 2)
    double delta_dep = 0.0;      // 0: independent views, 1: identical clusterings
    std::vector<ViewSchema> schema;
    std::vector<std::vector<std::size_t>> L;                         // [view][set]
    std::vector<std::vector<std::vector<double>>> rho;               // [view][set][l]
    std::vector<std::vector<std::vector<dist::BlockParams>>> alpha;  // [view][set][k*L+l]
    double missing_fraction = 0.0;
    std::uint64_t seed = 0;
};

struct GeneratedData {
    MultiViewDataset dataset;
    std::vector<std::vector<int>> row_labels;               // [view][row]
    std::vector<std::vector<std::vector<int>>> col_labels;  // [view][set][col]
};

inline MultiViewDataset mask_missing(const MultiViewDataset& ds, double fraction, Rng rng);

// pi = ((1-delta)/K^2) 1 1^T + (delta/K) I
inline JointMixingArray make_pi(std::size_t K, double delta_dep) {
    if (K < 1) throw data_error("make_pi: K must be >= 1");
    if (delta_dep < 0.0 || delta_dep > 1.0)
        throw data_error("make_pi: delta must lie in [0, 1]");
    JointMixingArray pi({K, K});
    double off = (1.0 - delta_dep) / static_cast<double>(K * K);
    double diag = delta_dep / static_cast<double>(K);
    for (std::size_t a = 0; a < K; ++a)
        for (std::size_t b = 0; b < K; ++b)
            pi.at({static_cast<int>(a), static_cast<int>(b)}) = off + (a == b ? diag : 0.0);
    return pi;
}

inline GeneratedData generate(const GeneratorSpec& spec) {
    const std::size_t V = spec.schema.size();
    if (V != 2) throw data_error("generate: the dependency-controlled generator is two-view");

    Rng rng = derive_rng(spec.seed, 0xF0);
    JointMixingArray pi = make_pi(spec.K, spec.delta_dep);

    GeneratedData out;
    out.dataset.n = spec.n;
    out.row_labels.assign(V, std::vector<int>(spec.n));
    out.col_labels.resize(V);

    for (std::size_t i = 0; i < spec.n; ++i) {
        std::size_t f = sample_index(pi.data(), rng);
        auto joint = pi.unflatten(f);
        for (std::size_t v = 0; v < V; ++v) out.row_labels[v][i] = joint[v];
    }

    for (std::size_t v = 0; v < V; ++v) {
        View view;
        view.schema = spec.schema[v];
        out.col_labels[v].resize(view.schema.feature_sets.size());
        for (std::size_t s = 0; s < view.schema.feature_sets.size(); ++s) {
            const auto& fs = view.schema.feature_sets[s];
            const std::size_t L = spec.L[v][s];
            auto& labels = out.col_labels[v][s];
            labels.resize(fs.cols);
            for (std::size_t j = 0; j < fs.cols; ++j)
                labels[j] = static_cast<int>(sample_index(spec.rho[v][s], rng));

            FeatureSetData data;
            data.values = Matrix(spec.n, fs.cols);
            data.observed = BoolMatrix(spec.n, fs.cols, true);
            for (std::size_t i = 0; i < spec.n; ++i) {
                int k = out.row_labels[v][i];
                for (std::size_t j = 0; j < fs.cols; ++j) {
                    const auto& params = spec.alpha[v][s][k * L + labels[j]];
                    double x;
                    if (const auto* po = std::get_if<dist::Poisson>(&params)) {
                        x = po->delta > 0.0
                                ? static_cast<double>(
                                      std::poisson_distribution<long>(po->delta)(rng))
                                : 0.0;
                    } else {
                        x = dist::sample(params, rng);
                    }
                    data.values(i, j) = x;
                }
            }
            view.sets.push_back(std::move(data));
        }
        out.dataset.views.push_back(std::move(view));
    }

    if (spec.missing_fraction > 0.0)
        out.dataset = mask_missing(out.dataset, spec.missing_fraction,
                                   derive_rng(spec.seed, 0xF1));
    return out;
}

// Masks exactly floor(fraction * total cells) cells, uniformly without
// replacement across all views.
inline MultiViewDataset mask_missing(const MultiViewDataset& ds, double fraction, Rng rng) {
    if (fraction < 0.0 || fraction >= 1.0)
        throw data_error("mask_missing: fraction must lie in [0, 1)");
    MultiViewDataset out = ds;
    std::size_t total = ds.total_cells();
    std::size_t n_mask = static_cast<std::size_t>(fraction * static_cast<double>(total));
    if (n_mask == 0) return out;

    std::vector<std::size_t> cells(total);
    std::iota(cells.begin(), cells.end(), 0);
    for (std::size_t i = 0; i < n_mask; ++i) {
        std::size_t j = i + rng() % (total - i);
        std::swap(cells[i], cells[j]);
    }
    cells.resize(n_mask);
    std::sort(cells.begin(), cells.end());

    // flat order: views, then sets, then row-major cells
    std::size_t base = 0;
    std::size_t idx = 0;
    for (auto& view : out.views) {
        for (auto& set : view.sets) {
            std::size_t count = set.values.rows() * set.values.cols();
            while (idx < cells.size() && cells[idx] < base + count) {
                std::size_t off = cells[idx] - base;
                set.observed.set(off / set.values.cols(), off % set.values.cols(), false);
                idx++;
            }
            base += count;
        }
    }
    return out;
}

// The benchmark configuration: two views, four feature sets each
// (nominal m=5, continuous, ordinal m=3, count), three row and three column
// clusters, uniform cluster weights.
inline GeneratorSpec benchmark_spec(std::size_t n, double delta_dep, std::size_t d_per_set,
                                    std::uint64_t seed) {
    GeneratorSpec spec;
    spec.n = n;
    spec.K = 3;
    spec.delta_dep = delta_dep;
    spec.seed = seed;

    ViewSchema schema;
    schema.feature_sets = {
        {{FeatureKind::Nominal, 5}, d_per_set},
        {{FeatureKind::Continuous, 0}, d_per_set},
        {{FeatureKind::Ordinal, 3}, d_per_set},
        {{FeatureKind::Count, 0}, d_per_set},
    };

    auto multinomial = [](std::initializer_list<double> p) {
        return dist::BlockParams(dist::Multinomial{std::vector<double>(p)});
    };
    auto gaussian = [](double mu, double sd) {
        return dist::BlockParams(dist::Gaussian{mu, sd * sd});
    };
    auto bos3 = [](int mu, double beta) { return dist::BlockParams(dist::Bos{3, mu, beta}); };
    auto count = [](double rate) { return dist::BlockParams(dist::Poisson{rate}); };

    std::vector<dist::BlockParams> nominal = {
        multinomial({0.05, 0.05, 0.8, 0.05, 0.05}), multinomial({0.1, 0.25, 0.3, 0.3, 0.05}),
        multinomial({0.1, 0.2, 0.4, 0.2, 0.1}),
        multinomial({0.05, 0.1, 0.7, 0.1, 0.05}),  multinomial({0.8, 0.05, 0.05, 0.05, 0.05}),
        multinomial({0.4, 0.05, 0.1, 0.05, 0.4}),
        multinomial({0.2, 0.5, 0.2, 0.05, 0.05}),  multinomial({0.8, 0.05, 0.05, 0.05, 0.05}),
        multinomial({0.05, 0.8, 0.05, 0.05, 0.05}),
    };
    std::vector<dist::BlockParams> continuous = {
        gaussian(100, 1), gaussian(0.5, 5), gaussian(-90, 5),
        gaussian(10, 4),  gaussian(-15, 1), gaussian(-95, 5),
        gaussian(-20, 1), gaussian(-30, 3), gaussian(500, 4),
    };
    std::vector<dist::BlockParams> ordinal = {
        bos3(3, 0.4), bos3(1, 0.2), bos3(3, 0.7),
        bos3(2, 0.1), bos3(3, 0.5), bos3(2, 0.8),
        bos3(2, 0.5), bos3(1, 0.8), bos3(2, 0.2),
    };
    std::vector<dist::BlockParams> counts = {
        count(8.7),  count(1.95), count(8.16),
        count(1.33), count(1.95), count(25.0),
        count(7.27), count(7.14), count(2.76),
    };

    for (int v = 0; v < 2; ++v) {
        spec.schema.push_back(schema);
        spec.L.push_back({3, 3, 3, 3});
        spec.rho.push_back(std::vector<std::vector<double>>(
            4, std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}));
        spec.alpha.push_back({nominal, continuous, ordinal, counts});
    }
    return spec;
}

}  // namespace mvlbm::synthgen
