#pragma once

#include <vector>

#include "mvlbm/common.hpp"
#include "mvlbm/core.hpp"
#include "mvlbm/dist.hpp"

namespace mvlbm {

// Full parameter set: joint mixing array, per-set column weights, per-block
// distribution parameters (table indexed k * L + l).
struct ModelState {
    JointMixingArray pi;
    std::vector<std::vector<std::vector<double>>> rho;          // [view][set][l]
    std::vector<std::vector<std::vector<dist::BlockParams>>> alpha;  // [view][set][k*L+l]
    std::vector<ViewSchema> schema;
    std::vector<std::size_t> K;
    std::vector<std::vector<std::size_t>> L;  // [view][set]

    std::size_t n_views() const { return K.size(); }

    const dist::BlockParams& block(std::size_t v, std::size_t s, std::size_t k,
                                   std::size_t l) const {
        return alpha[v][s][k * L[v][s] + l];
    }
    dist::BlockParams& block(std::size_t v, std::size_t s, std::size_t k, std::size_t l) {
        return alpha[v][s][k * L[v][s] + l];
    }
};

// log p(x, z, w; Theta) at fixed labels. A zero-probability joint label or
// column label yields -inf.
inline double complete_data_log_likelihood(const MultiViewDataset& ds, const ModelState& model,
                                           const PartitionState& parts) {
    const std::size_t V = model.n_views();
    double ll = 0.0;

    std::vector<int> joint(V);
    for (std::size_t i = 0; i < ds.n; ++i) {
        for (std::size_t v = 0; v < V; ++v) joint[v] = parts.z[v][i];
        double p = model.pi.at(joint);
        if (!(p > 0.0)) return neg_inf;
        ll += std::log(p);
    }
    for (std::size_t v = 0; v < V; ++v) {
        for (std::size_t s = 0; s < model.schema[v].feature_sets.size(); ++s) {
            const auto& rho = model.rho[v][s];
            for (int l : parts.w[v][s]) {
                if (!(rho[l] > 0.0)) return neg_inf;
                ll += std::log(rho[l]);
            }
        }
    }
    for (std::size_t v = 0; v < V; ++v) {
        for (std::size_t s = 0; s < ds.views[v].sets.size(); ++s) {
            const FeatureSetData& set = ds.views[v].sets[s];
            const bool is_count =
                model.schema[v].feature_sets[s].type.kind == FeatureKind::Count;
            dist::PoissonMargins margins;
            if (is_count) margins = dist::compute_margins(set);
            for (std::size_t i = 0; i < ds.n; ++i) {
                int k = parts.z[v][i];
                for (std::size_t j = 0; j < set.values.cols(); ++j) {
                    if (!set.observed(i, j)) continue;
                    int l = parts.w[v][s][j];
                    ll += dist::log_density(model.block(v, s, k, l), set.values(i, j),
                                            is_count ? &margins : nullptr, {i, j});
                }
            }
        }
    }
    return ll;
}

}  // namespace mvlbm
