#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mvlbm/common.hpp"
#include "mvlbm/core.hpp"
#include "mvlbm/dist.hpp"
#include "mvlbm/model.hpp"
#include "mvlbm/synthgen.hpp"

namespace mvlbm::metrics {

// Per-view block-parameter table flattened to comparable vectors. Count
// blocks are expressed as the implied mean cell rate so that direct-rate
// generator tables and margin-normalized fitted tables live on one scale.
struct ParamTable {
    std::size_t K = 0;
    std::vector<std::size_t> L;
    std::vector<FeatureType> types;
    std::vector<std::vector<std::vector<double>>> vecs;  // [set][k*L+l]
};

inline std::vector<double> param_vector(const dist::BlockParams& params,
                                        double mean_margin_product) {
    if (const auto* mn = std::get_if<dist::Multinomial>(&params)) return mn->p;
    if (const auto* b = std::get_if<dist::Bos>(&params))
        return {static_cast<double>(b->mu), b->beta};
    if (const auto* g = std::get_if<dist::Gaussian>(&params))
        return {g->mu, std::sqrt(g->sigma2)};
    double delta = std::get<dist::Poisson>(params).delta;
    return {delta * mean_margin_product};
}

// mean(n_i.) * mean(n_.j) for one count set; the delta -> rate conversion.
inline double mean_margin_product(const FeatureSetData& set) {
    auto m = dist::compute_margins(set);
    double r = std::accumulate(m.row_sums.begin(), m.row_sums.end(), 0.0) /
               static_cast<double>(std::max<std::size_t>(m.row_sums.size(), 1));
    double c = std::accumulate(m.col_sums.begin(), m.col_sums.end(), 0.0) /
               static_cast<double>(std::max<std::size_t>(m.col_sums.size(), 1));
    return r * c;
}

inline ParamTable table_from_model(const ModelState& model, std::size_t v,
                                   const MultiViewDataset& ds) {
    ParamTable t;
    t.K = model.K[v];
    t.L = model.L[v];
    for (std::size_t s = 0; s < model.schema[v].feature_sets.size(); ++s) {
        const auto& fs = model.schema[v].feature_sets[s];
        t.types.push_back(fs.type);
        double mmp =
            fs.type.kind == FeatureKind::Count ? mean_margin_product(ds.views[v].sets[s]) : 0.0;
        std::vector<std::vector<double>> blocks;
        for (const auto& params : model.alpha[v][s]) blocks.push_back(param_vector(params, mmp));
        t.vecs.push_back(std::move(blocks));
    }
    return t;
}

// Generator tables already carry direct rates, so no margin conversion.
inline ParamTable table_from_spec(const synthgen::GeneratorSpec& spec, std::size_t v) {
    ParamTable t;
    t.K = spec.K;
    t.L = spec.L[v];
    for (std::size_t s = 0; s < spec.schema[v].feature_sets.size(); ++s) {
        t.types.push_back(spec.schema[v].feature_sets[s].type);
        std::vector<std::vector<double>> blocks;
        for (const auto& params : spec.alpha[v][s]) blocks.push_back(param_vector(params, 1.0));
        t.vecs.push_back(std::move(blocks));
    }
    return t;
}

namespace detail {

inline double abs_diff_sum(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

// For a fixed row permutation, the best column permutation of one set.
inline double best_col_perm_cost(const std::vector<std::vector<double>>& truth,
                                 const std::vector<std::vector<double>>& est,
                                 const std::vector<int>& row_perm, std::size_t L) {
    std::size_t K = row_perm.size();
    std::vector<int> col_perm(L);
    std::iota(col_perm.begin(), col_perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double cost = 0.0;
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t l = 0; l < L; ++l)
                cost += abs_diff_sum(truth[k * L + l], est[row_perm[k] * L + col_perm[l]]);
        best = std::min(best, cost);
    } while (std::next_permutation(col_perm.begin(), col_perm.end()));
    return best;
}

}  // namespace detail

struct AlignmentResult {
    double overall_mae = 0.0;
    // [set][component]: MAE per parameter-vector position at the best matching
    std::vector<std::vector<double>> component_mae;
};

// Mean absolute parameter error, minimized over row-cluster relabelings
// (shared across the view's sets) and per-set column relabelings.
inline AlignmentResult aligned_param_error(const ParamTable& truth, const ParamTable& est) {
    if (truth.K != est.K || truth.L != est.L)
        throw data_error("aligned_param_error: tables have different block structure");
    std::size_t entries = 0;
    for (const auto& set : truth.vecs)
        for (const auto& vec : set) entries += vec.size();
    AlignmentResult out;
    if (entries == 0) return out;

    std::vector<int> row_perm(truth.K);
    std::iota(row_perm.begin(), row_perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_row_perm;
    do {
        double cost = 0.0;
        for (std::size_t s = 0; s < truth.vecs.size(); ++s)
            cost += detail::best_col_perm_cost(truth.vecs[s], est.vecs[s], row_perm, truth.L[s]);
        if (cost < best) {
            best = cost;
            best_row_perm = row_perm;
        }
    } while (std::next_permutation(row_perm.begin(), row_perm.end()));
    out.overall_mae = best / static_cast<double>(entries);

    // redo the per-set column matching at the winning row permutation to get
    // the per-component breakdown
    out.component_mae.resize(truth.vecs.size());
    for (std::size_t s = 0; s < truth.vecs.size(); ++s) {
        std::size_t L = truth.L[s];
        std::size_t dim = truth.vecs[s].empty() ? 0 : truth.vecs[s][0].size();
        std::vector<int> col_perm(L), best_col;
        std::iota(col_perm.begin(), col_perm.end(), 0);
        double set_best = std::numeric_limits<double>::infinity();
        do {
            double cost = 0.0;
            for (std::size_t k = 0; k < truth.K; ++k)
                for (std::size_t l = 0; l < L; ++l)
                    cost += detail::abs_diff_sum(
                        truth.vecs[s][k * L + l],
                        est.vecs[s][best_row_perm[k] * L + col_perm[l]]);
            if (cost < set_best) {
                set_best = cost;
                best_col = col_perm;
            }
        } while (std::next_permutation(col_perm.begin(), col_perm.end()));
        std::vector<double> comp(dim, 0.0);
        for (std::size_t k = 0; k < truth.K; ++k)
            for (std::size_t l = 0; l < L; ++l) {
                const auto& t = truth.vecs[s][k * L + l];
                const auto& e = est.vecs[s][best_row_perm[k] * L + best_col[l]];
                for (std::size_t x = 0; x < dim; ++x) comp[x] += std::abs(t[x] - e[x]);
            }
        for (double& c : comp) c /= static_cast<double>(truth.K * L);
        out.component_mae[s] = std::move(comp);
    }
    return out;
}

inline double aligned_param_mae(const ParamTable& truth, const ParamTable& est) {
    return aligned_param_error(truth, est).overall_mae;
}

struct ImputationError {
    double mae = 0.0;
    std::size_t cells = 0;
};

// MAE of imputed values against the unmasked truth, over masked cells only.
// `masked` supplies the observation pattern; `imputed` has every cell filled.
inline ImputationError imputation_mae(const MultiViewDataset& truth,
                                      const MultiViewDataset& masked,
                                      const MultiViewDataset& imputed) {
    if (masked.views.size() != truth.views.size() ||
        imputed.views.size() != truth.views.size())
        throw data_error("imputation_mae: datasets have different view counts");
    ImputationError out;
    double total = 0.0;
    for (std::size_t v = 0; v < truth.views.size(); ++v) {
        if (masked.views[v].sets.size() != truth.views[v].sets.size() ||
            imputed.views[v].sets.size() != truth.views[v].sets.size())
            throw data_error("imputation_mae: datasets have different set counts");
        for (std::size_t s = 0; s < truth.views[v].sets.size(); ++s) {
            const auto& t = truth.views[v].sets[s].values;
            const auto& mask = masked.views[v].sets[s].observed;
            const auto& imp = imputed.views[v].sets[s].values;
            if (mask.rows() != t.rows() || mask.cols() != t.cols() ||
                imp.rows() != t.rows() || imp.cols() != t.cols())
                throw data_error("imputation_mae: datasets have different cell shapes");
            for (std::size_t i = 0; i < t.rows(); ++i)
                for (std::size_t j = 0; j < t.cols(); ++j)
                    if (!mask(i, j)) {
                        total += std::abs(imp(i, j) - t(i, j));
                        out.cells++;
                    }
        }
    }
    out.mae = out.cells ? total / static_cast<double>(out.cells) : 0.0;
    return out;
}

}  // namespace mvlbm::metrics
