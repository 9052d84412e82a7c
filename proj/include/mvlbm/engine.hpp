#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "mvlbm/common.hpp"
#include "mvlbm/core.hpp"
#include "mvlbm/dist.hpp"
#include "mvlbm/model.hpp"

namespace mvlbm {

struct FitConfig {
    int total_iters = 150;
    int burn_in = 100;
    int resample_iters = -1;  // -1: same as burn_in
    double resample_fraction = 0.20;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    double variance_floor = 1e-6;

    int effective_resample_iters() const {
        return resample_iters < 0 ? burn_in : resample_iters;
    }

    void validate(std::size_t joint_cells) const {
        if (burn_in >= total_iters) throw data_error("config: burn_in must be < total_iters");
        if (effective_resample_iters() > burn_in)
            throw data_error("config: resample_iters must be <= burn_in");
        if (lambda < 0.0) throw data_error("config: lambda must be >= 0");
        if (lambda > 0.0 && lambda >= 1.0 / static_cast<double>(joint_cells))
            throw data_error("penalty too large: lambda must be < 1 / (K_1 * ... * K_V)");
    }
};

struct TracePoint {
    double complete_loglik = 0.0;
    std::vector<double> pi;
};

struct FitResult {
    ModelState model;
    PartitionState partitions;
    std::vector<TracePoint> trace;
    MultiViewDataset imputed;
    std::vector<char> dead;  // per joint cell, under the aggregated pi
};

// Theorem-style normalized soft-threshold on the simplex.
inline std::vector<double> soft_threshold_simplex(const std::vector<double>& a, double lambda) {
    std::vector<double> out(a.size());
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = std::max(a[i] - lambda, 0.0);
        total += out[i];
    }
    if (!(total > 0.0)) throw data_error("penalty too large: all mixing weights thresholded");
    for (double& v : out) v /= total;
    return out;
}

class SemGibbsEngine {
  public:
    SemGibbsEngine(const MultiViewDataset& ds, std::vector<std::size_t> K,
                   std::vector<std::vector<std::size_t>> L, FitConfig config)
        : ds_(ds), config_(config) {
        model_.K = std::move(K);
        model_.L = std::move(L);
        if (model_.K.size() != ds.views.size() || model_.L.size() != ds.views.size())
            throw data_error("engine: K/L do not match the number of views");
        for (std::size_t v = 0; v < ds.views.size(); ++v) {
            model_.schema.push_back(ds.views[v].schema);
            if (model_.L[v].size() != ds.views[v].sets.size())
                throw data_error("engine: L does not match feature sets");
        }
        model_.pi = JointMixingArray(model_.K, 0.0);
        config_.validate(model_.pi.size());
        dead_.assign(model_.pi.size(), 0);
        joint_labels_.resize(model_.pi.size());
        for (std::size_t f = 0; f < model_.pi.size(); ++f)
            joint_labels_[f] = model_.pi.unflatten(f);
        precompute_margins();
    }

    const ModelState& model() const { return model_; }
    ModelState& model() { return model_; }
    PartitionState& parts() { return parts_; }
    const std::vector<char>& dead() const { return dead_; }

    void init_partitions(const PartitionState* init) {
        if (init != nullptr) {
            parts_ = *init;
            check_partitions();
            return;
        }
        const std::size_t V = ds_.views.size();
        parts_.z.assign(V, {});
        parts_.w.assign(V, {});
        for (std::size_t v = 0; v < V; ++v) {
            bool all_continuous = true;
            for (const auto& fs : model_.schema[v].feature_sets)
                if (fs.type.kind != FeatureKind::Continuous) all_continuous = false;
            if (all_continuous && model_.K[v] > 1)
                parts_.z[v] = kmeanspp_rows(v);
            else {
                parts_.z[v].resize(ds_.n);
                for (std::size_t i = 0; i < ds_.n; ++i) {
                    Rng rng = derive_rng(config_.seed, 0xA0, v, i);
                    parts_.z[v][i] = static_cast<int>(rng() % model_.K[v]);
                }
            }
            parts_.w[v].resize(ds_.views[v].sets.size());
            for (std::size_t s = 0; s < ds_.views[v].sets.size(); ++s) {
                std::size_t d = ds_.views[v].sets[s].values.cols();
                if (model_.L[v][s] > 1)
                    parts_.w[v][s] = kmeanspp_cols(v, s);
                else
                    parts_.w[v][s].assign(d, 0);
            }
        }
    }

    // Full parameter refresh from the current partitions (lambda = 0).
    void mstep_from_partitions() {
        update_pi(0.0);
        update_rho();
        update_alpha();
    }

    // --- SEM-Gibbs steps -------------------------------------------------

    void sample_rows(int iter) {
        auto loglik = row_logliks(model_);
        std::vector<double> logw(model_.pi.size());
        std::vector<double> logpi(model_.pi.size());
        for (std::size_t f = 0; f < model_.pi.size(); ++f)
            logpi[f] = (dead_[f] || !(model_.pi[f] > 0.0)) ? neg_inf : std::log(model_.pi[f]);

        const std::size_t V = ds_.views.size();
        for (std::size_t i = 0; i < ds_.n; ++i) {
            for (std::size_t f = 0; f < logw.size(); ++f) {
                double lw = logpi[f];
                if (lw != neg_inf)
                    for (std::size_t v = 0; v < V; ++v)
                        lw += loglik[v](i, joint_labels_[f][v]);
                logw[f] = lw;
            }
            auto probs = softmax_from_logs(logw);  // throws on total underflow
            Rng rng = derive_rng(config_.seed, 0x10 + iter * 8, 1, i);
            std::size_t f = sample_index(probs, rng);
            for (std::size_t v = 0; v < V; ++v) parts_.z[v][i] = joint_labels_[f][v];
        }
    }

    void sample_cols(int iter) {
        for (std::size_t v = 0; v < ds_.views.size(); ++v) {
            for (std::size_t s = 0; s < ds_.views[v].sets.size(); ++s) {
                Matrix loglik = col_logliks(model_, v, s);
                const std::size_t L = model_.L[v][s];
                std::vector<double> logw(L);
                for (std::size_t j = 0; j < loglik.rows(); ++j) {
                    for (std::size_t l = 0; l < L; ++l) {
                        double r = model_.rho[v][s][l];
                        logw[l] = (r > 0.0) ? std::log(r) + loglik(j, l) : neg_inf;
                    }
                    auto probs = softmax_from_logs(logw);
                    Rng rng = derive_rng(config_.seed, 0x10 + iter * 8, 2, (v * 64 + s) *
                                                                              100000 + j);
                    parts_.w[v][s][j] = static_cast<int>(sample_index(probs, rng));
                }
            }
        }
    }

    // pi update (with normalized soft-threshold when lambda > 0) plus the
    // half-step alpha refresh.
    void row_mstep(double lambda) {
        update_pi(lambda);
        update_alpha();
    }

    void col_mstep() {
        update_rho();
        update_alpha();
    }

    void resample_rows_if_empty(int iter) {
        if (iter >= config_.effective_resample_iters()) return;
        for (std::size_t v = 0; v < ds_.views.size(); ++v) {
            std::vector<int> counts(model_.K[v], 0);
            for (int k : parts_.z[v]) counts[k]++;
            if (std::find(counts.begin(), counts.end(), 0) == counts.end()) continue;
            std::size_t n_redraw =
                static_cast<std::size_t>(config_.resample_fraction * ds_.n);
            Rng rng = derive_rng(config_.seed, 0x10 + iter * 8, 4, v);
            auto rows = choose_without_replacement(ds_.n, n_redraw, rng);
            for (std::size_t i : rows)
                parts_.z[v][i] = static_cast<int>(rng() % model_.K[v]);
        }
    }

    void resample_cols_if_empty(int iter) {
        if (iter >= config_.effective_resample_iters()) return;
        for (std::size_t v = 0; v < ds_.views.size(); ++v) {
            for (std::size_t s = 0; s < ds_.views[v].sets.size(); ++s) {
                std::vector<int> counts(model_.L[v][s], 0);
                for (int l : parts_.w[v][s]) counts[l]++;
                if (std::find(counts.begin(), counts.end(), 0) == counts.end()) continue;
                std::size_t d = parts_.w[v][s].size();
                std::size_t n_redraw =
                    static_cast<std::size_t>(config_.resample_fraction * d);
                Rng rng = derive_rng(config_.seed, 0x10 + iter * 8, 5, v * 64 + s);
                auto cols = choose_without_replacement(d, n_redraw, rng);
                for (std::size_t j : cols)
                    parts_.w[v][s][j] = static_cast<int>(rng() % model_.L[v][s]);
            }
        }
    }

    // Draw every missing cell from its block distribution; observed cells are
    // untouched. Returns the sampled values aligned with missing_cells().
    std::vector<std::vector<double>> impute_draw(int iter) {
        std::vector<std::vector<double>> draws(flat_sets_.size());
        for (std::size_t fs = 0; fs < flat_sets_.size(); ++fs) {
            const auto& ref = flat_sets_[fs];
            const auto& missing = missing_cells_[fs];
            draws[fs].resize(missing.size());
            for (std::size_t idx = 0; idx < missing.size(); ++idx) {
                auto [i, j] = missing[idx];
                int k = parts_.z[ref.view][i];
                int l = parts_.w[ref.view][ref.set][j];
                const auto& params = model_.block(ref.view, ref.set, k, l);
                Rng rng = derive_rng(config_.seed, 0x10 + iter * 8, 3, fs * 100000000ULL +
                                                                          idx);
                const dist::PoissonMargins* margins =
                    ref.is_count ? &margins_[fs] : nullptr;
                draws[fs][idx] = dist::sample(params, rng, margins, {i, j});
            }
        }
        return draws;
    }

    double fast_complete_loglik() const { return fast_complete_loglik(model_, parts_); }

    // Table-driven equivalent of complete_data_log_likelihood.
    double fast_complete_loglik(const ModelState& model, const PartitionState& parts) const {
        const std::size_t V = ds_.views.size();
        double ll = 0.0;
        std::vector<int> joint(V);
        for (std::size_t i = 0; i < ds_.n; ++i) {
            for (std::size_t v = 0; v < V; ++v) joint[v] = parts.z[v][i];
            double p = model.pi.at(joint);
            if (!(p > 0.0)) return neg_inf;
            ll += std::log(p);
        }
        for (std::size_t v = 0; v < V; ++v)
            for (std::size_t s = 0; s < model.rho[v].size(); ++s)
                for (int l : parts.w[v][s]) {
                    if (!(model.rho[v][s][l] > 0.0)) return neg_inf;
                    ll += std::log(model.rho[v][s][l]);
                }

        for (std::size_t fs = 0; fs < flat_sets_.size(); ++fs) {
            const auto& ref = flat_sets_[fs];
            const FeatureSetData& set = ds_.views[ref.view].sets[ref.set];
            const auto tables = build_tables(model, ref.view, ref.set);
            const auto& z = parts.z[ref.view];
            const auto& w = parts.w[ref.view][ref.set];
            const std::size_t L = model.L[ref.view][ref.set];
            for (std::size_t i = 0; i < ds_.n; ++i) {
                int k = z[i];
                for (std::size_t j = 0; j < set.values.cols(); ++j) {
                    if (!set.observed(i, j)) continue;
                    int l = w[j];
                    double x = set.values(i, j);
                    switch (ref.kind) {
                        case FeatureKind::Nominal:
                        case FeatureKind::Ordinal:
                            ll += tables.logp[(k * L + l) * ref.m + static_cast<int>(x)];
                            break;
                        case FeatureKind::Continuous: {
                            double d = x - tables.gmu[k * L + l];
                            ll += tables.gc0[k * L + l] - d * d * tables.gc1[k * L + l];
                            break;
                        }
                        case FeatureKind::Count: {
                            double nn =
                                margins_[fs].row_sums[i] * margins_[fs].col_sums[j];
                            double delta = tables.pdelta[k * L + l];
                            double rate = nn * delta;
                            if (rate <= 0.0) {
                                if (x != 0.0) return neg_inf;
                            } else {
                                ll += x * std::log(rate) - rate - std::lgamma(x + 1.0);
                            }
                            break;
                        }
                    }
                }
            }
        }
        return ll;
    }

    FitResult run(const PartitionState* init = nullptr) {
        init_partitions(init);
        mstep_from_partitions();

        Aggregate agg = make_aggregate();
        FitResult result;
        result.trace.reserve(config_.total_iters);

        for (int iter = 0; iter < config_.total_iters; ++iter) {
            double lambda = iter >= config_.burn_in ? config_.lambda : 0.0;
            sample_rows(iter);
            resample_rows_if_empty(iter);
            row_mstep(lambda);
            sample_cols(iter);
            resample_cols_if_empty(iter);
            col_mstep();
            auto draws = impute_draw(iter);

            if (iter >= config_.burn_in) accumulate(agg, draws);
            result.trace.push_back({fast_complete_loglik(), model_.pi.data()});
        }

        result.model = aggregated_model(agg);
        result.dead.assign(result.model.pi.size(), 0);
        for (std::size_t f = 0; f < result.model.pi.size(); ++f)
            result.dead[f] = result.model.pi[f] > 0.0 ? 0 : 1;
        result.partitions = classify(result.model, result.dead);
        result.imputed = aggregated_imputation(agg);
        parts_ = result.partitions;
        return result;
    }

    // One deterministic argmax sweep: rows under the final column partition,
    // then columns under those rows.
    PartitionState classify(const ModelState& model, const std::vector<char>& dead) {
        PartitionState out = parts_;
        auto loglik = row_logliks(model);
        const std::size_t V = ds_.views.size();
        for (std::size_t i = 0; i < ds_.n; ++i) {
            double best = neg_inf;
            std::size_t best_f = 0;
            for (std::size_t f = 0; f < model.pi.size(); ++f) {
                if (dead[f] || !(model.pi[f] > 0.0)) continue;
                double lw = std::log(model.pi[f]);
                for (std::size_t v = 0; v < V; ++v) lw += loglik[v](i, joint_labels_[f][v]);
                if (lw > best) {
                    best = lw;
                    best_f = f;
                }
            }
            if (best == neg_inf) throw numerical_error("classify: no admissible joint label");
            for (std::size_t v = 0; v < V; ++v) out.z[v][i] = joint_labels_[best_f][v];
        }
        PartitionState saved = parts_;
        parts_ = out;
        for (std::size_t v = 0; v < V; ++v)
            for (std::size_t s = 0; s < ds_.views[v].sets.size(); ++s) {
                Matrix cl = col_logliks(model, v, s);
                for (std::size_t j = 0; j < cl.rows(); ++j) {
                    double best = neg_inf;
                    int best_l = 0;
                    for (std::size_t l = 0; l < model.L[v][s]; ++l) {
                        if (!(model.rho[v][s][l] > 0.0)) continue;
                        double lw = std::log(model.rho[v][s][l]) + cl(j, l);
                        if (lw > best) {
                            best = lw;
                            best_l = static_cast<int>(l);
                        }
                    }
                    out.w[v][s][j] = best_l;
                }
            }
        parts_ = saved;
        return out;
    }

    // Per-view n x K_v row log-likelihoods under the given model and the
    // current column partition. Poisson rows drop per-cell constants shared
    // across clusters.
    std::vector<Matrix> row_logliks(const ModelState& model) const {
        std::vector<Matrix> out;
        for (std::size_t v = 0; v < ds_.views.size(); ++v)
            out.emplace_back(ds_.n, model.K[v], 0.0);
        for (std::size_t fs = 0; fs < flat_sets_.size(); ++fs) {
            const auto& ref = flat_sets_[fs];
            const FeatureSetData& set = ds_.views[ref.view].sets[ref.set];
            const auto tables = build_tables(model, ref.view, ref.set);
            const auto& w = parts_.w[ref.view][ref.set];
            const std::size_t K = model.K[ref.view];
            const std::size_t L = model.L[ref.view][ref.set];
            Matrix& A = out[ref.view];
            for (std::size_t i = 0; i < ds_.n; ++i) {
                double rm = ref.is_count ? margins_[fs].row_sums[i] : 0.0;
                for (std::size_t j = 0; j < set.values.cols(); ++j) {
                    if (!set.observed(i, j)) continue;
                    int l = w[j];
                    double x = set.values(i, j);
                    switch (ref.kind) {
                        case FeatureKind::Nominal:
                        case FeatureKind::Ordinal: {
                            const double* col = &tables.logp[l * ref.m + static_cast<int>(x)];
                            for (std::size_t k = 0; k < K; ++k)
                                A(i, k) += col[k * L * ref.m];
                            break;
                        }
                        case FeatureKind::Continuous:
                            for (std::size_t k = 0; k < K; ++k) {
                                double d = x - tables.gmu[k * L + l];
                                A(i, k) += tables.gc0[k * L + l] - d * d * tables.gc1[k * L + l];
                            }
                            break;
                        case FeatureKind::Count: {
                            double nn = rm * margins_[fs].col_sums[j];
                            for (std::size_t k = 0; k < K; ++k)
                                A(i, k) += x * tables.plogdelta[k * L + l] -
                                           nn * tables.pdelta[k * L + l];
                            break;
                        }
                    }
                }
            }
        }
        return out;
    }

    // d_vs x L_vs column log-likelihoods for one feature set under the current
    // row partition.
    Matrix col_logliks(const ModelState& model, std::size_t v, std::size_t s) const {
        const FeatureSetData& set = ds_.views[v].sets[s];
        const std::size_t L = model.L[v][s];
        Matrix B(set.values.cols(), L, 0.0);
        const auto tables = build_tables(model, v, s);
        const auto& z = parts_.z[v];
        std::size_t fs = flat_index_of(v, s);
        const auto& ref = flat_sets_[fs];
        for (std::size_t i = 0; i < ds_.n; ++i) {
            int k = z[i];
            double rm = ref.is_count ? margins_[fs].row_sums[i] : 0.0;
            for (std::size_t j = 0; j < set.values.cols(); ++j) {
                if (!set.observed(i, j)) continue;
                double x = set.values(i, j);
                switch (ref.kind) {
                    case FeatureKind::Nominal:
                    case FeatureKind::Ordinal: {
                        const double* row = &tables.logp[k * L * ref.m + static_cast<int>(x)];
                        for (std::size_t l = 0; l < L; ++l) B(j, l) += row[l * ref.m];
                        break;
                    }
                    case FeatureKind::Continuous:
                        for (std::size_t l = 0; l < L; ++l) {
                            double d = x - tables.gmu[k * L + l];
                            B(j, l) += tables.gc0[k * L + l] - d * d * tables.gc1[k * L + l];
                        }
                        break;
                    case FeatureKind::Count: {
                        double nn = rm * margins_[fs].col_sums[j];
                        for (std::size_t l = 0; l < L; ++l)
                            B(j, l) += x * tables.plogdelta[k * L + l] -
                                       nn * tables.pdelta[k * L + l];
                        break;
                    }
                }
            }
        }
        return B;
    }

    const std::vector<dist::PoissonMargins>& margins() const { return margins_; }

  private:
    struct FlatSetRef {
        std::size_t view = 0;
        std::size_t set = 0;
        FeatureKind kind = FeatureKind::Continuous;
        int m = 0;
        bool is_count = false;
    };

    struct SetTables {
        std::vector<double> logp;                 // discrete: (k*L + l)*m + r
        std::vector<double> gmu, gc0, gc1;        // gaussian per (k, l)
        std::vector<double> pdelta, plogdelta;    // poisson per (k, l)
    };

    struct BlockAgg {
        std::vector<double> p_sum;     // multinomial
        double mu_sum = 0.0;           // gaussian
        double s2_sum = 0.0;
        double delta_sum = 0.0;        // poisson
        double beta_sum = 0.0;         // bos
        std::vector<int> bos_mu_count;
    };

    struct Aggregate {
        int count = 0;
        std::vector<double> pi_sum;
        std::vector<std::vector<std::vector<double>>> rho_sum;
        std::vector<std::vector<std::vector<BlockAgg>>> blocks;  // [view][set][k*L+l]
        // imputation accumulators, aligned with missing_cells_
        std::vector<std::vector<double>> value_sum;              // continuous/count
        std::vector<std::vector<std::vector<int>>> level_count;  // nominal/ordinal
    };

    void precompute_margins() {
        for (std::size_t v = 0; v < ds_.views.size(); ++v)
            for (std::size_t s = 0; s < ds_.views[v].sets.size(); ++s) {
                const auto& type = model_.schema[v].feature_sets[s].type;
                FlatSetRef ref;
                ref.view = v;
                ref.set = s;
                ref.kind = type.kind;
                ref.m = type.levels;
                ref.is_count = type.kind == FeatureKind::Count;
                flat_sets_.push_back(ref);
                margins_.push_back(ref.is_count
                                       ? dist::compute_margins(ds_.views[v].sets[s])
                                       : dist::PoissonMargins{});
                std::vector<std::pair<std::size_t, std::size_t>> missing;
                const auto& set = ds_.views[v].sets[s];
                for (std::size_t i = 0; i < set.values.rows(); ++i)
                    for (std::size_t j = 0; j < set.values.cols(); ++j)
                        if (!set.observed(i, j)) missing.emplace_back(i, j);
                missing_cells_.push_back(std::move(missing));
            }
    }

    std::size_t flat_index_of(std::size_t v, std::size_t s) const {
        std::size_t fs = 0;
        for (std::size_t vv = 0; vv < v; ++vv) fs += ds_.views[vv].sets.size();
        return fs + s;
    }

    SetTables build_tables(const ModelState& model, std::size_t v, std::size_t s) const {
        const std::size_t K = model.K[v];
        const std::size_t L = model.L[v][s];
        const auto& type = model.schema[v].feature_sets[s].type;
        SetTables t;
        switch (type.kind) {
            case FeatureKind::Nominal:
                t.logp.resize(K * L * type.levels);
                for (std::size_t k = 0; k < K; ++k)
                    for (std::size_t l = 0; l < L; ++l) {
                        const auto& p =
                            std::get<dist::Multinomial>(model.block(v, s, k, l)).p;
                        for (int r = 0; r < type.levels; ++r)
                            t.logp[(k * L + l) * type.levels + r] =
                                std::log(std::max(p[r], 1e-300));
                    }
                break;
            case FeatureKind::Ordinal:
                t.logp.resize(K * L * type.levels);
                for (std::size_t k = 0; k < K; ++k)
                    for (std::size_t l = 0; l < L; ++l) {
                        const auto& b = std::get<dist::Bos>(model.block(v, s, k, l));
                        auto pmf = bos::pmf(b.m, b.mu, b.beta);
                        for (int r = 0; r < type.levels; ++r)
                            t.logp[(k * L + l) * type.levels + r] =
                                std::log(std::max(pmf[r], 1e-300));
                    }
                break;
            case FeatureKind::Continuous:
                t.gmu.resize(K * L);
                t.gc0.resize(K * L);
                t.gc1.resize(K * L);
                for (std::size_t k = 0; k < K; ++k)
                    for (std::size_t l = 0; l < L; ++l) {
                        const auto& g = std::get<dist::Gaussian>(model.block(v, s, k, l));
                        t.gmu[k * L + l] = g.mu;
                        t.gc0[k * L + l] = -0.5 * std::log(2.0 * M_PI * g.sigma2);
                        t.gc1[k * L + l] = 0.5 / g.sigma2;
                    }
                break;
            case FeatureKind::Count:
                t.pdelta.resize(K * L);
                t.plogdelta.resize(K * L);
                for (std::size_t k = 0; k < K; ++k)
                    for (std::size_t l = 0; l < L; ++l) {
                        double delta =
                            std::get<dist::Poisson>(model.block(v, s, k, l)).delta;
                        t.pdelta[k * L + l] = delta;
                        t.plogdelta[k * L + l] = std::log(std::max(delta, 1e-300));
                    }
                break;
        }
        return t;
    }

    void update_pi(double lambda) {
        std::vector<double> freq(model_.pi.size(), 0.0);
        const std::size_t V = ds_.views.size();
        std::vector<int> joint(V);
        for (std::size_t i = 0; i < ds_.n; ++i) {
            for (std::size_t v = 0; v < V; ++v) joint[v] = parts_.z[v][i];
            freq[model_.pi.flat_index(joint)] += 1.0;
        }
        for (double& f : freq) f /= static_cast<double>(ds_.n);
        if (lambda > 0.0) {
            freq = soft_threshold_simplex(freq, lambda);
            for (std::size_t f = 0; f < freq.size(); ++f)
                if (freq[f] == 0.0) dead_[f] = 1;
        }
        for (std::size_t f = 0; f < freq.size(); ++f) model_.pi[f] = dead_[f] ? 0.0 : freq[f];
        model_.pi.normalize();
    }

    void update_rho() {
        model_.rho.resize(ds_.views.size());
        for (std::size_t v = 0; v < ds_.views.size(); ++v) {
            model_.rho[v].resize(ds_.views[v].sets.size());
            for (std::size_t s = 0; s < ds_.views[v].sets.size(); ++s) {
                const std::size_t L = model_.L[v][s];
                std::vector<double> rho(L, 0.0);
                for (int l : parts_.w[v][s]) rho[l] += 1.0;
                double d = static_cast<double>(parts_.w[v][s].size());
                for (double& r : rho) r /= d;
                model_.rho[v][s] = std::move(rho);
            }
        }
    }

    // Family M-steps; empty blocks keep their previous parameters.
    void update_alpha() {
        bool fresh = model_.alpha.empty();
        if (fresh) {
            model_.alpha.resize(ds_.views.size());
            for (std::size_t v = 0; v < ds_.views.size(); ++v) {
                model_.alpha[v].resize(ds_.views[v].sets.size());
                for (std::size_t s = 0; s < ds_.views[v].sets.size(); ++s)
                    model_.alpha[v][s].assign(model_.K[v] * model_.L[v][s],
                                              fallback_params(flat_index_of(v, s)));
            }
        }
        for (std::size_t fs = 0; fs < flat_sets_.size(); ++fs) {
            const auto& ref = flat_sets_[fs];
            const FeatureSetData& set = ds_.views[ref.view].sets[ref.set];
            const std::size_t K = model_.K[ref.view];
            const std::size_t L = model_.L[ref.view][ref.set];
            const auto& z = parts_.z[ref.view];
            const auto& w = parts_.w[ref.view][ref.set];
            auto& alpha = model_.alpha[ref.view][ref.set];

            if (ref.kind == FeatureKind::Nominal || ref.kind == FeatureKind::Ordinal) {
                std::vector<double> counts(K * L * ref.m, 0.0);
                for (std::size_t i = 0; i < ds_.n; ++i) {
                    int k = z[i];
                    for (std::size_t j = 0; j < set.values.cols(); ++j)
                        if (set.observed(i, j))
                            counts[(k * L + w[j]) * ref.m +
                                   static_cast<int>(set.values(i, j))] += 1.0;
                }
                for (std::size_t k = 0; k < K; ++k)
                    for (std::size_t l = 0; l < L; ++l) {
                        std::vector<double> block(
                            counts.begin() + (k * L + l) * ref.m,
                            counts.begin() + (k * L + l + 1) * ref.m);
                        double total = std::accumulate(block.begin(), block.end(), 0.0);
                        if (!(total > 0.0)) continue;
                        alpha[k * L + l] = ref.kind == FeatureKind::Nominal
                                               ? dist::multinomial_update(block)
                                               : dist::bos_update(block, ref.m);
                    }
            } else if (ref.kind == FeatureKind::Continuous) {
                std::vector<double> wsum(K * L, 0.0), xsum(K * L, 0.0), x2sum(K * L, 0.0);
                for (std::size_t i = 0; i < ds_.n; ++i) {
                    int k = z[i];
                    for (std::size_t j = 0; j < set.values.cols(); ++j)
                        if (set.observed(i, j)) {
                            double x = set.values(i, j);
                            std::size_t b = k * L + w[j];
                            wsum[b] += 1.0;
                            xsum[b] += x;
                            x2sum[b] += x * x;
                        }
                }
                for (std::size_t b = 0; b < K * L; ++b) {
                    if (!(wsum[b] > 0.0)) continue;
                    double mu = xsum[b] / wsum[b];
                    double var = std::max(x2sum[b] / wsum[b] - mu * mu,
                                          config_.variance_floor);
                    alpha[b] = dist::Gaussian{mu, var};
                }
            } else {  // Count
                std::vector<double> block_sum(K * L, 0.0);
                std::vector<double> row_margin(K, 0.0), col_margin(L, 0.0);
                for (std::size_t i = 0; i < ds_.n; ++i) {
                    int k = z[i];
                    for (std::size_t j = 0; j < set.values.cols(); ++j)
                        if (set.observed(i, j)) {
                            double x = set.values(i, j);
                            block_sum[k * L + w[j]] += x;
                            row_margin[k] += x;
                            col_margin[w[j]] += x;
                        }
                }
                for (std::size_t k = 0; k < K; ++k)
                    for (std::size_t l = 0; l < L; ++l) {
                        double denom = row_margin[k] * col_margin[l];
                        if (!(denom > 0.0)) continue;
                        alpha[k * L + l] = dist::Poisson{block_sum[k * L + l] / denom};
                    }
            }
        }
    }

    dist::BlockParams fallback_params(std::size_t fs) const {
        const auto& ref = flat_sets_[fs];
        const FeatureSetData& set = ds_.views[ref.view].sets[ref.set];
        switch (ref.kind) {
            case FeatureKind::Nominal: {
                dist::Multinomial mn;
                mn.p.assign(ref.m, 1.0 / ref.m);
                return mn;
            }
            case FeatureKind::Ordinal:
                return dist::Bos{ref.m, (ref.m + 1) / 2, 0.5};
            case FeatureKind::Continuous: {
                double total = 0.0, sum = 0.0, ss = 0.0;
                for (std::size_t i = 0; i < set.values.rows(); ++i)
                    for (std::size_t j = 0; j < set.values.cols(); ++j)
                        if (set.observed(i, j)) {
                            total += 1.0;
                            sum += set.values(i, j);
                            ss += set.values(i, j) * set.values(i, j);
                        }
                if (!(total > 0.0)) return dist::Gaussian{0.0, 1.0};
                double mu = sum / total;
                return dist::Gaussian{mu, std::max(ss / total - mu * mu,
                                                   config_.variance_floor)};
            }
            case FeatureKind::Count: {
                double s = std::accumulate(margins_[fs].row_sums.begin(),
                                           margins_[fs].row_sums.end(), 0.0);
                return dist::Poisson{s > 0.0 ? 1.0 / s : 0.0};
            }
        }
        return dist::Gaussian{0.0, 1.0};
    }

    Aggregate make_aggregate() const {
        Aggregate agg;
        agg.pi_sum.assign(model_.pi.size(), 0.0);
        agg.rho_sum.resize(ds_.views.size());
        agg.blocks.resize(ds_.views.size());
        for (std::size_t v = 0; v < ds_.views.size(); ++v) {
            agg.rho_sum[v].resize(ds_.views[v].sets.size());
            agg.blocks[v].resize(ds_.views[v].sets.size());
            for (std::size_t s = 0; s < ds_.views[v].sets.size(); ++s) {
                agg.rho_sum[v][s].assign(model_.L[v][s], 0.0);
                BlockAgg proto;
                const auto& type = model_.schema[v].feature_sets[s].type;
                if (type.kind == FeatureKind::Nominal)
                    proto.p_sum.assign(type.levels, 0.0);
                if (type.kind == FeatureKind::Ordinal)
                    proto.bos_mu_count.assign(type.levels, 0);
                agg.blocks[v][s].assign(model_.K[v] * model_.L[v][s], proto);
            }
        }
        agg.value_sum.resize(flat_sets_.size());
        agg.level_count.resize(flat_sets_.size());
        for (std::size_t fs = 0; fs < flat_sets_.size(); ++fs) {
            const auto& ref = flat_sets_[fs];
            if (ref.kind == FeatureKind::Nominal || ref.kind == FeatureKind::Ordinal)
                agg.level_count[fs].assign(missing_cells_[fs].size(),
                                           std::vector<int>(ref.m, 0));
            else
                agg.value_sum[fs].assign(missing_cells_[fs].size(), 0.0);
        }
        return agg;
    }

    void accumulate(Aggregate& agg, const std::vector<std::vector<double>>& draws) {
        agg.count++;
        for (std::size_t f = 0; f < model_.pi.size(); ++f) agg.pi_sum[f] += model_.pi[f];
        for (std::size_t v = 0; v < ds_.views.size(); ++v)
            for (std::size_t s = 0; s < ds_.views[v].sets.size(); ++s) {
                for (std::size_t l = 0; l < model_.L[v][s]; ++l)
                    agg.rho_sum[v][s][l] += model_.rho[v][s][l];
                for (std::size_t b = 0; b < model_.alpha[v][s].size(); ++b) {
                    BlockAgg& ba = agg.blocks[v][s][b];
                    const auto& params = model_.alpha[v][s][b];
                    if (const auto* mn = std::get_if<dist::Multinomial>(&params))
                        for (std::size_t r = 0; r < mn->p.size(); ++r)
                            ba.p_sum[r] += mn->p[r];
                    else if (const auto* bo = std::get_if<dist::Bos>(&params)) {
                        ba.beta_sum += bo->beta;
                        ba.bos_mu_count[bo->mu - 1]++;
                    } else if (const auto* g = std::get_if<dist::Gaussian>(&params)) {
                        ba.mu_sum += g->mu;
                        ba.s2_sum += g->sigma2;
                    } else {
                        ba.delta_sum += std::get<dist::Poisson>(params).delta;
                    }
                }
            }
        for (std::size_t fs = 0; fs < flat_sets_.size(); ++fs) {
            const auto& ref = flat_sets_[fs];
            for (std::size_t idx = 0; idx < draws[fs].size(); ++idx) {
                if (ref.kind == FeatureKind::Nominal || ref.kind == FeatureKind::Ordinal)
                    agg.level_count[fs][idx][static_cast<int>(draws[fs][idx])]++;
                else
                    agg.value_sum[fs][idx] += draws[fs][idx];
            }
        }
    }

    // Mean for continuous parameters, mode for the BOS position.
    ModelState aggregated_model(const Aggregate& agg) const {
        ModelState out = model_;
        double inv = 1.0 / agg.count;
        for (std::size_t f = 0; f < out.pi.size(); ++f) out.pi[f] = agg.pi_sum[f] * inv;
        out.pi.normalize();
        for (std::size_t v = 0; v < ds_.views.size(); ++v)
            for (std::size_t s = 0; s < ds_.views[v].sets.size(); ++s) {
                for (std::size_t l = 0; l < out.L[v][s]; ++l)
                    out.rho[v][s][l] = agg.rho_sum[v][s][l] * inv;
                const auto& type = out.schema[v].feature_sets[s].type;
                for (std::size_t b = 0; b < out.alpha[v][s].size(); ++b) {
                    const BlockAgg& ba = agg.blocks[v][s][b];
                    switch (type.kind) {
                        case FeatureKind::Nominal: {
                            dist::Multinomial mn;
                            mn.p.resize(type.levels);
                            for (int r = 0; r < type.levels; ++r)
                                mn.p[r] = ba.p_sum[r] * inv;
                            out.alpha[v][s][b] = mn;
                            break;
                        }
                        case FeatureKind::Ordinal: {
                            int mode = 0;
                            for (int r = 1; r < type.levels; ++r)
                                if (ba.bos_mu_count[r] > ba.bos_mu_count[mode]) mode = r;
                            out.alpha[v][s][b] =
                                dist::Bos{type.levels, mode + 1, ba.beta_sum * inv};
                            break;
                        }
                        case FeatureKind::Continuous:
                            out.alpha[v][s][b] =
                                dist::Gaussian{ba.mu_sum * inv,
                                               std::max(ba.s2_sum * inv,
                                                        config_.variance_floor)};
                            break;
                        case FeatureKind::Count:
                            out.alpha[v][s][b] = dist::Poisson{ba.delta_sum * inv};
                            break;
                    }
                }
            }
        return out;
    }

    // Mean (count rounded) / mode across post-burn-in draws.
    MultiViewDataset aggregated_imputation(const Aggregate& agg) const {
        MultiViewDataset out = ds_;
        double inv = 1.0 / agg.count;
        for (std::size_t fs = 0; fs < flat_sets_.size(); ++fs) {
            const auto& ref = flat_sets_[fs];
            auto& set = out.views[ref.view].sets[ref.set];
            for (std::size_t idx = 0; idx < missing_cells_[fs].size(); ++idx) {
                auto [i, j] = missing_cells_[fs][idx];
                double value;
                if (ref.kind == FeatureKind::Nominal || ref.kind == FeatureKind::Ordinal) {
                    const auto& counts = agg.level_count[fs][idx];
                    int mode = 0;
                    for (int r = 1; r < ref.m; ++r)
                        if (counts[r] > counts[mode]) mode = r;
                    value = static_cast<double>(mode);
                } else if (ref.kind == FeatureKind::Count) {
                    value = std::round(agg.value_sum[fs][idx] * inv);
                } else {
                    value = agg.value_sum[fs][idx] * inv;
                }
                set.values(i, j) = value;
            }
        }
        return out;
    }

    std::vector<int> kmeanspp_rows(std::size_t v) const {
        const View& view = ds_.views[v];
        std::size_t d = view.schema.total_cols();
        Matrix X(ds_.n, d, 0.0);
        std::size_t off = 0;
        for (const auto& set : view.sets) {
            // mean-impute missing cells for seeding only
            for (std::size_t j = 0; j < set.values.cols(); ++j) {
                double sum = 0.0, cnt = 0.0;
                for (std::size_t i = 0; i < ds_.n; ++i)
                    if (set.observed(i, j)) {
                        sum += set.values(i, j);
                        cnt += 1.0;
                    }
                double mean = cnt > 0.0 ? sum / cnt : 0.0;
                for (std::size_t i = 0; i < ds_.n; ++i)
                    X(i, off + j) = set.observed(i, j) ? set.values(i, j) : mean;
            }
            off += set.values.cols();
        }
        return kmeanspp_points(X, model_.K[v], derive_rng(config_.seed, 0xC0, v));
    }

    // Seed columns from their raw n-vectors; columns sharing a cluster share a
    // conditional distribution, so they sit close regardless of the (still
    // unknown) row partition.
    std::vector<int> kmeanspp_cols(std::size_t v, std::size_t s) const {
        const auto& set = ds_.views[v].sets[s];
        const auto& type = model_.schema[v].feature_sets[s].type;
        std::size_t d = set.values.cols();

        // family-aware column features: one-hot levels for discrete sets,
        // margin-normalized rates for counts, raw values otherwise
        std::size_t width = type.discrete_levels()
                                ? ds_.n * static_cast<std::size_t>(type.levels)
                                : ds_.n;
        Matrix X(d, width, 0.0);
        dist::PoissonMargins margins;
        if (type.kind == FeatureKind::Count) margins = dist::compute_margins(set);
        for (std::size_t j = 0; j < d; ++j) {
            double sum = 0.0, cnt = 0.0;
            for (std::size_t i = 0; i < ds_.n; ++i)
                if (set.observed(i, j)) {
                    sum += set.values(i, j);
                    cnt += 1.0;
                }
            double mean = cnt > 0.0 ? sum / cnt : 0.0;
            for (std::size_t i = 0; i < ds_.n; ++i) {
                if (type.discrete_levels()) {
                    if (set.observed(i, j))
                        X(j, i * type.levels +
                                 static_cast<std::size_t>(set.values(i, j))) = 1.0;
                } else if (type.kind == FeatureKind::Count) {
                    double scale = margins.row_sums[i] * margins.col_sums[j];
                    double x = set.observed(i, j) ? set.values(i, j) : mean;
                    X(j, i) = scale > 0.0 ? x / scale : 0.0;
                } else {
                    X(j, i) = set.observed(i, j) ? set.values(i, j) : mean;
                }
            }
        }
        return kmeanspp_points(X, model_.L[v][s],
                               derive_rng(config_.seed, 0xB0, v * 64 + s));
    }

    // Best of several kmeans++ seedings by within-cluster SSE; a single
    // seeding merges well-separated clusters often enough to matter.
    static std::vector<int> kmeanspp_points(const Matrix& X, std::size_t K, Rng rng) {
        std::vector<int> best_labels;
        double best_sse = std::numeric_limits<double>::infinity();
        for (int restart = 0; restart < 8; ++restart) {
            double sse = 0.0;
            auto labels = kmeanspp_once(X, K, rng, sse);
            if (sse < best_sse) {
                best_sse = sse;
                best_labels = std::move(labels);
            }
        }
        return best_labels;
    }

    static std::vector<int> kmeanspp_once(const Matrix& X, std::size_t K, Rng& rng,
                                          double& sse_out) {
        const std::size_t n = X.rows(), d = X.cols();
        auto sqdist = [&](std::size_t i, const std::vector<double>& c) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                double t = X(i, j) - c[j];
                s += t * t;
            }
            return s;
        };
        std::vector<std::vector<double>> centers;
        std::size_t first = rng() % n;
        centers.push_back(std::vector<double>(X.data().begin() + first * d,
                                              X.data().begin() + (first + 1) * d));
        std::vector<double> d2(n);
        while (centers.size() < K) {
            for (std::size_t i = 0; i < n; ++i) {
                double best = sqdist(i, centers[0]);
                for (std::size_t c = 1; c < centers.size(); ++c)
                    best = std::min(best, sqdist(i, centers[c]));
                d2[i] = best;
            }
            double total_d2 = std::accumulate(d2.begin(), d2.end(), 0.0);
            // duplicate rows can zero every distance; fall back to uniform
            std::size_t next = total_d2 > 0.0 ? sample_index(d2, rng) : rng() % n;
            centers.push_back(std::vector<double>(X.data().begin() + next * d,
                                                  X.data().begin() + (next + 1) * d));
        }
        std::vector<int> labels(n, 0);
        for (int sweep = 0; sweep < 10; ++sweep) {
            for (std::size_t i = 0; i < n; ++i) {
                double best = sqdist(i, centers[0]);
                int best_k = 0;
                for (std::size_t c = 1; c < K; ++c) {
                    double dd = sqdist(i, centers[c]);
                    if (dd < best) {
                        best = dd;
                        best_k = static_cast<int>(c);
                    }
                }
                labels[i] = best_k;
            }
            for (std::size_t c = 0; c < K; ++c) {
                std::vector<double> mean(d, 0.0);
                double cnt = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    if (labels[i] == static_cast<int>(c)) {
                        cnt += 1.0;
                        for (std::size_t j = 0; j < d; ++j) mean[j] += X(i, j);
                    }
                if (cnt > 0.0) {
                    for (double& m : mean) m /= cnt;
                    centers[c] = mean;
                }
            }
        }
        sse_out = 0.0;
        for (std::size_t i = 0; i < n; ++i) sse_out += sqdist(i, centers[labels[i]]);
        return labels;
    }

    static std::vector<std::size_t> choose_without_replacement(std::size_t n,
                                                               std::size_t count, Rng& rng) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < count && i < n; ++i) {
            std::size_t j = i + rng() % (n - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(std::min(count, n));
        return idx;
    }

    void check_partitions() const {
        if (parts_.z.size() != ds_.views.size() || parts_.w.size() != ds_.views.size())
            throw data_error("init partitions do not match the dataset shape");
        for (std::size_t v = 0; v < ds_.views.size(); ++v) {
            if (parts_.z[v].size() != ds_.n)
                throw data_error("init row partition length mismatch");
            for (int k : parts_.z[v])
                if (k < 0 || k >= static_cast<int>(model_.K[v]))
                    throw data_error("init row label out of range");
            for (std::size_t s = 0; s < parts_.w[v].size(); ++s)
                for (int l : parts_.w[v][s])
                    if (l < 0 || l >= static_cast<int>(model_.L[v][s]))
                        throw data_error("init column label out of range");
        }
    }

    const MultiViewDataset& ds_;
    FitConfig config_;
    ModelState model_;
    PartitionState parts_;
    std::vector<char> dead_;
    std::vector<std::vector<int>> joint_labels_;
    std::vector<FlatSetRef> flat_sets_;
    std::vector<dist::PoissonMargins> margins_;
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> missing_cells_;
};

inline FitResult run_sem_gibbs(const MultiViewDataset& ds, std::vector<std::size_t> K,
                               std::vector<std::vector<std::size_t>> L, const FitConfig& config,
                               const PartitionState* init = nullptr) {
    SemGibbsEngine engine(ds, std::move(K), std::move(L), config);
    return engine.run(init);
}

}  // namespace mvlbm
