#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mvlbm/common.hpp"
#include "mvlbm/core.hpp"
#include "mvlbm/dist.hpp"
#include "mvlbm/engine.hpp"

namespace mvlbm::select {

struct IclBreakdown {
    double complete_loglik = 0.0;
    double row_penalty = 0.0;
    double col_penalty = 0.0;
    double block_penalty = 0.0;

    double total() const {
        return complete_loglik - row_penalty - col_penalty - block_penalty;
    }
};

inline IclBreakdown compute_icl_breakdown(const MultiViewDataset& ds, const FitResult& fit) {
    IclBreakdown out;
    SemGibbsEngine engine(ds, fit.model.K, fit.model.L, FitConfig{});
    out.complete_loglik = engine.fast_complete_loglik(fit.model, fit.partitions);

    const double n = static_cast<double>(ds.n);
    double sum_k = 0.0;
    for (std::size_t k : fit.model.K) sum_k += static_cast<double>(k);
    out.row_penalty = (sum_k - 1.0) / 2.0 * std::log(n);

    for (std::size_t v = 0; v < ds.views.size(); ++v) {
        double l_v = 0.0;
        for (std::size_t l : fit.model.L[v]) l_v += static_cast<double>(l);
        double d_v = static_cast<double>(ds.views[v].schema.total_cols());
        out.col_penalty += (l_v - 1.0) / 2.0 * std::log(d_v);
        for (std::size_t s = 0; s < fit.model.L[v].size(); ++s) {
            double eta =
                static_cast<double>(dist::param_count(ds.views[v].schema.feature_sets[s].type));
            double d_vs = static_cast<double>(ds.views[v].schema.feature_sets[s].cols);
            out.block_penalty += static_cast<double>(fit.model.K[v]) *
                                 static_cast<double>(fit.model.L[v][s]) * eta / 2.0 *
                                 std::log(n * d_vs);
        }
    }
    return out;
}

inline double compute_icl(const MultiViewDataset& ds, const FitResult& fit) {
    return compute_icl_breakdown(ds, fit).total();
}

struct ModelCard {
    std::vector<std::size_t> K;
    std::vector<std::vector<std::size_t>> L;
    double icl = neg_inf;
    FitResult fit;
};

struct SearchLogEntry {
    int iteration = 0;
    std::string proposal;
    double icl = neg_inf;
    bool accepted = false;
};

struct SearchOptions {
    std::size_t k_max = 6;
    std::size_t l_max = 6;
    int proposal_total_iters = 50;
    int proposal_burn_in = 30;
    int max_sweeps = 20;
};

namespace detail {

inline FitConfig shortened(const FitConfig& config, const SearchOptions& opts) {
    FitConfig c = config;
    c.total_iters = opts.proposal_total_iters;
    c.burn_in = opts.proposal_burn_in;
    c.resample_iters = -1;
    return c;
}

inline std::vector<double> stacked_row_params(const ModelState& model, std::size_t v,
                                              std::size_t k) {
    std::vector<double> out;
    for (std::size_t s = 0; s < model.L[v].size(); ++s)
        for (std::size_t l = 0; l < model.L[v][s]; ++l) {
            const auto& params = model.block(v, s, k, l);
            if (const auto* mn = std::get_if<dist::Multinomial>(&params))
                out.insert(out.end(), mn->p.begin(), mn->p.end());
            else if (const auto* b = std::get_if<dist::Bos>(&params)) {
                out.push_back(static_cast<double>(b->mu));
                out.push_back(b->beta);
            } else if (const auto* g = std::get_if<dist::Gaussian>(&params)) {
                out.push_back(g->mu);
                out.push_back(g->sigma2);
            } else {
                out.push_back(std::get<dist::Poisson>(params).delta);
            }
        }
    return out;
}

inline std::vector<double> stacked_col_params(const ModelState& model, std::size_t v,
                                              std::size_t s, std::size_t l) {
    std::vector<double> out;
    for (std::size_t k = 0; k < model.K[v]; ++k) {
        const auto& params = model.block(v, s, k, l);
        if (const auto* mn = std::get_if<dist::Multinomial>(&params))
            out.insert(out.end(), mn->p.begin(), mn->p.end());
        else if (const auto* b = std::get_if<dist::Bos>(&params)) {
            out.push_back(static_cast<double>(b->mu));
            out.push_back(b->beta);
        } else if (const auto* g = std::get_if<dist::Gaussian>(&params)) {
            out.push_back(g->mu);
            out.push_back(g->sigma2);
        } else {
            out.push_back(std::get<dist::Poisson>(params).delta);
        }
    }
    return out;
}

inline std::pair<std::size_t, std::size_t> closest_pair(
    const std::vector<std::vector<double>>& stacked) {
    std::size_t best_a = 0, best_b = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < stacked.size(); ++a)
        for (std::size_t b = a + 1; b < stacked.size(); ++b) {
            double d = 0.0;
            for (std::size_t x = 0; x < stacked[a].size(); ++x) {
                double t = stacked[a][x] - stacked[b][x];
                d += t * t;
            }
            if (d < best) {
                best = d;
                best_a = a;
                best_b = b;
            }
        }
    return {best_a, best_b};
}

inline void relabel_after_merge(std::vector<int>& labels, int a, int b) {
    for (int& l : labels) {
        if (l == b) l = a;
        if (l > b) l--;
    }
}

// Split: seed the new cluster by reassigning a fraction of labels uniformly
// over the grown label space (the resampling policy).
inline void split_labels(std::vector<int>& labels, std::size_t new_count, double fraction,
                         Rng& rng) {
    std::size_t n = labels.size();
    std::size_t n_redraw = std::max<std::size_t>(1, static_cast<std::size_t>(fraction * n));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t x = 0; x < n_redraw; ++x)
        labels[idx[x]] = static_cast<int>(rng() % new_count);
}

struct Proposal {
    std::string descriptor;
    std::vector<std::size_t> K;
    std::vector<std::vector<std::size_t>> L;
    PartitionState init;
};

inline std::vector<Proposal> row_proposals(const ModelCard& card, const SearchOptions& opts,
                                           std::uint64_t seed, int sweep) {
    std::vector<Proposal> out;
    for (std::size_t v = 0; v < card.K.size(); ++v) {
        if (card.K[v] + 1 <= opts.k_max) {
            Proposal p{"K" + std::to_string(v) + "+1", card.K, card.L,
                       card.fit.partitions};
            p.K[v]++;
            Rng rng = derive_rng(seed, 0xE0, sweep, v);
            split_labels(p.init.z[v], p.K[v], 0.20, rng);
            out.push_back(std::move(p));
        }
        if (card.K[v] >= 2) {
            Proposal p{"K" + std::to_string(v) + "-1", card.K, card.L,
                       card.fit.partitions};
            std::vector<std::vector<double>> stacked;
            for (std::size_t k = 0; k < card.K[v]; ++k)
                stacked.push_back(stacked_row_params(card.fit.model, v, k));
            auto [a, b] = closest_pair(stacked);
            relabel_after_merge(p.init.z[v], static_cast<int>(a), static_cast<int>(b));
            p.K[v]--;
            out.push_back(std::move(p));
        }
    }
    return out;
}

inline std::vector<Proposal> col_proposals(const ModelCard& card, const SearchOptions& opts,
                                           std::uint64_t seed, int sweep) {
    std::vector<Proposal> out;
    for (std::size_t v = 0; v < card.K.size(); ++v) {
        for (std::size_t s = 0; s < card.L[v].size(); ++s) {
            std::string tag = "L" + std::to_string(v) + "." + std::to_string(s);
            if (card.L[v][s] + 1 <= opts.l_max) {
                Proposal p{tag + "+1", card.K, card.L, card.fit.partitions};
                p.L[v][s]++;
                Rng rng = derive_rng(seed, 0xE1, sweep, v * 64 + s);
                split_labels(p.init.w[v][s], p.L[v][s], 0.20, rng);
                out.push_back(std::move(p));
            }
            if (card.L[v][s] >= 2) {
                Proposal p{tag + "-1", card.K, card.L, card.fit.partitions};
                std::vector<std::vector<double>> stacked;
                for (std::size_t l = 0; l < card.L[v][s]; ++l)
                    stacked.push_back(stacked_col_params(card.fit.model, v, s, l));
                auto [a, b] = closest_pair(stacked);
                relabel_after_merge(p.init.w[v][s], static_cast<int>(a),
                                    static_cast<int>(b));
                p.L[v][s]--;
                out.push_back(std::move(p));
            }
        }
    }
    return out;
}

inline ModelCard fit_card(const MultiViewDataset& ds, std::vector<std::size_t> K,
                          std::vector<std::vector<std::size_t>> L, const FitConfig& config,
                          const PartitionState* init) {
    ModelCard card;
    card.K = K;
    card.L = L;
    card.fit = run_sem_gibbs(ds, std::move(K), std::move(L), config, init);
    card.icl = compute_icl(ds, card.fit);
    return card;
}

// One accepted move per phase; true when something improved.
inline bool sweep_phase(const MultiViewDataset& ds, ModelCard& incumbent,
                        std::vector<Proposal> proposals, const FitConfig& short_config,
                        int sweep, std::vector<SearchLogEntry>& log) {
    ModelCard best = incumbent;
    std::string best_tag;
    for (auto& p : proposals) {
        ModelCard card;
        try {
            card = fit_card(ds, p.K, p.L, short_config, &p.init);
        } catch (const std::exception&) {
            continue;  // degenerate proposal, skip
        }
        log.push_back({sweep, p.descriptor, card.icl, false});
        if (card.icl > best.icl) {
            best = std::move(card);
            best_tag = p.descriptor;
        }
    }
    if (best_tag.empty()) return false;
    for (auto it = log.rbegin(); it != log.rend(); ++it)
        if (it->iteration == sweep && it->proposal == best_tag) {
            it->accepted = true;
            break;
        }
    incumbent = std::move(best);
    return true;
}

}  // namespace detail

// Greedy single-view model-space walk from (K=1, L=1, ...), one coordinate
// move at a time, keeping the ICL-best neighbor.
inline ModelCard greedy_search_single_view(const MultiViewDataset& view_ds,
                                           const FitConfig& config,
                                           const SearchOptions& opts = {},
                                           std::vector<SearchLogEntry>* log_out = nullptr,
                                           const ModelCard* start = nullptr) {
    if (view_ds.views.size() != 1)
        throw data_error("greedy_search_single_view: expects a single view");
    FitConfig short_config = detail::shortened(config, opts);
    std::vector<SearchLogEntry> log;

    ModelCard incumbent;
    if (start != nullptr) {
        incumbent = *start;
    } else {
        std::vector<std::size_t> K{1};
        std::vector<std::vector<std::size_t>> L{
            std::vector<std::size_t>(view_ds.views[0].sets.size(), 1)};
        incumbent = detail::fit_card(view_ds, K, L, short_config, nullptr);
        log.push_back({0, "start", incumbent.icl, true});
    }

    for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
        auto proposals = detail::row_proposals(incumbent, opts, config.seed, sweep);
        auto cols = detail::col_proposals(incumbent, opts, config.seed, sweep);
        proposals.insert(proposals.end(), cols.begin(), cols.end());
        if (!detail::sweep_phase(view_ds, incumbent, std::move(proposals), short_config,
                                 sweep, log))
            break;
    }
    // final refit at full budget
    incumbent = detail::fit_card(view_ds, incumbent.K, incumbent.L, config,
                                 &incumbent.fit.partitions);
    if (log_out != nullptr) *log_out = std::move(log);
    return incumbent;
}

// Joint search warm-started from per-view partitions; alternates row and
// column proposal phases until the ICL stops improving.
inline ModelCard search_multi_view(const MultiViewDataset& ds,
                                   const std::vector<std::size_t>& init_K,
                                   const std::vector<std::vector<std::size_t>>& init_L,
                                   const PartitionState& init_parts, const FitConfig& config,
                                   const SearchOptions& opts = {},
                                   std::vector<SearchLogEntry>* log_out = nullptr) {
    FitConfig short_config = detail::shortened(config, opts);
    std::vector<SearchLogEntry> log;

    ModelCard incumbent = detail::fit_card(ds, init_K, init_L, short_config, &init_parts);
    log.push_back({0, "start", incumbent.icl, true});

    for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
        bool moved = detail::sweep_phase(
            ds, incumbent, detail::row_proposals(incumbent, opts, config.seed, sweep),
            short_config, sweep, log);
        moved |= detail::sweep_phase(
            ds, incumbent, detail::col_proposals(incumbent, opts, config.seed, sweep),
            short_config, sweep, log);
        if (!moved) break;
    }
    incumbent = detail::fit_card(ds, incumbent.K, incumbent.L, config,
                                 &incumbent.fit.partitions);
    if (log_out != nullptr) *log_out = std::move(log);
    return incumbent;
}

}  // namespace mvlbm::select
