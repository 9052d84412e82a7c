#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mvlbm/common.hpp"
#include "mvlbm/core.hpp"
#include "mvlbm/engine.hpp"
#include "mvlbm/model.hpp"

namespace mvlbm::indeptest {

// Per-row marginal component densities, max-normalized per row. The dropped
// per-row log factor is recorded; it cancels in every likelihood ratio.
struct DensityMatrix {
    Matrix psi;                       // n x K
    std::vector<double> log_scale;    // per-row subtracted log factor
};

struct SolverOptions {
    double step_size = 1e-5;
    int max_outer = 1000;
    int max_inner = 1000;
    double tol = 1e-8;
};

struct CouplingMatrix {
    Matrix c;                 // K1 x K2
    std::vector<double> pi1;  // row margins
    std::vector<double> pi2;  // column margins
    bool converged = true;

    Matrix pi_hat() const {
        Matrix out(c.rows(), c.cols());
        for (std::size_t a = 0; a < c.rows(); ++a)
            for (std::size_t b = 0; b < c.cols(); ++b)
                out(a, b) = pi1[a] * c(a, b) * pi2[b];
        return out;
    }
};

struct IndependenceTestResult {
    double log_lambda = 0.0;
    double p_value = 1.0;
    CouplingMatrix c_hat;
    std::vector<double> permutation_stats;
    std::size_t dropped_clusters_view1 = 0;
    std::size_t dropped_clusters_view2 = 0;
};

// psi_ik under a fitted single-view model, plugging in the MAP column
// partition. `ds` must be a single-view dataset matching `model`.
inline DensityMatrix density_matrix(const MultiViewDataset& ds, const ModelState& model,
                                    const PartitionState& parts) {
    if (ds.views.size() != 1 || model.n_views() != 1)
        throw data_error("density_matrix: expects a single-view dataset and model");
    SemGibbsEngine engine(ds, model.K, model.L, FitConfig{});
    engine.parts() = parts;
    Matrix loglik = engine.row_logliks(model)[0];

    DensityMatrix out;
    out.psi = Matrix(loglik.rows(), loglik.cols());
    out.log_scale.resize(loglik.rows());
    for (std::size_t i = 0; i < loglik.rows(); ++i) {
        double mx = neg_inf;
        for (std::size_t k = 0; k < loglik.cols(); ++k) mx = std::max(mx, loglik(i, k));
        if (mx == neg_inf)
            throw numerical_error("density_matrix: row with no admissible component");
        out.log_scale[i] = mx;
        for (std::size_t k = 0; k < loglik.cols(); ++k)
            out.psi(i, k) = std::exp(loglik(i, k) - mx);
    }
    return out;
}

inline double coupled_row_mixture(const Matrix& psi1, const Matrix& psi2,
                                  const std::vector<double>& pi1,
                                  const std::vector<double>& pi2, const Matrix& c,
                                  std::size_t i, const std::vector<std::size_t>* perm) {
    std::size_t i2 = perm != nullptr ? (*perm)[i] : i;
    double total = 0.0;
    for (std::size_t a = 0; a < pi1.size(); ++a) {
        if (psi1(i, a) == 0.0) continue;
        double inner = 0.0;
        for (std::size_t b = 0; b < pi2.size(); ++b)
            inner += c(a, b) * pi2[b] * psi2(i2, b);
        total += psi1(i, a) * pi1[a] * inner;
    }
    return total;
}

inline double coupled_loglik(const Matrix& psi1, const Matrix& psi2,
                             const std::vector<double>& pi1, const std::vector<double>& pi2,
                             const Matrix& c, const std::vector<std::size_t>* perm = nullptr) {
    double ll = 0.0;
    for (std::size_t i = 0; i < psi1.rows(); ++i) {
        double m = coupled_row_mixture(psi1, psi2, pi1, pi2, c, i, perm);
        if (!(m > 0.0)) return neg_inf;
        ll += std::log(m);
    }
    return ll;
}

// Exponentiated gradient with a Sinkhorn-Knopp rescaling inner loop.
// Maximizes the coupled log-likelihood over C with C pi2 = 1, C^T pi1 = 1.
inline CouplingMatrix estimate_coupling(const Matrix& psi1, const Matrix& psi2,
                                        const std::vector<double>& pi1,
                                        const std::vector<double>& pi2,
                                        const SolverOptions& opts = {},
                                        const std::vector<std::size_t>* perm = nullptr) {
    const std::size_t K1 = pi1.size(), K2 = pi2.size();
    if (psi1.rows() != psi2.rows()) throw data_error("estimate_coupling: row mismatch");
    for (double p : pi1)
        if (!(p > 0.0)) throw data_error("estimate_coupling: pi1 must be strictly positive");
    for (double p : pi2)
        if (!(p > 0.0)) throw data_error("estimate_coupling: pi2 must be strictly positive");

    CouplingMatrix result;
    result.pi1 = pi1;
    result.pi2 = pi2;
    Matrix c(K1, K2, 1.0);
    Matrix best = c;
    double best_obj = coupled_loglik(psi1, psi2, pi1, pi2, c, perm);
    result.converged = false;

    Matrix grad(K1, K2), m(K1, K2);
    std::vector<double> u(K2), v(K1);
    for (int t = 0; t < opts.max_outer; ++t) {
        for (std::size_t a = 0; a < K1; ++a)
            for (std::size_t b = 0; b < K2; ++b) grad(a, b) = 0.0;
        for (std::size_t i = 0; i < psi1.rows(); ++i) {
            std::size_t i2 = perm != nullptr ? (*perm)[i] : i;
            double denom = coupled_row_mixture(psi1, psi2, pi1, pi2, c, i, perm);
            if (!(denom > 0.0))
                throw numerical_error("estimate_coupling: vanishing mixture density");
            for (std::size_t a = 0; a < K1; ++a) {
                double f = psi1(i, a) / denom;
                if (f == 0.0) continue;
                for (std::size_t b = 0; b < K2; ++b) grad(a, b) += f * psi2(i2, b);
            }
        }
        for (std::size_t a = 0; a < K1; ++a)
            for (std::size_t b = 0; b < K2; ++b)
                m(a, b) = c(a, b) * std::exp(opts.step_size * grad(a, b) - 1.0);

        std::fill(u.begin(), u.end(), 1.0);
        std::fill(v.begin(), v.end(), 1.0);
        for (int t2 = 0; t2 < opts.max_inner; ++t2) {
            double change = 0.0;
            for (std::size_t b = 0; b < K2; ++b) {
                double s = 0.0;
                for (std::size_t a = 0; a < K1; ++a) s += m(a, b) * pi1[a] * v[a];
                double nu = 1.0 / s;
                change = std::max(change, std::abs(nu - u[b]));
                u[b] = nu;
            }
            for (std::size_t a = 0; a < K1; ++a) {
                double s = 0.0;
                for (std::size_t b = 0; b < K2; ++b) s += m(a, b) * pi2[b] * u[b];
                double nv = 1.0 / s;
                change = std::max(change, std::abs(nv - v[a]));
                v[a] = nv;
            }
            if (change < opts.tol) break;
        }

        double delta = 0.0;
        for (std::size_t a = 0; a < K1; ++a)
            for (std::size_t b = 0; b < K2; ++b) {
                double next = v[a] * m(a, b) * u[b];
                delta = std::max(delta, std::abs(next - c(a, b)));
                c(a, b) = next;
            }
        double obj = coupled_loglik(psi1, psi2, pi1, pi2, c, perm);
        if (obj > best_obj) {
            best_obj = obj;
            best = c;
        }
        if (delta < opts.tol) {
            result.converged = true;
            break;
        }
    }
    result.c = best;
    return result;
}

// Pseudo-likelihood-ratio statistic. Per-row psi scale factors cancel between
// the coupled and independent mixtures.
inline double log_lambda(const Matrix& psi1, const Matrix& psi2,
                         const std::vector<double>& pi1, const std::vector<double>& pi2,
                         const Matrix& c, const std::vector<std::size_t>* perm = nullptr) {
    double stat = 0.0;
    for (std::size_t i = 0; i < psi1.rows(); ++i) {
        std::size_t i2 = perm != nullptr ? (*perm)[i] : i;
        double num = coupled_row_mixture(psi1, psi2, pi1, pi2, c, i, perm);
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t a = 0; a < pi1.size(); ++a) m1 += psi1(i, a) * pi1[a];
        for (std::size_t b = 0; b < pi2.size(); ++b) m2 += psi2(i2, b) * pi2[b];
        double den = m1 * m2;
        if (!(den > 0.0) || !(num > 0.0))
            throw numerical_error("log_lambda: vanishing mixture density");
        stat += std::log(num) - std::log(den);
    }
    return stat;
}

// Drop zero-probability marginal clusters (Proposition 1 needs interior
// margins). Returns the number of dropped clusters.
inline std::size_t drop_empty_clusters(Matrix& psi, std::vector<double>& pi) {
    std::vector<std::size_t> keep;
    for (std::size_t k = 0; k < pi.size(); ++k)
        if (pi[k] > 0.0) keep.push_back(k);
    std::size_t dropped = pi.size() - keep.size();
    if (dropped == 0) return 0;
    if (keep.empty()) throw data_error("independence test: all clusters empty");
    Matrix next(psi.rows(), keep.size());
    std::vector<double> next_pi(keep.size());
    double total = 0.0;
    for (std::size_t x = 0; x < keep.size(); ++x) {
        next_pi[x] = pi[keep[x]];
        total += next_pi[x];
        for (std::size_t i = 0; i < psi.rows(); ++i) next(i, x) = psi(i, keep[x]);
    }
    for (double& p : next_pi) p /= total;
    psi = std::move(next);
    pi = std::move(next_pi);
    return dropped;
}

// Permutation null: marginal estimates stay fixed; only C is re-estimated for
// each permuted row order of psi2.
inline IndependenceTestResult permutation_test(Matrix psi1, Matrix psi2,
                                               std::vector<double> pi1,
                                               std::vector<double> pi2, int B,
                                               std::uint64_t seed,
                                               const SolverOptions& opts = {}) {
    if (B < 1) throw data_error("permutation_test: B must be >= 1");
    IndependenceTestResult result;
    result.dropped_clusters_view1 = drop_empty_clusters(psi1, pi1);
    result.dropped_clusters_view2 = drop_empty_clusters(psi2, pi2);

    result.c_hat = estimate_coupling(psi1, psi2, pi1, pi2, opts);
    result.log_lambda = log_lambda(psi1, psi2, pi1, pi2, result.c_hat.c);

    const std::size_t n = psi1.rows();
    result.permutation_stats.resize(B);
    for (int b = 0; b < B; ++b) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng = derive_rng(seed, 0xD0, b);
        std::shuffle(perm.begin(), perm.end(), rng);
        CouplingMatrix cb = estimate_coupling(psi1, psi2, pi1, pi2, opts, &perm);
        result.permutation_stats[b] = log_lambda(psi1, psi2, pi1, pi2, cb.c, &perm);
    }
    int count = 0;
    for (double s : result.permutation_stats)
        if (result.log_lambda <= s) count++;
    result.p_value = static_cast<double>(count) / B;
    return result;
}

// Proposition-style factorization of a joint array: pi = diag(pi1) C diag(pi2).
inline CouplingMatrix decompose_pi(const Matrix& pi) {
    CouplingMatrix out;
    out.pi1.assign(pi.rows(), 0.0);
    out.pi2.assign(pi.cols(), 0.0);
    for (std::size_t a = 0; a < pi.rows(); ++a)
        for (std::size_t b = 0; b < pi.cols(); ++b) {
            out.pi1[a] += pi(a, b);
            out.pi2[b] += pi(a, b);
        }
    out.c = Matrix(pi.rows(), pi.cols());
    for (std::size_t a = 0; a < pi.rows(); ++a)
        for (std::size_t b = 0; b < pi.cols(); ++b) {
            if (!(out.pi1[a] > 0.0) || !(out.pi2[b] > 0.0))
                throw data_error("decompose_pi: margins must be strictly positive");
            out.c(a, b) = pi(a, b) / (out.pi1[a] * out.pi2[b]);
        }
    return out;
}

}  // namespace mvlbm::indeptest
