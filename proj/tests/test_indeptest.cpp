#include <catch2/catch_amalgamated.hpp>

#include "mvlbm/indeptest.hpp"
#include "mvlbm/synthgen.hpp"

using namespace mvlbm;

namespace {

Matrix random_pi(std::size_t K1, std::size_t K2, Rng& rng) {
    Matrix pi(K1, K2);
    double total = 0.0;
    for (std::size_t a = 0; a < K1; ++a)
        for (std::size_t b = 0; b < K2; ++b) {
            pi(a, b) = uniform01(rng) + 0.01;
            total += pi(a, b);
        }
    for (std::size_t a = 0; a < K1; ++a)
        for (std::size_t b = 0; b < K2; ++b) pi(a, b) /= total;
    return pi;
}

// Correlated (strength 1) or independent label pairs turned into sharply
// peaked density rows.
void make_label_psi(std::size_t n, std::size_t K, bool coupled, std::uint64_t seed,
                    Matrix& psi1, Matrix& psi2) {
    Rng rng(seed);
    psi1 = Matrix(n, K);
    psi2 = Matrix(n, K);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t a = rng() % K;
        std::size_t b = coupled ? a : rng() % K;
        for (std::size_t k = 0; k < K; ++k) {
            psi1(i, k) = k == a ? 1.0 : 1e-6;
            psi2(i, k) = k == b ? 1.0 : 1e-6;
        }
    }
}

}  // namespace

TEST_CASE("joint array factorization round-trips") {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t K1 = 2 + rng() % 3, K2 = 2 + rng() % 3;
        Matrix pi = random_pi(K1, K2, rng);
        auto d = indeptest::decompose_pi(pi);
        Matrix back = d.pi_hat();
        for (std::size_t a = 0; a < K1; ++a)
            for (std::size_t b = 0; b < K2; ++b)
                CHECK(back(a, b) == Catch::Approx(pi(a, b)).margin(1e-10));
    }
    Matrix bad(2, 2, 0.0);
    bad(0, 0) = 1.0;
    CHECK_THROWS_AS(indeptest::decompose_pi(bad), data_error);
}

TEST_CASE("estimated coupling satisfies both margin constraints") {
    Rng rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        std::size_t n = 120, K1 = 3, K2 = 2 + trial % 2;
        Matrix psi1(n, K1), psi2(n, K2);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t a = 0; a < K1; ++a) psi1(i, a) = uniform01(rng) + 1e-3;
            for (std::size_t b = 0; b < K2; ++b) psi2(i, b) = uniform01(rng) + 1e-3;
        }
        std::vector<double> pi1(K1, 1.0 / K1), pi2(K2, 1.0 / K2);
        auto c = indeptest::estimate_coupling(psi1, psi2, pi1, pi2);
        for (std::size_t a = 0; a < K1; ++a) {
            double s = 0.0;
            for (std::size_t b = 0; b < K2; ++b) s += c.c(a, b) * pi2[b];
            CHECK(s == Catch::Approx(1.0).margin(1e-6));
        }
        for (std::size_t b = 0; b < K2; ++b) {
            double s = 0.0;
            for (std::size_t a = 0; a < K1; ++a) s += c.c(a, b) * pi1[a];
            CHECK(s == Catch::Approx(1.0).margin(1e-6));
        }
        // the fitted coupling can only improve on independence
        CHECK(indeptest::coupled_loglik(psi1, psi2, pi1, pi2, c.c) >=
              indeptest::coupled_loglik(psi1, psi2, pi1, pi2, Matrix(K1, K2, 1.0)) - 1e-9);
    }
}

TEST_CASE("all-ones coupling gives a zero statistic") {
    Rng rng(31);
    Matrix psi1(10, 3), psi2(10, 2);
    for (std::size_t i = 0; i < 10; ++i) {
        for (std::size_t a = 0; a < 3; ++a) psi1(i, a) = uniform01(rng) + 0.1;
        for (std::size_t b = 0; b < 2; ++b) psi2(i, b) = uniform01(rng) + 0.1;
    }
    std::vector<double> pi1{0.5, 0.3, 0.2}, pi2{0.6, 0.4};
    CHECK(indeptest::log_lambda(psi1, psi2, pi1, pi2, Matrix(3, 2, 1.0)) ==
          Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("statistic matches a three-row hand computation") {
    Matrix psi1(3, 2), psi2(3, 2), c(2, 2);
    psi1(0, 0) = 1.0;  psi1(0, 1) = 0.2;
    psi1(1, 0) = 0.3;  psi1(1, 1) = 1.0;
    psi1(2, 0) = 0.5;  psi1(2, 1) = 0.5;
    psi2(0, 0) = 0.9;  psi2(0, 1) = 0.1;
    psi2(1, 0) = 0.4;  psi2(1, 1) = 1.0;
    psi2(2, 0) = 1.0;  psi2(2, 1) = 0.6;
    c(0, 0) = 1.5;  c(0, 1) = 0.25;
    c(1, 0) = 0.5;  c(1, 1) = 1.75;
    std::vector<double> pi1{0.6, 0.4}, pi2{0.6, 0.4};

    double expected = 0.0;
    for (int i = 0; i < 3; ++i) {
        double num = 0.0, m1 = 0.0, m2 = 0.0;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                num += psi1(i, a) * pi1[a] * c(a, b) * pi2[b] * psi2(i, b);
        for (int a = 0; a < 2; ++a) m1 += psi1(i, a) * pi1[a];
        for (int b = 0; b < 2; ++b) m2 += psi2(i, b) * pi2[b];
        expected += std::log(num / (m1 * m2));
    }
    CHECK(indeptest::log_lambda(psi1, psi2, pi1, pi2, c) ==
          Catch::Approx(expected).margin(1e-12));
}

TEST_CASE("statistic is invariant to per-row density rescaling") {
    Rng rng(41);
    Matrix psi1(20, 3), psi2(20, 3);
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t k = 0; k < 3; ++k) {
            psi1(i, k) = uniform01(rng) + 0.05;
            psi2(i, k) = uniform01(rng) + 0.05;
        }
    std::vector<double> pi1(3, 1.0 / 3), pi2(3, 1.0 / 3);
    Matrix c = indeptest::estimate_coupling(psi1, psi2, pi1, pi2).c;
    double base = indeptest::log_lambda(psi1, psi2, pi1, pi2, c);

    Matrix scaled1 = psi1, scaled2 = psi2;
    for (std::size_t i = 0; i < 20; ++i) {
        double f1 = 0.1 + 5.0 * uniform01(rng), f2 = 0.1 + 5.0 * uniform01(rng);
        for (std::size_t k = 0; k < 3; ++k) {
            scaled1(i, k) *= f1;
            scaled2(i, k) *= f2;
        }
    }
    CHECK(indeptest::log_lambda(scaled1, scaled2, pi1, pi2, c) ==
          Catch::Approx(base).margin(1e-10));
}

TEST_CASE("identity permutation reproduces the observed statistic") {
    Rng rng(47);
    Matrix psi1(30, 2), psi2(30, 2);
    for (std::size_t i = 0; i < 30; ++i)
        for (std::size_t k = 0; k < 2; ++k) {
            psi1(i, k) = uniform01(rng) + 0.05;
            psi2(i, k) = uniform01(rng) + 0.05;
        }
    std::vector<double> pi1{0.5, 0.5}, pi2{0.5, 0.5};
    std::vector<std::size_t> identity(30);
    std::iota(identity.begin(), identity.end(), 0);
    auto plain = indeptest::estimate_coupling(psi1, psi2, pi1, pi2);
    auto permuted = indeptest::estimate_coupling(psi1, psi2, pi1, pi2, {}, &identity);
    CHECK(indeptest::log_lambda(psi1, psi2, pi1, pi2, permuted.c, &identity) ==
          Catch::Approx(indeptest::log_lambda(psi1, psi2, pi1, pi2, plain.c)).margin(1e-12));
}

TEST_CASE("uniform densities keep the independence fixed point") {
    Matrix psi1(15, 3, 1.0), psi2(15, 2, 1.0);
    std::vector<double> pi1(3, 1.0 / 3), pi2{0.5, 0.5};
    auto c = indeptest::estimate_coupling(psi1, psi2, pi1, pi2);
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 2; ++b) CHECK(c.c(a, b) == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("empty clusters are dropped and margins renormalized") {
    Matrix psi(4, 3, 0.5);
    std::vector<double> pi{0.6, 0.0, 0.2};
    CHECK(indeptest::drop_empty_clusters(psi, pi) == 1);
    REQUIRE(pi.size() == 2);
    CHECK(pi[0] == Catch::Approx(0.75));
    CHECK(pi[1] == Catch::Approx(0.25));
    CHECK(psi.cols() == 2);
    std::vector<double> all_zero{0.0, 0.0};
    Matrix psi2(4, 2, 0.5);
    CHECK_THROWS_AS(indeptest::drop_empty_clusters(psi2, all_zero), data_error);
}

TEST_CASE("p-values live on the permutation grid") {
    Matrix psi1, psi2;
    make_label_psi(60, 3, false, 201, psi1, psi2);
    std::vector<double> pi1(3, 1.0 / 3), pi2(3, 1.0 / 3);
    const int B = 20;
    auto r = indeptest::permutation_test(psi1, psi2, pi1, pi2, B, 77);
    double scaled = r.p_value * B;
    CHECK(scaled == Catch::Approx(std::round(scaled)).margin(1e-9));
    CHECK(r.p_value >= 0.0);
    CHECK(r.p_value <= 1.0);
    CHECK(r.permutation_stats.size() == B);

    auto r1 = indeptest::permutation_test(psi1, psi2, pi1, pi2, 1, 77);
    CHECK((r1.p_value == 0.0 || r1.p_value == 1.0));
    CHECK_THROWS_AS(indeptest::permutation_test(psi1, psi2, pi1, pi2, 0, 77), data_error);
}

TEST_CASE("coupled labels are detected, independent labels are not") {
    std::vector<double> pi(3, 1.0 / 3);
    Matrix psi1, psi2;

    make_label_psi(100, 3, true, 301, psi1, psi2);
    auto dep = indeptest::permutation_test(psi1, psi2, pi, pi, 30, 5);
    CHECK(dep.p_value == 0.0);
    CHECK(dep.log_lambda > 10.0);
    // the coupling concentrates near a (scaled) permutation matrix
    Matrix pih = dep.c_hat.pi_hat();
    double diag = pih(0, 0) + pih(1, 1) + pih(2, 2);
    CHECK(diag > 2.0 * (1.0 - diag));

    make_label_psi(100, 3, false, 302, psi1, psi2);
    auto ind = indeptest::permutation_test(psi1, psi2, pi, pi, 30, 5);
    CHECK(ind.p_value > 0.05);
}

TEST_CASE("density matrix matches a hand product and normalizes by row max") {
    // two gaussian row components over two columns, one column cluster
    MultiViewDataset ds;
    ds.n = 3;
    View view;
    view.schema.feature_sets = {{{FeatureKind::Continuous, 0}, 2}};
    FeatureSetData set;
    set.values = Matrix(3, 2);
    set.values(0, 0) = 0.1;  set.values(0, 1) = -0.2;
    set.values(1, 0) = 4.9;  set.values(1, 1) = 5.3;
    set.values(2, 0) = 2.5;  set.values(2, 1) = 2.4;
    set.observed = BoolMatrix(3, 2, true);
    view.sets.push_back(set);
    ds.views.push_back(view);

    ModelState model;
    model.K = {2};
    model.L = {{1}};
    model.schema = {view.schema};
    model.pi = JointMixingArray({2});
    model.pi[0] = 0.5;
    model.pi[1] = 0.5;
    model.rho = {{{1.0}}};
    model.alpha = {{{dist::BlockParams(dist::Gaussian{0.0, 1.0}),
                     dist::BlockParams(dist::Gaussian{5.0, 1.0})}}};

    PartitionState parts;
    parts.z = {{0, 1, 0}};
    parts.w = {{{0, 0}}};
    auto dm = indeptest::density_matrix(ds, model, parts);
    REQUIRE(dm.psi.rows() == 3);
    REQUIRE(dm.psi.cols() == 2);
    for (std::size_t i = 0; i < 3; ++i) {
        std::array<double, 2> raw{};
        for (int k = 0; k < 2; ++k) {
            double mu = k == 0 ? 0.0 : 5.0;
            double ll = 0.0;
            for (int j = 0; j < 2; ++j) {
                double x = set.values(i, j);
                ll += -0.5 * std::log(2 * M_PI) - 0.5 * (x - mu) * (x - mu);
            }
            raw[k] = ll;
        }
        double mx = std::max(raw[0], raw[1]);
        for (int k = 0; k < 2; ++k)
            CHECK(dm.psi(i, k) == Catch::Approx(std::exp(raw[k] - mx)).margin(1e-10));
        CHECK(std::max(dm.psi(i, 0), dm.psi(i, 1)) == Catch::Approx(1.0).margin(1e-12));
        CHECK(dm.log_scale[i] == Catch::Approx(mx).margin(1e-10));
    }

    // duplicated rows give identical psi rows
    ds.views[0].sets[0].values(2, 0) = 0.1;
    ds.views[0].sets[0].values(2, 1) = -0.2;
    auto dm2 = indeptest::density_matrix(ds, model, parts);
    CHECK(dm2.psi(2, 0) == dm2.psi(0, 0));
    CHECK(dm2.psi(2, 1) == dm2.psi(0, 1));
}
