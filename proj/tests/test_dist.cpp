#include <catch2/catch_amalgamated.hpp>

#include "mvlbm/dist.hpp"

using namespace mvlbm;

TEST_CASE("multinomial log density reads off the table") {
    dist::BlockParams p = dist::Multinomial{{0.2, 0.8}};
    CHECK(dist::log_density(p, 1.0) == Catch::Approx(std::log(0.8)));
    CHECK_THROWS_AS(dist::log_density(p, 2.0), data_error);
}

TEST_CASE("gaussian log density at the mean") {
    dist::BlockParams p = dist::Gaussian{0.0, 1.0};
    CHECK(dist::log_density(p, 0.0) ==
          Catch::Approx(std::log(1.0 / std::sqrt(2.0 * M_PI))).margin(1e-14));
}

TEST_CASE("bos log density with beta zero is uniform") {
    dist::BlockParams p = dist::Bos{3, 1, 0.0};
    for (double x : {0.0, 1.0, 2.0})
        CHECK(dist::log_density(p, x) == Catch::Approx(std::log(1.0 / 3)).margin(1e-8));
}

TEST_CASE("poisson log density uses margin-dependent rate") {
    dist::BlockParams p = dist::Poisson{0.25};
    dist::PoissonMargins m{{2.0}, {2.0}};
    // rate = 2 * 2 * 0.25 = 1; log PMF of Poisson(1) at 1 = -1
    CHECK(dist::log_density(p, 1.0, &m, {0, 0}) == Catch::Approx(-1.0).margin(1e-14));
    CHECK_THROWS_AS(dist::log_density(p, 1.0), data_error);  // margins required
}

TEST_CASE("finite-support densities normalize exactly") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        int m = 2 + static_cast<int>(rng() % 5);
        std::vector<double> w(m);
        double total = 0.0;
        for (double& x : w) {
            x = uniform01(rng) + 0.01;
            total += x;
        }
        for (double& x : w) x /= total;
        dist::BlockParams mn = dist::Multinomial{w};
        dist::BlockParams bp = dist::Bos{m, 1 + static_cast<int>(rng() % m), uniform01(rng)};
        double sum_mn = 0.0, sum_bos = 0.0;
        for (int r = 0; r < m; ++r) {
            sum_mn += std::exp(dist::log_density(mn, r));
            sum_bos += std::exp(dist::log_density(bp, r));
        }
        CHECK(sum_mn == Catch::Approx(1.0).margin(1e-8));
        CHECK(sum_bos == Catch::Approx(1.0).margin(1e-8));
    }
}

TEST_CASE("gaussian density normalizes by quadrature") {
    dist::BlockParams p = dist::Gaussian{2.0, 4.0};
    double total = 0.0, h = 1e-3;
    for (double x = -40.0; x <= 44.0; x += h) total += std::exp(dist::log_density(p, x)) * h;
    CHECK(total == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("multinomial update ratios") {
    auto p = std::get<dist::Multinomial>(dist::multinomial_update({1.0, 2.0, 1.0})).p;
    CHECK(p[0] == Catch::Approx(0.25));
    CHECK(p[1] == Catch::Approx(0.5));
    CHECK(p[2] == Catch::Approx(0.25));
    auto d = std::get<dist::Multinomial>(dist::multinomial_update({4.0, 0.0, 0.0})).p;
    CHECK(d[0] == Catch::Approx(1.0));
    CHECK_THROWS_AS(dist::multinomial_update({0.0, 0.0}), dist::EmptyBlock);
}

TEST_CASE("gaussian update moments") {
    auto g = std::get<dist::Gaussian>(dist::gaussian_update({{1.0, 1.0}, {1.0, 3.0}}));
    CHECK(g.mu == Catch::Approx(2.0));
    CHECK(g.sigma2 == Catch::Approx(1.0));
    auto h = std::get<dist::Gaussian>(
        dist::gaussian_update({{1.0, 0.0}, {1.0, 0.0}, {1.0, 6.0}}));
    CHECK(h.mu == Catch::Approx(2.0));
    CHECK(h.sigma2 == Catch::Approx(8.0));
    auto single = std::get<dist::Gaussian>(dist::gaussian_update({{1.0, 5.0}}));
    CHECK(single.mu == Catch::Approx(5.0));
    CHECK(single.sigma2 == Catch::Approx(dist::default_variance_floor));
    CHECK_THROWS_AS(dist::gaussian_update({}), dist::EmptyBlock);
}

TEST_CASE("gaussian update is the weighted-likelihood argmax") {
    // grid oracle on a small weighted block
    std::vector<std::pair<double, double>> block{{1.0, 0.2}, {2.0, 1.4}, {0.5, -0.7}};
    auto g = std::get<dist::Gaussian>(dist::gaussian_update(block));
    auto loglik = [&](double mu, double s2) {
        double ll = 0.0;
        for (auto [w, x] : block)
            ll += w * (-0.5 * std::log(2 * M_PI * s2) - (x - mu) * (x - mu) / (2 * s2));
        return ll;
    };
    double best = loglik(g.mu, g.sigma2);
    for (double mu = -2.0; mu <= 2.0; mu += 0.01)
        for (double s2 = 0.05; s2 <= 3.0; s2 += 0.01) CHECK(loglik(mu, s2) <= best + 1e-9);
}

TEST_CASE("poisson update hand cases") {
    // 2x2 all-ones matrix, single block
    auto p = std::get<dist::Poisson>(dist::poisson_update(4.0, 4.0, 4.0));
    CHECK(p.delta == Catch::Approx(0.25));
    // implied cell rate n_i. * n_.j * delta = 2 * 2 * 0.25 = 1 = cell mean
    CHECK(2.0 * 2.0 * p.delta == Catch::Approx(1.0));
    CHECK(std::get<dist::Poisson>(dist::poisson_update(6.0, 6.0, 2.0)).delta ==
          Catch::Approx(0.5));
    CHECK(std::get<dist::Poisson>(dist::poisson_update(0.0, 3.0, 2.0)).delta ==
          Catch::Approx(0.0));
    CHECK_THROWS_AS(dist::poisson_update(1.0, 0.0, 2.0), dist::EmptyBlock);
}

TEST_CASE("bos update degenerate and symmetric cases") {
    auto b = std::get<dist::Bos>(dist::bos_update({0.0, 7.0, 0.0}, 3));
    CHECK(b.mu == 2);
    CHECK(b.beta > 1.0 - 1e-4);
    auto u = std::get<dist::Bos>(dist::bos_update({5.0, 5.0, 5.0}, 3));
    CHECK(u.beta < 0.05);
}

TEST_CASE("sampling consistency for discrete families") {
    Rng rng(5);
    dist::BlockParams mn = dist::Multinomial{{1.0, 0.0}};
    for (int t = 0; t < 100; ++t) CHECK(dist::sample(mn, rng) == 0.0);

    dist::BlockParams bp = dist::Bos{3, 2, 1.0};
    for (int t = 0; t < 100; ++t) CHECK(dist::sample(bp, rng) == 1.0);  // level 2, 0-based

    dist::BlockParams g = dist::Gaussian{100.0, 1.0};
    double sum = 0.0;
    const int n = 10000;
    for (int t = 0; t < n; ++t) sum += dist::sample(g, rng);
    CHECK(sum / n == Catch::Approx(100.0).margin(0.05));
}

TEST_CASE("poisson sampling uses the margin rate") {
    Rng rng(11);
    dist::BlockParams p = dist::Poisson{0.5};
    dist::PoissonMargins m{{4.0}, {3.0}};  // rate 6
    double sum = 0.0;
    const int n = 20000;
    for (int t = 0; t < n; ++t) sum += dist::sample(p, rng, &m, {0, 0});
    CHECK(sum / n == Catch::Approx(6.0).margin(0.1));
}

TEST_CASE("param counts match the penalty table") {
    CHECK(dist::param_count({FeatureKind::Nominal, 5}) == 4);
    CHECK(dist::param_count({FeatureKind::Ordinal, 3}) == 2);
    CHECK(dist::param_count({FeatureKind::Continuous, 0}) == 2);
    CHECK(dist::param_count({FeatureKind::Count, 0}) == 1);
}

TEST_CASE("margins are computed over observed cells only") {
    FeatureSetData set;
    set.values = Matrix(2, 2, 1.0);
    set.values(0, 1) = 5.0;
    set.observed = BoolMatrix(2, 2, true);
    set.observed.set(0, 1, false);
    auto m = dist::compute_margins(set);
    CHECK(m.row_sums[0] == Catch::Approx(1.0));
    CHECK(m.row_sums[1] == Catch::Approx(2.0));
    CHECK(m.col_sums[1] == Catch::Approx(1.0));
}
