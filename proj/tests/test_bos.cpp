#include <catch2/catch_amalgamated.hpp>

#include "mvlbm/bos.hpp"

using namespace mvlbm;

namespace {

// Coarse grid-search oracle over (mu, beta).
bos::FitResult grid_fit(const std::vector<double>& counts, int m) {
    bos::FitResult best;
    for (int mu = 1; mu <= m; ++mu)
        for (int g = 0; g <= 1000; ++g) {
            double beta = g / 1000.0;
            double ll = bos::weighted_loglik(counts, m, mu, beta);
            if (ll > best.loglik) best = {mu, beta, ll};
        }
    return best;
}

}  // namespace

TEST_CASE("pmf is a distribution") {
    for (int m : {2, 3, 5, 7}) {
        for (int mu = 1; mu <= m; ++mu) {
            for (double beta : {0.0, 0.1, 0.5, 0.9, 1.0}) {
                auto p = bos::pmf(m, mu, beta);
                double total = 0.0;
                for (double x : p) {
                    CHECK(x >= 0.0);
                    total += x;
                }
                CHECK(total == Catch::Approx(1.0).margin(1e-12));
            }
        }
    }
}

TEST_CASE("beta zero is uniform") {
    for (int mu = 1; mu <= 3; ++mu) {
        auto p = bos::pmf(3, mu, 0.0);
        for (double x : p) CHECK(x == Catch::Approx(1.0 / 3).margin(1e-8));
    }
}

TEST_CASE("beta one concentrates on mu") {
    for (int m : {3, 5}) {
        for (int mu = 1; mu <= m; ++mu) {
            auto p = bos::pmf(m, mu, 1.0);
            CHECK(p[mu - 1] == Catch::Approx(1.0).margin(1e-7));
        }
    }
}

TEST_CASE("pmf is unimodal around mu") {
    auto p = bos::pmf(5, 3, 0.6);
    CHECK(p[2] > p[1]);
    CHECK(p[1] > p[0]);
    CHECK(p[2] > p[3]);
    CHECK(p[3] > p[4]);
}

TEST_CASE("sampling frequencies match the exact pmf") {
    const int m = 5, mu = 2;
    const double beta = 0.55;
    auto p = bos::pmf(m, mu, beta);
    Rng rng(1234);
    const int n = 100000;
    std::vector<int> counts(m, 0);
    for (int t = 0; t < n; ++t) counts[bos::sample(m, mu, beta, rng) - 1]++;
    for (int r = 0; r < m; ++r) {
        double freq = static_cast<double>(counts[r]) / n;
        double se = std::sqrt(p[r] * (1 - p[r]) / n);
        CHECK(std::abs(freq - p[r]) < 3.5 * se + 1e-9);
    }
}

TEST_CASE("fit recovers degenerate concentration") {
    // all mass on level 2 of m=3
    auto fit = bos::fit({0.0, 10.0, 0.0}, 3);
    CHECK(fit.mu == 2);
    CHECK(fit.beta > 1.0 - 1e-4);
}

TEST_CASE("fit on uniform counts finds beta near zero") {
    auto fit = bos::fit({5.0, 5.0, 5.0}, 3);
    CHECK(fit.beta < 0.05);
}

TEST_CASE("fit finds the symmetric center") {
    auto fit = bos::fit({2.0, 10.0, 2.0}, 3);
    CHECK(fit.mu == 2);
}

TEST_CASE("fit matches the grid oracle") {
    Rng rng(7);
    for (int trial = 0; trial < 12; ++trial) {
        int m = 3 + static_cast<int>(rng() % 3);
        std::vector<double> counts(m);
        for (double& c : counts) c = static_cast<double>(rng() % 40);
        double total = 0.0;
        for (double c : counts) total += c;
        if (!(total > 0.0)) counts[0] = 1.0;

        auto fit = bos::fit(counts, m);
        auto oracle = grid_fit(counts, m);
        // likelihood agreement (mu can tie at equal likelihood)
        CHECK(fit.loglik >= oracle.loglik - 1e-6);
        CHECK(std::abs(fit.loglik - oracle.loglik) < 1e-4 * (1.0 + std::abs(oracle.loglik)));
    }
}

TEST_CASE("fit rejects an empty block") {
    CHECK_THROWS_AS(bos::fit({0.0, 0.0, 0.0}, 3), data_error);
}

TEST_CASE("pmf validates arguments") {
    CHECK_THROWS_AS(bos::pmf(1, 1, 0.5), data_error);
    CHECK_THROWS_AS(bos::pmf(3, 0, 0.5), data_error);
    CHECK_THROWS_AS(bos::pmf(3, 4, 0.5), data_error);
}
