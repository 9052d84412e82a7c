#include <catch2/catch_amalgamated.hpp>

#include "mvlbm/synthgen.hpp"

using namespace mvlbm;

TEST_CASE("dependency-controlled mixing array takes its closed form") {
    auto p0 = synthgen::make_pi(3, 0.0);
    auto p5 = synthgen::make_pi(3, 0.5);
    auto p1 = synthgen::make_pi(3, 1.0);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            CHECK(p0.at({a, b}) == Catch::Approx(1.0 / 9).margin(1e-15));
            CHECK(p5.at({a, b}) ==
                  Catch::Approx(a == b ? 2.0 / 9 : 1.0 / 18).margin(1e-15));
            CHECK(p1.at({a, b}) == Catch::Approx(a == b ? 1.0 / 3 : 0.0).margin(1e-15));
        }
    for (double d : {0.0, 0.3, 1.0}) {
        auto pi = synthgen::make_pi(4, d);
        for (std::size_t v = 0; v < 2; ++v) {
            auto marg = pi.marginal(v);
            for (double m : marg) CHECK(m == Catch::Approx(0.25).margin(1e-15));
        }
    }
    CHECK_THROWS_AS(synthgen::make_pi(0, 0.5), data_error);
    CHECK_THROWS_AS(synthgen::make_pi(3, 1.5), data_error);
}

TEST_CASE("full dependence copies the row partition across views") {
    auto spec = synthgen::benchmark_spec(200, 1.0, 10, 42);
    auto gen = synthgen::generate(spec);
    CHECK(gen.row_labels[0] == gen.row_labels[1]);
}

TEST_CASE("zero dependence passes a chi-square independence check") {
    auto spec = synthgen::benchmark_spec(4000, 0.0, 2, 43);
    auto gen = synthgen::generate(spec);
    double table[3][3] = {};
    double m1[3] = {}, m2[3] = {};
    for (std::size_t i = 0; i < spec.n; ++i) {
        table[gen.row_labels[0][i]][gen.row_labels[1][i]] += 1.0;
        m1[gen.row_labels[0][i]] += 1.0;
        m2[gen.row_labels[1][i]] += 1.0;
    }
    double chi2 = 0.0;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            double e = m1[a] * m2[b] / static_cast<double>(spec.n);
            chi2 += (table[a][b] - e) * (table[a][b] - e) / e;
        }
    CHECK(chi2 < 18.47);  // 0.999 quantile of chi-square with 4 df
}

TEST_CASE("generation is reproducible and seed-sensitive") {
    auto spec = synthgen::benchmark_spec(50, 0.5, 5, 99);
    auto a = synthgen::generate(spec);
    auto b = synthgen::generate(spec);
    CHECK(a.row_labels == b.row_labels);
    CHECK(a.col_labels == b.col_labels);
    for (std::size_t v = 0; v < 2; ++v)
        for (std::size_t s = 0; s < 4; ++s) {
            const auto& ma = a.dataset.views[v].sets[s].values;
            const auto& mb = b.dataset.views[v].sets[s].values;
            for (std::size_t i = 0; i < ma.rows(); ++i)
                for (std::size_t j = 0; j < ma.cols(); ++j) CHECK(ma(i, j) == mb(i, j));
        }
    spec.seed = 100;
    auto c = synthgen::generate(spec);
    CHECK(a.dataset.views[0].sets[1].values(0, 0) !=
          c.dataset.views[0].sets[1].values(0, 0));
}

TEST_CASE("benchmark dimensions and label balance") {
    auto spec = synthgen::benchmark_spec(300, 0.5, 60, 7);
    auto gen = synthgen::generate(spec);
    REQUIRE(gen.dataset.views.size() == 2);
    for (std::size_t v = 0; v < 2; ++v) {
        REQUIRE(gen.dataset.views[v].sets.size() == 4);
        for (const auto& set : gen.dataset.views[v].sets) {
            CHECK(set.values.rows() == 300);
            CHECK(set.values.cols() == 60);
        }
        double freq[3] = {};
        for (int k : gen.row_labels[v]) freq[k] += 1.0 / 300.0;
        for (double f : freq) CHECK(f == Catch::Approx(1.0 / 3).margin(0.12));
    }
}

TEST_CASE("empirical block statistics match the planted parameters") {
    auto spec = synthgen::benchmark_spec(600, 0.5, 40, 11);
    auto gen = synthgen::generate(spec);

    auto block_values = [&](std::size_t v, std::size_t s, int k, int l) {
        std::vector<double> out;
        const auto& set = gen.dataset.views[v].sets[s];
        for (std::size_t i = 0; i < set.values.rows(); ++i) {
            if (gen.row_labels[v][i] != k) continue;
            for (std::size_t j = 0; j < set.values.cols(); ++j)
                if (gen.col_labels[v][s][j] == l) out.push_back(set.values(i, j));
        }
        return out;
    };
    auto mean = [](const std::vector<double>& x) {
        double s = 0.0;
        for (double v : x) s += v;
        return s / static_cast<double>(x.size());
    };

    // continuous block (0,0): N(100, 1)
    auto g00 = block_values(0, 1, 0, 0);
    REQUIRE(g00.size() > 1000);
    CHECK(mean(g00) == Catch::Approx(100.0).margin(0.2));
    double var = 0.0;
    for (double x : g00) var += (x - 100.0) * (x - 100.0);
    CHECK(var / static_cast<double>(g00.size()) == Catch::Approx(1.0).margin(0.15));

    // count block (1,2): direct Poisson rate 25
    auto c12 = block_values(0, 3, 1, 2);
    REQUIRE(c12.size() > 1000);
    CHECK(mean(c12) == Catch::Approx(25.0).margin(0.6));

    // nominal block (0,0): level 3 (stored 0-based as 2) has probability 0.8
    auto n00 = block_values(0, 0, 0, 0);
    double hits = 0.0;
    for (double x : n00)
        if (x == 2.0) hits += 1.0;
    CHECK(hits / static_cast<double>(n00.size()) == Catch::Approx(0.8).margin(0.04));

    // ordinal block (0,0): BOS(mu=3, beta=0.4)
    auto o00 = block_values(0, 2, 0, 0);
    auto pmf = bos::pmf(3, 3, 0.4);
    double top = 0.0;
    for (double x : o00)
        if (x == 2.0) top += 1.0;
    CHECK(top / static_cast<double>(o00.size()) == Catch::Approx(pmf[2]).margin(0.04));
}

TEST_CASE("masking hides exactly the requested cell count") {
    auto spec = synthgen::benchmark_spec(60, 0.5, 10, 3);
    auto gen = synthgen::generate(spec);
    // 2 views x 4 sets x 60 x 10 = 4800 cells
    auto masked = synthgen::mask_missing(gen.dataset, 0.35, derive_rng(3, 0xF1));
    std::size_t hidden = 0;
    for (std::size_t v = 0; v < 2; ++v)
        for (std::size_t s = 0; s < 4; ++s) {
            const auto& set = masked.views[v].sets[s];
            for (std::size_t i = 0; i < 60; ++i)
                for (std::size_t j = 0; j < 10; ++j) {
                    if (!set.observed(i, j)) hidden++;
                    CHECK(set.values(i, j) == gen.dataset.views[v].sets[s].values(i, j));
                }
        }
    CHECK(hidden == static_cast<std::size_t>(0.35 * 4800));

    auto same = synthgen::mask_missing(gen.dataset, 0.35, derive_rng(3, 0xF1));
    for (std::size_t v = 0; v < 2; ++v)
        for (std::size_t s = 0; s < 4; ++s)
            for (std::size_t i = 0; i < 60; ++i)
                for (std::size_t j = 0; j < 10; ++j)
                    CHECK(same.views[v].sets[s].observed(i, j) ==
                          masked.views[v].sets[s].observed(i, j));

    auto none = synthgen::mask_missing(gen.dataset, 0.0, derive_rng(3, 0xF1));
    for (std::size_t v = 0; v < 2; ++v)
        for (std::size_t s = 0; s < 4; ++s)
            for (std::size_t i = 0; i < 60; ++i)
                for (std::size_t j = 0; j < 10; ++j)
                    CHECK(none.views[v].sets[s].observed(i, j));

    CHECK_THROWS_AS(synthgen::mask_missing(gen.dataset, 1.0, derive_rng(3, 0xF1)),
                    data_error);
    CHECK_THROWS_AS(synthgen::mask_missing(gen.dataset, -0.1, derive_rng(3, 0xF1)),
                    data_error);
}

TEST_CASE("generated datasets pass validation") {
    for (double missing : {0.0, 0.15}) {
        auto spec = synthgen::benchmark_spec(40, 0.875, 6, 21);
        spec.missing_fraction = missing;
        auto gen = synthgen::generate(spec);
        CHECK(validate_dataset(gen.dataset).ok());
    }
}
