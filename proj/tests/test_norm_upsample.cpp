#include "test_util.hpp"

#include "conres/norm.hpp"
#include "conres/ops.hpp"
#include "conres/upsample.hpp"

using namespace conres;

TEST_CASE("group_norm") {
    SECTION("constant input normalizes to zero") {
        Graph<double> g;
        const auto x = g.constant(Tensor<double>::full({1, 4, 2, 2, 2}, 5.5));
        const auto gamma = g.constant(Tensor<double>::full({4}, 1.0));
        const auto beta = g.constant(Tensor<double>({4}));
        const auto y = ops::group_norm(g, x, 2, gamma, beta, 1e-5);
        for (const auto v : g.value(y).data) REQUIRE(v == Catch::Approx(0.0).margin(1e-9));
    }
    SECTION("gamma=0 collapses to beta") {
        Graph<double> g;
        Rng rng(4);
        const auto x = g.constant(random_normal<double>({2, 4, 3, 3, 3}, rng));
        const auto gamma = g.constant(Tensor<double>({4}));
        const auto beta = g.constant(Tensor<double>::full({4}, -2.25));
        const auto y = ops::group_norm(g, x, 4, gamma, beta, 1e-5);
        for (const auto v : g.value(y).data) REQUIRE(v == Catch::Approx(-2.25));
    }
    SECTION("single group, two channels holding 1 and 3") {
        Graph<double> g;
        Tensor<double> xv({1, 2, 1, 2, 2});
        for (std::int64_t i = 0; i < 4; ++i) xv[i] = 1.0;
        for (std::int64_t i = 4; i < 8; ++i) xv[i] = 3.0;
        const auto x = g.constant(xv);
        const auto gamma = g.constant(Tensor<double>::full({2}, 1.0));
        const auto beta = g.constant(Tensor<double>({2}));
        const double eps = 1e-5;
        const auto y = ops::group_norm(g, x, 1, gamma, beta, eps);
        const double expect = 1.0 / std::sqrt(1.0 + eps);
        for (std::int64_t i = 0; i < 4; ++i) REQUIRE(g.value(y)[i] == Catch::Approx(-expect).epsilon(1e-10));
        for (std::int64_t i = 4; i < 8; ++i) REQUIRE(g.value(y)[i] == Catch::Approx(expect).epsilon(1e-10));
    }
    SECTION("per-group mean ~0 and variance ~1 with identity affine") {
        Rng rng(8);
        for (int trial = 0; trial < 10; ++trial) {
            Graph<double> g;
            const std::int64_t c = 8, groups = 4;
            const auto x = g.constant(random_normal<double>({2, c, 3, 4, 4}, rng, 1.0, 3.0));
            const auto gamma = g.constant(Tensor<double>::full({c}, 1.0));
            const auto beta = g.constant(Tensor<double>({c}));
            const auto y = ops::group_norm(g, x, groups, gamma, beta, 1e-5);
            const auto& v = g.value(y);
            const std::int64_t spatial = 48, cg = c / groups, gsize = cg * spatial;
            for (std::int64_t n = 0; n < 2; ++n)
                for (std::int64_t grp = 0; grp < groups; ++grp) {
                    const std::int64_t base = (n * c + grp * cg) * spatial;
                    double mean = 0, var = 0;
                    for (std::int64_t i = 0; i < gsize; ++i) mean += v[base + i];
                    mean /= static_cast<double>(gsize);
                    for (std::int64_t i = 0; i < gsize; ++i) var += (v[base + i] - mean) * (v[base + i] - mean);
                    var /= static_cast<double>(gsize);
                    REQUIRE(std::abs(mean) < 1e-4);
                    REQUIRE(var == Catch::Approx(1.0).margin(1e-4));
                }
        }
    }
    SECTION("groups must divide channels") {
        Graph<double> g;
        const auto x = g.constant(Tensor<double>::full({1, 6, 1, 1, 1}, 1.0));
        const auto gamma = g.constant(Tensor<double>::full({6}, 1.0));
        const auto beta = g.constant(Tensor<double>({6}));
        REQUIRE_THROWS_AS(ops::group_norm(g, x, 4, gamma, beta, 1e-5), ConfigError);
    }
}

TEST_CASE("upsample_trilinear") {
    SECTION("scale 1 is the identity") {
        Graph<double> g;
        Rng rng(12);
        const auto xv = random_normal<double>({1, 2, 3, 4, 5}, rng);
        const auto y = ops::upsample_trilinear(g, g.constant(xv), {1, 1, 1});
        REQUIRE(testutil::approx_equal(g.value(y), xv, 1e-12));
    }
    SECTION("constants stay constant at any scale") {
        Graph<double> g;
        const auto x = g.constant(Tensor<double>::full({1, 1, 2, 3, 2}, -0.75));
        const auto y = ops::upsample_trilinear(g, x, {2, 3, 4});
        REQUIRE(g.value(y).shape == Shape{1, 1, 4, 9, 8});
        for (const auto v : g.value(y).data) REQUIRE(v == Catch::Approx(-0.75));
    }
    SECTION("1D doubling of [0,1] gives the half-pixel pattern") {
        Graph<double> g;
        const auto x = g.constant(Tensor<double>({1, 1, 1, 1, 2}, {0.0, 1.0}));
        const auto y = ops::upsample_trilinear(g, x, {1, 1, 2});
        const auto& v = g.value(y);
        REQUIRE(v[0] == Catch::Approx(0.0).margin(1e-12));
        REQUIRE(v[1] == Catch::Approx(0.25));
        REQUIRE(v[2] == Catch::Approx(0.75));
        REQUIRE(v[3] == Catch::Approx(1.0));
    }
    SECTION("bounds and constant-mean preservation") {
        Rng rng(21);
        for (int trial = 0; trial < 10; ++trial) {
            Graph<double> g;
            const auto xv = random_normal<double>({1, 1, 3, 4, 4}, rng);
            const auto y = ops::upsample_trilinear(g, g.constant(xv), {2, 2, 2});
            double in_min = xv[0], in_max = xv[0];
            for (const auto v : xv.data) {
                in_min = std::min(in_min, v);
                in_max = std::max(in_max, v);
            }
            for (const auto v : g.value(y).data) {
                REQUIRE(v >= in_min - 1e-12);
                REQUIRE(v <= in_max + 1e-12);
            }
        }
    }
    SECTION("scale below 1 is rejected") {
        Graph<double> g;
        const auto x = g.constant(Tensor<double>::full({1, 1, 2, 2, 2}, 1.0));
        REQUIRE_THROWS_AS(ops::upsample_trilinear(g, x, {0, 1, 1}), ConfigError);
    }
}
