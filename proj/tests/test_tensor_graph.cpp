#include "test_util.hpp"

#include "conres/ops.hpp"

using namespace conres;

TEST_CASE("tensor shape and data stay consistent") {
    Tensor<float> t({2, 3, 4});
    REQUIRE(t.numel() == 24);
    REQUIRE(static_cast<std::int64_t>(t.data.size()) == shape_numel(t.shape));

    SECTION("mismatched data length is rejected") {
        REQUIRE_THROWS_AS(Tensor<float>({2, 2}, {1.0f, 2.0f, 3.0f}), ConfigError);
    }
    SECTION("zero or negative extents are rejected") {
        REQUIRE_THROWS_AS(Tensor<float>({2, 0}), ConfigError);
        REQUIRE_THROWS_AS(Tensor<float>({-1}), ConfigError);
    }
    SECTION("row-major indexing") {
        Tensor<float> u({2, 3});
        u.at({1, 2}) = 7.0f;
        REQUIRE(u[5] == 7.0f);
        REQUIRE_THROWS_AS(u.at({2, 0}), UsageError);
    }
}

TEST_CASE("rng streams are deterministic and reproducible") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
    bool differs = false;
    Rng a2(42);
    for (int i = 0; i < 10; ++i) differs = differs || (a2.next_u64() != c.next_u64());
    REQUIRE(differs);

    Rng d(7);
    for (int i = 0; i < 1000; ++i) {
        const double u = d.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        const auto k = d.uniform_int(-3, 5);
        REQUIRE(k >= -3);
        REQUIRE(k <= 5);
    }
}

TEST_CASE("backward: linear loss gives grad equal to the fixed factor") {
    Graph<double> g;
    Tensor<double> xv({4}, {1.0, -2.0, 3.0, 0.5});
    Tensor<double> wv({4}, {0.1, 0.2, 0.3, 0.4});
    const auto x = g.constant(xv);
    const auto w = g.parameter("w", wv);
    const auto loss = ops::sum(g, ops::mul(g, w, x));
    g.backward(loss);
    const auto grads = g.parameter_gradients();
    REQUIRE(testutil::approx_equal(grads.at("w"), xv, 1e-12));
}

TEST_CASE("backward: sigmoid gradient matches the analytic derivative") {
    Graph<double> g;
    const double w0 = 0.37, c = 2.5;
    const auto w = g.parameter("w", Tensor<double>::scalar(w0));
    const auto loss = ops::scalar_mul(g, ops::sigmoid(g, w), c);
    g.backward(loss);
    const double s = 1.0 / (1.0 + std::exp(-w0));
    const double expected = c * s * (1.0 - s);
    REQUIRE(g.parameter_gradients().at("w")[0] == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("backward: parameters not used by the loss get zero gradients") {
    Graph<double> g;
    const auto used = g.parameter("used", Tensor<double>::scalar(2.0));
    g.parameter("unused", Tensor<double>({3}, {1.0, 2.0, 3.0}));
    const auto loss = ops::scalar_mul(g, used, 3.0);
    g.backward(loss);
    const auto grads = g.parameter_gradients();
    REQUIRE(grads.at("used")[0] == Catch::Approx(3.0));
    for (const auto v : grads.at("unused").data) REQUIRE(v == 0.0);
}

TEST_CASE("backward rejects non-scalar losses") {
    Graph<double> g;
    const auto w = g.parameter("w", Tensor<double>({2}, {1.0, 2.0}));
    const auto y = ops::scalar_mul(g, w, 2.0);
    REQUIRE_THROWS_AS(g.backward(y), UsageError);
}

TEST_CASE("gradients accumulate across fan-out") {
    Graph<double> g;
    const auto w = g.parameter("w", Tensor<double>::scalar(1.5));
    // loss = w*w + 3w -> dloss/dw = 2w + 3
    const auto loss = ops::add(g, ops::mul(g, w, w), ops::scalar_mul(g, w, 3.0));
    g.backward(loss);
    REQUIRE(g.parameter_gradients().at("w")[0] == Catch::Approx(2.0 * 1.5 + 3.0));
}
