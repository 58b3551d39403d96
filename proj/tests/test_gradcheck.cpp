#include "test_util.hpp"

#include "conres/conv.hpp"
#include "conres/gradcheck.hpp"
#include "conres/losses.hpp"
#include "conres/norm.hpp"
#include "conres/ops.hpp"
#include "conres/upsample.hpp"

using namespace conres;

TEST_CASE("grad_check: linear programs are exact to rounding") {
    const auto report = grad_check(
        [](Rng& rng) {
            NamedTensors in;
            in.emplace_back("w", random_normal<double>({6}, rng));
            return in;
        },
        [](Graph<double>& g, const std::vector<std::int64_t>& ids) {
            const auto c = g.constant(Tensor<double>({6}, {1, -2, 3, 0.5, 4, -1}));
            return ops::sum(g, ops::mul(g, ids[0], c));
        });
    REQUIRE(report.pass);
    REQUIRE(report.max_rel_err <= 1e-9);
}

TEST_CASE("grad_check: conv3d + group_norm + sigmoid chain") {
    const auto report = grad_check(
        [](Rng& rng) {
            NamedTensors in;
            in.emplace_back("x", random_normal<double>({1, 4, 4, 6, 6}, rng));
            in.emplace_back("w", random_normal<double>({4, 4, 3, 3, 3}, rng, 0.0, 0.3));
            in.emplace_back("b", random_normal<double>({4}, rng, 0.0, 0.1));
            in.emplace_back("gamma", random_normal<double>({4}, rng, 1.0, 0.1));
            in.emplace_back("beta", random_normal<double>({4}, rng, 0.0, 0.1));
            return in;
        },
        [](Graph<double>& g, const std::vector<std::int64_t>& ids) {
            ConvSpec sp;
            sp.in_channels = 4;
            sp.out_channels = 4;
            sp.pad = {1, 1, 1};
            const auto y = ops::conv3d(g, ids[0], ids[1], ids[2], sp);
            const auto n = ops::group_norm(g, y, 2, ids[3], ids[4], 1e-5);
            return ops::sum(g, ops::sigmoid(g, n));
        });
    INFO("max rel err " << report.max_rel_err);
    REQUIRE(report.pass);
    REQUIRE(report.max_rel_err <= 1e-4);
}

TEST_CASE("grad_check: slicewise_abs_diff away from kinks") {
    // inputs resampled until all pairwise slice differences clear the margin
    GradCheckOptions opts;
    opts.kink_margin = 0.1;
    const auto report = grad_check(
        [](Rng& rng) {
            NamedTensors in;
            in.emplace_back("x", random_normal<double>({1, 2, 4, 3, 3}, rng, 0.0, 2.0));
            return in;
        },
        [](Graph<double>& g, const std::vector<std::int64_t>& ids) {
            const auto d = ops::slicewise_abs_diff(g, ids[0], 2);
            const auto c = g.constant(Tensor<double>::full({1, 2, 4, 3, 3}, 0.7));
            return ops::sum(g, ops::mul(g, d, c));
        },
        opts);
    REQUIRE(report.pass);
    REQUIRE(report.max_rel_err <= 1e-4);
}

TEST_CASE("grad_check: upsample, weight standardization, relu chain") {
    const auto report = grad_check(
        [](Rng& rng) {
            NamedTensors in;
            in.emplace_back("x", random_normal<double>({1, 2, 2, 3, 3}, rng));
            in.emplace_back("w", random_normal<double>({2, 2, 3, 3, 3}, rng, 0.0, 0.4));
            in.emplace_back("b", random_normal<double>({2}, rng, 0.5, 0.2));
            return in;
        },
        [](Graph<double>& g, const std::vector<std::int64_t>& ids) {
            ConvSpec sp;
            sp.in_channels = 2;
            sp.out_channels = 2;
            sp.pad = {1, 1, 1};
            const auto ws = ops::weight_standardize(g, ids[1], 1e-5);
            const auto y = ops::conv3d(g, ids[0], ws, ids[2], sp);
            const auto up = ops::upsample_trilinear(g, y, {2, 2, 2});
            return ops::mean(g, ops::relu(g, up));
        });
    INFO("max rel err " << report.max_rel_err);
    REQUIRE(report.pass);
}

TEST_CASE("grad_check: softmax reduction") {
    const auto report = grad_check(
        [](Rng& rng) {
            NamedTensors in;
            in.emplace_back("x", random_normal<double>({2, 3, 2, 2, 2}, rng));
            return in;
        },
        [](Graph<double>& g, const std::vector<std::int64_t>& ids) {
            const auto s = ops::softmax(g, ids[0], 1);
            Rng mix(77);
            const auto c = g.constant(random_normal<double>({2, 3, 2, 2, 2}, mix));
            return ops::sum(g, ops::mul(g, s, c));
        });
    REQUIRE(report.pass);
    REQUIRE(report.max_rel_err <= 1e-6);
}

TEST_CASE("grad_check: segmentation and residual losses") {
    Rng target_rng(404);
    const auto target = testutil::random_mask({1, 1, 3, 4, 4}, target_rng, 0.4).cast<double>();

    SECTION("seg loss (bce - dice)") {
        const auto report = grad_check(
            [](Rng& rng) {
                NamedTensors in;
                in.emplace_back("logits", random_normal<double>({1, 1, 3, 4, 4}, rng));
                return in;
            },
            [&target](Graph<double>& g, const std::vector<std::int64_t>& ids) {
                const auto p = ops::sigmoid(g, ids[0]);
                return ops::seg_loss(g, p, g.constant(target), 1e-5);
            });
        INFO("max rel err " << report.max_rel_err);
        REQUIRE(report.pass);
    }
    SECTION("deep-supervised weighted residual loss") {
        const auto report = grad_check(
            [](Rng& rng) {
                NamedTensors in;
                in.emplace_back("l0", random_normal<double>({1, 1, 3, 4, 4}, rng));
                in.emplace_back("l1", random_normal<double>({1, 1, 3, 4, 4}, rng));
                in.emplace_back("l2", random_normal<double>({1, 1, 3, 4, 4}, rng));
                return in;
            },
            [&target](Graph<double>& g, const std::vector<std::int64_t>& ids) {
                const auto t = g.constant(target);
                std::vector<std::int64_t> levels;
                for (int i = 0; i < 3; ++i)
                    levels.push_back(ops::res_loss_level(g, ops::sigmoid(g, ids[static_cast<std::size_t>(i)]), t));
                return ops::res_loss_total(g, levels, 0.5);
            });
        INFO("max rel err " << report.max_rel_err);
        REQUIRE(report.pass);
    }
}
