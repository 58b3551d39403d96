#include "test_util.hpp"

#include "conres/gradcheck.hpp"
#include "conres/losses.hpp"
#include "conres/model.hpp"

using namespace conres;

namespace {

ModelConfig desk_config(Variant v = Variant::full, std::int64_t base = 8) {
    ModelConfig cfg;
    cfg.base_channels = base;
    cfg.variant = v;
    return cfg;
}

template <typename T>
ForwardOutput<T> run_forward(Graph<T>& g, const ModelConfig& cfg, const ParamDict<T>& params,
                             const Tensor<T>& input) {
    const auto ids = register_params(g, params);
    const auto x = g.constant(input);
    return forward(g, cfg, ids, x);
}

// swaps the S and H axes of a [N,C,S,H,W] tensor
template <typename T>
Tensor<T> swap_sh(const Tensor<T>& t) {
    Tensor<T> out({t.shape[0], t.shape[1], t.shape[3], t.shape[2], t.shape[4]});
    for (std::int64_t n = 0; n < t.shape[0]; ++n)
        for (std::int64_t c = 0; c < t.shape[1]; ++c)
            for (std::int64_t s = 0; s < t.shape[2]; ++s)
                for (std::int64_t h = 0; h < t.shape[3]; ++h)
                    for (std::int64_t w = 0; w < t.shape[4]; ++w)
                        out.at({n, c, h, s, w}) = t.at({n, c, s, h, w});
    return out;
}

}  // namespace

TEST_CASE("build_model channel trajectory at desk scale") {
    const auto cfg = desk_config();
    const auto params = build_model<float>(cfg, 1);
    REQUIRE(params.at("enc.stem.w").shape == Shape{8, 1, 3, 3, 3});
    REQUIRE(params.at("enc.down1.w").shape == Shape{16, 8, 3, 3, 3});
    REQUIRE(params.at("enc.down2.w").shape == Shape{32, 16, 3, 3, 3});
    REQUIRE(params.at("enc.down3.w").shape == Shape{64, 32, 3, 3, 3});
    REQUIRE(params.at("enc.b4b.conv2.w").shape == Shape{64, 64, 3, 3, 3});
    REQUIRE(params.at("dec.seg.proj1.w").shape == Shape{32, 64, 1, 1, 1});
    REQUIRE(params.at("mod3.f.w").shape == Shape{8, 8, 3, 3, 3});
    REQUIRE(params.at("head.seg.w").shape == Shape{1, 8, 1, 1, 1});
}

TEST_CASE("build_model is deterministic per (config, seed)") {
    const auto cfg = desk_config(Variant::full, 4);
    const auto a = build_model<float>(cfg, 7);
    const auto b = build_model<float>(cfg, 7);
    const auto c = build_model<float>(cfg, 8);
    REQUIRE(a.size() == b.size());
    bool identical = true, differs_from_c = false;
    for (std::size_t i = 0; i < a.items().size(); ++i) {
        identical = identical && a.items()[i].second.data == b.items()[i].second.data;
        differs_from_c = differs_from_c || a.items()[i].second.data != c.items()[i].second.data;
    }
    REQUIRE(identical);
    REQUIRE(differs_from_c);
}

TEST_CASE("parameter counts") {
    SECTION("baseline is a strict subset of full, within 10% at desk widths") {
        const auto full_params = build_model<float>(desk_config(Variant::full), 1);
        const auto base_params = build_model<float>(desk_config(Variant::baseline), 1);
        const auto nf = count_params(full_params);
        const auto nb = count_params(base_params);
        REQUIRE(nb.count < nf.count);
        const double rel = static_cast<double>(nf.count - nb.count) / static_cast<double>(nb.count);
        INFO("full " << nf.count << " baseline " << nb.count << " rel " << rel);
        REQUIRE(rel < 0.10);
        REQUIRE(nf.serialized_bytes == nf.count * 4);
    }
    SECTION("doubling base channels roughly quadruples the conv parameter count") {
        const auto p8 = count_params(build_model<float>(desk_config(Variant::full, 8), 1));
        const auto p16 = count_params(build_model<float>(desk_config(Variant::full, 16), 1));
        const double ratio = static_cast<double>(p16.count) / static_cast<double>(p8.count);
        REQUIRE(ratio > 3.0);
        REQUIRE(ratio < 4.5);
    }
}

TEST_CASE("residual block semantics") {
    ModelConfig cfg = desk_config(Variant::full, 4);
    ParamDict<double> params;
    Rng rng(3);
    model_detail::Wiring<double> init{cfg, &params, &rng, nullptr, nullptr};
    init.resblock("blk", 4, 4, 1, -1);

    SECTION("zero conv weights with identity skip reduce to relu(x)") {
        for (auto& [name, tensor] : params.items())
            if (name.ends_with(".w")) std::fill(tensor.data.begin(), tensor.data.end(), 0.0);
        Graph<double> g;
        const auto pid = register_params(g, params);
        Rng xr(5);
        const auto xv = random_normal<double>({1, 4, 4, 4, 4}, xr);
        const auto x = g.leaf(xv, true);
        model_detail::Wiring<double> fwd{cfg, nullptr, nullptr, &g, &pid};
        const auto y = fwd.resblock("blk", 4, 4, 1, x);
        REQUIRE(g.value(y).shape == xv.shape);
        for (std::int64_t i = 0; i < xv.numel(); ++i)
            REQUIRE(g.value(y)[i] == Catch::Approx(std::max(0.0, xv[i])).margin(1e-12));

        // gradient flows through the skip even with zero conv weights
        const auto loss = ops::sum(g, y);
        g.backward(loss);
        REQUIRE(g.has_grad(x));
        double norm = 0;
        for (const auto v : g.grad(x).data) norm += std::abs(v);
        REQUIRE(norm > 0.0);
    }
    SECTION("channel-mismatched blocks get a projection and keep spatial shape") {
        ParamDict<double> p2;
        Rng r2(4);
        model_detail::Wiring<double> init2{cfg, &p2, &r2, nullptr, nullptr};
        init2.resblock("blk", 4, 8, 1, -1);
        REQUIRE(p2.contains("blk.skip.w"));
        Graph<double> g;
        const auto pid = register_params(g, p2);
        const auto x = g.constant(random_normal<double>({1, 4, 6, 6, 6}, r2));
        model_detail::Wiring<double> fwd{cfg, nullptr, nullptr, &g, &pid};
        const auto y = fwd.resblock("blk", 4, 8, 1, x);
        REQUIRE(g.value(y).shape == Shape{1, 8, 6, 6, 6});
    }
}

TEST_CASE("forward shape trace and output ranges") {
    const auto cfg = desk_config();
    const auto params = build_model<float>(cfg, 11);
    Graph<float> g;
    Rng rng(2);
    const auto out = run_forward(g, cfg, params, random_normal<float>({1, 1, 16, 16, 16}, rng));

    REQUIRE(g.value(out.p_seg).shape == Shape{1, 1, 16, 16, 16});
    REQUIRE(out.p_res.size() == 3);
    for (const auto id : out.p_res) REQUIRE(g.value(id).shape == Shape{1, 1, 16, 16, 16});
    REQUIRE(g.value(out.bottleneck).shape == Shape{1, 64, 2, 2, 2});

    for (const auto v : g.value(out.p_seg).data) {
        REQUIRE(v >= 0.0f);
        REQUIRE(v <= 1.0f);
    }
    for (const auto id : out.p_res)
        for (const auto v : g.value(id).data) {
            REQUIRE(v >= 0.0f);
            REQUIRE(v <= 1.0f);
        }
}

TEST_CASE("forward validates input before any compute") {
    const auto cfg = desk_config();
    const auto params = build_model<float>(cfg, 11);
    Graph<float> g;
    const auto ids = register_params(g, params);
    SECTION("extents not divisible by 8") {
        const auto x = g.constant(Tensor<float>::full({1, 1, 12, 16, 16}, 0.0f));
        REQUIRE_THROWS_AS(forward(g, cfg, ids, x), ValidationError);
    }
    SECTION("channel mismatch") {
        const auto x = g.constant(Tensor<float>::full({1, 2, 16, 16, 16}, 0.0f));
        REQUIRE_THROWS_AS(forward(g, cfg, ids, x), ValidationError);
    }
}

TEST_CASE("baseline emits no residual predictions") {
    const auto cfg = desk_config(Variant::baseline);
    const auto params = build_model<float>(cfg, 11);
    Graph<float> g;
    Rng rng(2);
    const auto out = run_forward(g, cfg, params, random_normal<float>({1, 1, 8, 8, 8}, rng));
    REQUIRE(out.p_res.empty());
    REQUIRE(out.res_logits.empty());
    REQUIRE(g.value(out.p_seg).shape == Shape{1, 1, 8, 8, 8});
}

TEST_CASE("attention gate multiplies F by (1, 2)") {
    const auto cfg = desk_config(Variant::full, 4);
    const auto params = build_model<float>(cfg, 5);
    Graph<float> g;
    Rng rng(6);
    const auto out = run_forward(g, cfg, params, random_normal<float>({1, 1, 8, 8, 8}, rng));
    REQUIRE(out.module_taps.size() == 3);
    for (const auto& [f_id, oseg_id] : out.module_taps) {
        const auto& f = g.value(f_id);
        const auto& o = g.value(oseg_id);
        for (std::int64_t i = 0; i < f.numel(); ++i) {
            if (f[i] == 0.0f) continue;
            const double ratio = static_cast<double>(o[i]) / static_cast<double>(f[i]);
            REQUIRE(ratio > 1.0);
            REQUIRE(ratio < 2.0);
        }
    }
}

TEST_CASE("attention driven to zero makes full match res_only") {
    const auto cfg_full = desk_config(Variant::full, 4);
    ModelConfig cfg_res = cfg_full;
    cfg_res.variant = Variant::res_only;
    auto params = build_model<float>(cfg_full, 21);
    // bias override: the group-norm shift of every residual output layer
    for (int s = 1; s <= 3; ++s) {
        auto& beta = params.at("mod" + std::to_string(s) + ".g2.gn.b");
        std::fill(beta.data.begin(), beta.data.end(), -40.0f);
    }
    Rng rng(22);
    const auto input = random_normal<float>({1, 1, 8, 16, 16}, rng);

    Graph<float> ga, gb;
    const auto oa = run_forward(ga, cfg_full, params, input);
    const auto ob = run_forward(gb, cfg_res, params, input);
    REQUIRE(testutil::approx_equal(ga.value(oa.p_seg), gb.value(ob.p_seg), 1e-5));
    for (std::size_t i = 0; i < 3; ++i)
        REQUIRE(testutil::approx_equal(ga.value(oa.p_res[i]), gb.value(ob.p_res[i]), 1e-5));
}

TEST_CASE("bottleneck sits at exactly 1/8 resolution per axis") {
    const auto cfg = desk_config(Variant::full, 4);
    const auto params = build_model<float>(cfg, 31);
    Graph<float> g;
    Rng rng(9);
    const auto out = run_forward(g, cfg, params, random_normal<float>({1, 1, 8, 24, 16}, rng));
    REQUIRE(g.value(out.bottleneck).shape == Shape{1, 32, 1, 3, 2});
}

TEST_CASE("sagittal residual axis produces valid shapes") {
    ModelConfig cfg = desk_config();
    cfg.residual_axis = ResidualAxis::sagittal;
    const auto params = build_model<float>(cfg, 41);
    Graph<float> g;
    Rng rng(12);
    const auto out = run_forward(g, cfg, params, random_normal<float>({1, 1, 8, 16, 8}, rng));
    REQUIRE(g.value(out.p_seg).shape == Shape{1, 1, 8, 16, 8});
    for (const auto id : out.p_res) REQUIRE(g.value(id).shape == Shape{1, 1, 8, 16, 8});
}

TEST_CASE("axis equivariance with isotropic 1x1x1 convs") {
    // double precision: the permuted reductions accumulate in a different
    // order, which float cannot hold to the tolerance below
    ModelConfig cfg_ax = desk_config(Variant::full, 4);
    cfg_ax.kernel_size = 1;
    ModelConfig cfg_sag = cfg_ax;
    cfg_sag.residual_axis = ResidualAxis::sagittal;

    const auto params = build_model<double>(cfg_ax, 51);
    Rng rng(13);
    const auto input = random_normal<double>({1, 1, 8, 16, 8}, rng);
    const auto permuted = swap_sh(input);

    Graph<double> ga, gb;
    const auto oa = run_forward(ga, cfg_ax, params, input);
    const auto ob = run_forward(gb, cfg_sag, params, permuted);
    REQUIRE(testutil::approx_equal(swap_sh(ga.value(oa.p_seg)), gb.value(ob.p_seg), 1e-5));
    for (std::size_t i = 0; i < 3; ++i)
        REQUIRE(testutil::approx_equal(swap_sh(ga.value(oa.p_res[i])), gb.value(ob.p_res[i]), 1e-5));
}

TEST_CASE("forward is bitwise deterministic") {
    const auto cfg = desk_config(Variant::full, 4);
    const auto params = build_model<float>(cfg, 61);
    Rng rng(14);
    const auto input = random_normal<float>({1, 1, 8, 8, 8}, rng);
    Graph<float> ga, gb;
    const auto oa = run_forward(ga, cfg, params, input);
    const auto ob = run_forward(gb, cfg, params, input);
    REQUIRE(ga.value(oa.p_seg).data == gb.value(ob.p_seg).data);
    for (std::size_t i = 0; i < 3; ++i) REQUIRE(ga.value(oa.p_res[i]).data == gb.value(ob.p_res[i]).data);
}

TEST_CASE("multiclass mode emits a softmax over classes") {
    ModelConfig cfg = desk_config();
    cfg.mode = SegMode::multiclass;
    cfg.classes = 2;
    const auto params = build_model<float>(cfg, 71);
    Graph<float> g;
    Rng rng(15);
    const auto out = run_forward(g, cfg, params, random_normal<float>({1, 1, 8, 8, 8}, rng));
    REQUIRE(g.value(out.p_seg).shape == Shape{1, 3, 8, 8, 8});
    const auto& p = g.value(out.p_seg);
    for (std::int64_t i = 0; i < 512; ++i) {
        float total = 0;
        for (std::int64_t c = 0; c < 3; ++c) total += p[c * 512 + i];
        REQUIRE(total == Catch::Approx(1.0f));
    }
    REQUIRE(out.p_res.size() == 3);
    for (const auto id : out.p_res) REQUIRE(g.value(id).shape == Shape{1, 2, 8, 8, 8});
}

TEST_CASE("end-to-end gradient check on a small full-variant model") {
    ModelConfig cfg = desk_config(Variant::full, 2);
    cfg.validate();
    const auto params = build_model<double>(cfg, 81);

    Rng data_rng(82);
    const auto input = random_normal<double>({1, 1, 8, 8, 8}, data_rng);
    const auto seg_target = testutil::random_mask({1, 1, 8, 8, 8}, data_rng, 0.4).cast<double>();
    Mask seg3({8, 8, 8});
    for (std::int64_t i = 0; i < 512; ++i) seg3[i] = seg_target[i] > 0.5 ? 1 : 0;
    const auto res_target = compute_residual_mask(seg3, cfg.residual_axis).cast<double>();
    Tensor<double> res_target5({1, 1, 8, 8, 8}, res_target.data);

    GradCheckOptions opts;
    opts.rel_tol = 1e-3;
    opts.require_margin = false;  // a deep relu stack cannot clear a global margin
    opts.max_coords_per_tensor = 2;
    opts.seed = 83;

    const auto report = grad_check(
        [&](Rng&) {
            NamedTensors in;
            for (const auto& [name, tensor] : params.items()) in.emplace_back(name, tensor);
            return in;
        },
        [&](Graph<double>& g, const std::vector<std::int64_t>& ids) {
            std::map<std::string, std::int64_t> pid;
            for (std::size_t i = 0; i < params.items().size(); ++i) pid[params.items()[i].first] = ids[i];
            const auto x = g.constant(input);
            const auto out = forward(g, cfg, pid, x);
            const auto seg = ops::seg_loss_batched(g, out.p_seg, g.constant(seg_target), 1e-5);
            std::vector<std::int64_t> levels;
            for (const auto id : out.p_res)
                levels.push_back(ops::res_loss_level_batched(g, id, g.constant(res_target5)));
            return ops::add(g, seg, ops::res_loss_total(g, levels, 0.5));
        },
        opts);

    INFO("max rel err " << report.max_rel_err);
    for (const auto& e : report.entries) {
        INFO(e.name << " err " << e.max_rel_err << " checked " << e.coords_checked << " skipped "
                    << e.coords_skipped);
        CHECK(e.pass);
    }
    REQUIRE(report.max_rel_err <= 1e-3);
}
