#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nsm/shadow_net.hpp"
#include "support.hpp"

#include <cmath>
#include <random>

using namespace nsm;

namespace {

NetworkWeightsT<double> random_weights(const NetworkConfig& cfg, std::uint64_t seed)
{
    auto w = init_weights(cfg, seed).cast<double>();
    std::mt19937_64 rng(seed + 1);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (std::size_t i = 0; i < w.params.size(); ++i)
        if (w.params[i].rank() == 1)
            for (auto& v : w.params[i].vec()) v = u(rng);
    return w;
}

Tensor<double> run(const NetworkConfig& cfg, const NetworkWeightsT<double>& w, const Tensor<double>& x)
{
    Graph<double> g;
    const auto params = bind_weights(g, w, false);
    return g.value(forward(g, cfg, params, g.constant(x)));
}

double logit(double p) { return std::log(p / (1.0 - p)); }

} // namespace

TEST_CASE("receptive field table")
{
    CHECK(receptive_field(3) == 24);
    CHECK(receptive_field(5) == 96);
    CHECK(receptive_field(7) == 384);
    CHECK(receptive_field(1) == 6);
    CHECK_THROWS(receptive_field(0));
}

TEST_CASE("layers_for_penumbra")
{
    CHECK(layers_for_penumbra(21) == 3);
    CHECK(layers_for_penumbra(90) == 5);
    CHECK(layers_for_penumbra(24) == 3);
    CHECK(layers_for_penumbra(1) == 2);
    for (int p = 1; p <= 5000; ++p) {
        const int l = layers_for_penumbra(p);
        CHECK(receptive_field(l) >= p);
        if (l > 2) CHECK(receptive_field(l - 1) < p);
        CHECK(l == std::max(2, static_cast<int>(std::ceil(std::log2(p / 3.0) - 1e-12))));
    }
}

TEST_CASE("configuration and layout")
{
    NetworkConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.channels(1) == 16);
    CHECK(cfg.channels(2) == 32);
    CHECK(cfg.channels(6) == 256);
    CHECK(cfg.channels(9) == 256);
    NetworkConfig bad = cfg;
    bad.layers = 1;
    CHECK_THROWS(bad.validate());
    bad = cfg;
    bad.base_channels = 2;
    CHECK_THROWS(bad.validate());

    // space-to-depth feeds 16 channels into the first processed level
    const auto layout = parameter_layout(cfg);
    CHECK(layout.front().name == "enc1.conv3.w");
    CHECK(layout.front().shape == Dims{16, 16, 3, 3});
    CHECK(layout.back().name == "head.b");
    CHECK(layout.back().shape == Dims{4});
    NetworkConfig plain = cfg;
    plain.use_space_to_depth = false;
    CHECK(parameter_layout(plain).front().shape == Dims{16, 4, 3, 3});
    CHECK(parameter_layout(plain).back().shape == Dims{1});

    const auto w = init_weights(cfg, 3);
    CHECK_NOTHROW(check_weights(cfg, w));
    NetworkConfig other = cfg;
    other.layers = 4;
    CHECK_THROWS_AS(check_weights(other, w), ShapeError);
    for (std::size_t i = 0; i < w.params.size(); ++i) {
        const auto& p = w.params[i];
        if (p.rank() == 1) {
            for (float v : p.vec()) CHECK(v == 0.0f);
        } else {
            const double bound = std::sqrt(6.0 / static_cast<double>(p.dim(1) * p.dim(2) * p.dim(3)));
            for (float v : p.vec()) CHECK(std::abs(v) <= bound);
        }
    }
}

TEST_CASE("dead network outputs one half")
{
    for (bool s2d : {true, false}) {
        NetworkConfig cfg;
        cfg.layers = 3;
        cfg.use_space_to_depth = s2d;
        std::mt19937_64 rng(1);
        const auto out = infer(zero_weights(cfg), cfg, nsm::test::random_tensor_f(Dims{4, 16, 32}, rng));
        CHECK(out.shape() == Dims{1, 16, 32});
        for (float v : out.vec()) CHECK(v == 0.5f);
    }
}

TEST_CASE("output prior reproduces the target median")
{
    for (bool s2d : {true, false}) {
        NetworkConfig cfg;
        cfg.layers = 3;
        cfg.use_space_to_depth = s2d;
        // a quarter at 0, half at 0.75, a quarter at 1: median 0.75, mean 0.625
        Tensor<float> t = Tensor<float>::chw(1, 16, 32, 1.0f);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = i % 4 == 0 ? 0.0f : i % 4 == 3 ? 1.0f : 0.75f;
        NetworkWeights w = zero_weights(cfg);
        fit_output_prior(w, cfg, {&t});
        std::mt19937_64 rng(2);
        const auto out = infer(w, cfg, nsm::test::random_tensor_f(Dims{4, 16, 32}, rng));
        for (float v : out.vec()) CHECK(v == doctest::Approx(0.75).epsilon(1e-6));
        // only the smooth channel moves
        const auto& b = w.get("head.b");
        for (std::size_t c = 1; c < b.size(); ++c) CHECK(b[c] == 0.0f);

        // all-lit targets keep a finite logit
        const Tensor<float> lit = Tensor<float>::chw(1, 16, 32, 1.0f);
        fit_output_prior(w, cfg, {&lit});
        CHECK(std::isfinite(b[0]));
        CHECK(infer(w, cfg, nsm::test::random_tensor_f(Dims{4, 16, 32}, rng))[0] > 0.98f);
        CHECK_THROWS(fit_output_prior(w, cfg, {}));
    }
}

TEST_CASE("output shape equals input shape")
{
    for (bool s2d : {true, false})
        for (int l : {2, 3, 5, 7}) {
            NetworkConfig cfg;
            cfg.layers = l;
            cfg.base_channels = 4;
            cfg.use_space_to_depth = s2d;
            const auto out = infer(init_weights(cfg, 1), cfg, Tensor<float>::chw(4, 128, 256, 0.3f));
            CHECK(out.shape() == Dims{1, 128, 256});
            for (float v : out.vec()) {
                CHECK(v >= 0.0f);
                CHECK(v <= 1.0f);
            }
        }
    NetworkConfig cfg;
    cfg.layers = 5;
    CHECK_THROWS_AS(infer(init_weights(cfg, 1), cfg, Tensor<float>::chw(4, 24, 32)), ShapeError);
    CHECK_THROWS_AS(infer(init_weights(cfg, 1), cfg, Tensor<float>::chw(3, 32, 32)), ShapeError);
}

TEST_CASE("output head: smooth channel plus block residuals")
{
    NetworkConfig cfg;
    cfg.layers = 3;
    cfg.base_channels = 4;
    cfg.output_margin = 0.0; // plain sigmoid so logits can be read back
    std::mt19937_64 rng(11);
    const auto x = nsm::test::random_tensor(Dims{4, 16, 16}, rng);
    auto w = random_weights(cfg, 5);
    auto& hw = w.get("head.w");
    auto& hb = w.get("head.b");
    const std::size_t in = hw.dim(1);

    // A: residual channels zeroed
    auto wa = w;
    for (std::size_t o = 1; o < 4; ++o) {
        for (std::size_t i = 0; i < in; ++i) wa.get("head.w")[o * in + i] = 0.0;
        wa.get("head.b")[o] = 0.0;
    }
    // B: residual channels copy channel 0
    auto wb = w;
    for (std::size_t o = 1; o < 4; ++o) {
        for (std::size_t i = 0; i < in; ++i) wb.get("head.w")[o * in + i] = hw[i];
        wb.get("head.b")[o] = hb[0];
    }
    const auto ya = run(cfg, wa, x), yb = run(cfg, wb, x);

    // B - A in logit space recovers channel 0 at the three residual offsets and 0 at (0, 0)
    Tensor<double> ch0 = Tensor<double>::chw(1, 8, 8);
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t xx = 0; xx < 8; ++xx) {
            const double d00 = logit(yb.at(0, 2 * y, 2 * xx)) - logit(ya.at(0, 2 * y, 2 * xx));
            CHECK(std::abs(d00) < 1e-9);
            const double d01 = logit(yb.at(0, 2 * y, 2 * xx + 1)) - logit(ya.at(0, 2 * y, 2 * xx + 1));
            const double d10 = logit(yb.at(0, 2 * y + 1, 2 * xx)) - logit(ya.at(0, 2 * y + 1, 2 * xx));
            const double d11 = logit(yb.at(0, 2 * y + 1, 2 * xx + 1)) - logit(ya.at(0, 2 * y + 1, 2 * xx + 1));
            CHECK(d01 == doctest::Approx(d10).epsilon(1e-9));
            CHECK(d01 == doctest::Approx(d11).epsilon(1e-9));
            ch0.at(0, y, xx) = d01;
        }
    // and A is exactly the bilinear upsampling of that channel
    const auto up = kernels::upsample2(ch0);
    for (std::size_t i = 0; i < up.size(); ++i) CHECK(logit(ya[i]) == doctest::Approx(up[i]).epsilon(1e-8));
}

TEST_CASE("forward is deterministic and spreads single-pixel changes")
{
    for (bool s2d : {true, false}) {
        NetworkConfig cfg;
        cfg.layers = 4;
        cfg.base_channels = 4;
        cfg.use_space_to_depth = s2d;
        std::mt19937_64 rng(12);
        const auto x = nsm::test::random_tensor(Dims{4, 32, 32}, rng);
        const auto w = random_weights(cfg, 7);
        const auto a = run(cfg, w, x);
        CHECK(run(cfg, w, x) == a);
        auto x2 = x;
        x2.at(0, 16, 16) += 1.0;
        const auto b = run(cfg, w, x2);
        int changed = 0;
        for (std::size_t i = 0; i < a.size(); ++i) changed += a[i] != b[i];
        CAPTURE(s2d);
        CHECK(changed > 16);
    }
}

TEST_CASE("full network gradient, 64-bit")
{
    for (bool s2d : {true, false}) {
        NetworkConfig cfg;
        cfg.layers = 3;
        cfg.base_channels = 4;
        cfg.use_space_to_depth = s2d;
        std::mt19937_64 rng(21);
        const auto x = nsm::test::random_tensor(Dims{4, 8, 8}, rng);
        const auto w = random_weights(cfg, 9);
        const auto r = nsm::test::grad_check(
            [&](Graph<double>& g, const std::vector<Var>& params) { return forward(g, cfg, params, g.constant(x)); },
            w.params);
        CAPTURE(s2d);
        CHECK(r.checked == w.parameter_count());
        CHECK(r.max_rel_error <= 1e-4);
    }
}

TEST_CASE("net_stats")
{
    CHECK(conv_params(16, 32, 3) == 16 * 32 * 9 + 32);
    std::size_t previous = 0;
    for (int l = 2; l <= 7; ++l) {
        NetworkConfig cfg;
        cfg.layers = l;
        const auto s = net_stats(cfg, 128, 256);
        CHECK(s.total_parameters == init_weights(cfg, 1).parameter_count());
        CHECK(s.total_parameters > previous);
        previous = s.total_parameters;
        CHECK(s.levels.size() == static_cast<std::size_t>(l - 1));
        for (std::size_t i = 1; i < s.levels.size(); ++i)
            CHECK(s.levels[i].temp_storage_pixels < s.levels[i - 1].temp_storage_pixels);
        double flops = 0;
        for (const auto& lv : s.levels) flops += lv.flops_per_pixel;
        CHECK(flops == doctest::Approx(s.total_flops_per_pixel));
    }
}
