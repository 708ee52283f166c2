#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nsm/raster.hpp"
#include "nsm/rt_oracle.hpp"
#include "nsm/training.hpp"
#include "support.hpp"

#include <cmath>
#include <random>

using namespace nsm;

namespace {

Tensor<float> constant_image(std::size_t h, std::size_t w, float v) { return Tensor<float>::chw(1, h, w, v); }

double loss_of(const Tensor<float>& y, const Tensor<float>& t, double alpha)
{
    LossConfig cfg;
    cfg.alpha = alpha;
    return supervised_loss_value(y, t, cfg);
}

// One rendered frame of the reference scene at a small resolution.
TrainingSample render_sample(int p, std::uint64_t seed, double size_index = 2.0)
{
    const Scene scene = sphere_over_plane(1.0, 4.0, size_index);
    CameraPose cam;
    cam.position = Vec3(0, 2.5, 3.5);
    cam.forward = (Vec3(0, 0.3, 0) - cam.position).normalized();
    cam.height = 32;
    cam.width = 64;
    cam.fov_y = 0.9;
    cam = cam.orthonormalized();
    const double bias = default_depth_bias(scene);
    const ShadowMapSettings sms{128, 128, 0.0};

    TrainingSample s;
    s.id = "frame" + std::to_string(seed);
    s.size_index = size_index;
    const GBuffer g = render_gbuffer(scene, cam, scene.emitter());
    s.inputs.push_back(assemble_features(g, render_shadowmap(scene, scene.emitter(), sms), size_index, bias).channels);
    s.covered = g.covered;
    std::mt19937_64 rng(seed);
    PerturbationSpec spec;
    spec.count = p;
    if (p > 0)
        for (const auto& ps : sample_perturbation(scene, cam, spec, rng)) {
            const Scene moved = scene.with_emitter(ps.emitter);
            const GBuffer gp = render_gbuffer(moved, ps.camera, ps.emitter);
            s.inputs.push_back(assemble_features(gp, render_shadowmap(moved, ps.emitter, sms), size_index, bias).channels);
        }
    s.target = trace_visibility(scene, cam, scene.emitter(), TraceSettings{64, 4, seed}).visibility;
    return s;
}

NetworkConfig small_net(int layers = 3)
{
    NetworkConfig n;
    n.layers = layers;
    n.base_channels = 8;
    return n;
}

NetworkConfig fitted_net(const TrainingSample& s, int layers = 3)
{
    NetworkConfig n = small_net(layers);
    fit_input_standardization(n, {&s.inputs[0]});
    return n;
}

} // namespace

TEST_CASE("edge-bank extractor examples")
{
    const auto ext = make_extractor(EdgeBankExtractor::kId);
    CHECK(ext->id() == "dog8-v1");
    CHECK_THROWS_AS(make_extractor("vgg19"), std::invalid_argument);

    const Tensor<double> bank = EdgeBankExtractor::bank();
    CHECK(bank.shape() == Dims{8, 1, 3, 3});
    for (std::size_t k = 0; k < 8; ++k) {
        double sum = 0.0;
        for (std::size_t i = 0; i < 9; ++i) sum += bank[k * 9 + i];
        CHECK(std::abs(sum) < 1e-15);
    }

    Graph<double> g;
    const auto flat = ext->features(g, g.constant(Tensor<double>::chw(1, 8, 8, 0.7)));
    REQUIRE(flat.size() == 2);
    CHECK(g.value(flat[0]).shape() == Dims{8, 8, 8});
    CHECK(g.value(flat[1]).shape() == Dims{8, 4, 4});
    for (const Var& f : flat)
        for (double v : g.value(f).vec()) CHECK(std::abs(v) < 1e-15);

    // dark-to-bright step along +x: kernel 0 dominates
    Tensor<double> step = Tensor<double>::chw(1, 8, 8, 0.0);
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 4; x < 8; ++x) step.at(0, y, x) = 1.0;
    const auto f = ext->features(g, g.constant(step));
    const Tensor<double>& full = g.value(f[0]);
    std::vector<double> energy(8, 0.0);
    for (std::size_t k = 0; k < 8; ++k)
        for (std::size_t i = 0; i < 64; ++i) energy[k] += full[k * 64 + i];
    for (std::size_t k = 1; k < 8; ++k) CHECK(energy[0] > energy[k]);
    // direct application of kernel 0 at an interior pixel on the edge
    double direct = 0.0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) direct += bank[(dy + 1) * 3 + (dx + 1)] * step.at(0, 3 + dy, 4 + dx);
    CHECK(full.at(0, 3, 4) == doctest::Approx(std::max(0.0, direct)));
}

TEST_CASE("supervised loss examples")
{
    std::mt19937_64 rng(2);
    const auto y = nsm::test::random_tensor_f(Dims{1, 16, 16}, rng, 0.0f, 1.0f);
    CHECK(loss_of(y, y, 0.9) == 0.0);
    const auto a = constant_image(16, 16, 0.3f), b = constant_image(16, 16, 0.5f);
    CHECK(loss_of(a, b, 1.0) == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(loss_of(a, b, 0.9) == doctest::Approx(0.18).epsilon(1e-6));

    // non-negative and zero only at equality
    for (int trial = 0; trial < 20; ++trial) {
        const auto u = nsm::test::random_tensor_f(Dims{1, 8, 8}, rng, 0.0f, 1.0f);
        const auto v = nsm::test::random_tensor_f(Dims{1, 8, 8}, rng, 0.0f, 1.0f);
        CHECK(loss_of(u, v, 0.5) > 0.0);
        CHECK(loss_of(u, v, 0.0) >= 0.0);
    }
    LossConfig bad;
    bad.alpha = 1.5;
    CHECK_THROWS(bad.validate());
    bad = LossConfig{};
    bad.p = -1;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("perturbation loss examples")
{
    const EdgeBankExtractor ext;
    std::mt19937_64 rng(3);
    const auto y = nsm::test::random_tensor(Dims{1, 8, 8}, rng, 0.0, 1.0);
    const auto t = nsm::test::random_tensor(Dims{1, 8, 8}, rng, 0.0, 1.0);
    LossConfig cfg;
    cfg.p = 0;
    Graph<double> g;
    const Var vy = g.constant(y), vt = g.constant(t);
    const double p0 = g.value(perturbation_loss(g, vy, {}, vt, cfg, ext).total)[0];
    CHECK(p0 == g.value(supervised_loss(g, vy, vt, cfg, ext).total)[0]);

    cfg.p = 3;
    CHECK(g.value(perturbation_loss(g, vt, {vt, vt, vt}, vt, cfg, ext).total)[0] == 0.0);
    CHECK_THROWS(perturbation_loss(g, vy, {vt}, vt, cfg, ext));

    // the sum of the individual supervised terms
    const auto x1 = nsm::test::random_tensor(Dims{1, 8, 8}, rng, 0.0, 1.0);
    const auto x2 = nsm::test::random_tensor(Dims{1, 8, 8}, rng, 0.0, 1.0);
    const auto x3 = nsm::test::random_tensor(Dims{1, 8, 8}, rng, 0.0, 1.0);
    double expect = g.value(supervised_loss(g, vy, vt, cfg, ext).total)[0];
    for (const auto* x : {&x1, &x2, &x3}) expect += g.value(supervised_loss(g, vy, g.constant(*x), cfg, ext).total)[0];
    const double got =
        g.value(perturbation_loss(g, vy, {g.constant(x1), g.constant(x2), g.constant(x3)}, vt, cfg, ext).total)[0];
    CHECK(got == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("perturbed outputs are detached from the gradient")
{
    NetworkConfig net = small_net(2);
    net.base_channels = 4;
    std::mt19937_64 rng(5);
    const auto x0 = nsm::test::random_tensor(Dims{4, 8, 8}, rng);
    const auto x1 = nsm::test::random_tensor(Dims{4, 8, 8}, rng);
    const auto t = nsm::test::random_tensor(Dims{1, 8, 8}, rng, 0.0, 1.0);
    auto w = init_weights(net, 4).cast<double>();
    for (auto& p : w.params)
        if (p.rank() == 1)
            for (auto& v : p.vec()) v = 0.05;
    LossConfig cfg;
    cfg.p = 1;
    const EdgeBankExtractor ext;

    // separate copies of the weights feed x_0 and x_1
    Graph<double> g;
    const auto wa = bind_weights(g, w, true);
    const auto wb = bind_weights(g, w, true);
    const Var y0 = forward(g, net, wa, g.constant(x0));
    const Var y1 = forward(g, net, wb, g.constant(x1));
    const Var loss = perturbation_loss(g, y0, {y1}, g.constant(t), cfg, ext).total;
    g.backward(loss);
    for (const Var& p : wb) {
        const Tensor<double> gp = g.grad(p);
        for (double v : gp.vec()) CHECK(v == 0.0);
    }

    // finite differences of the loss with y1 frozen at its unperturbed value
    Graph<double> ref;
    const Tensor<double> y1_fixed = ref.value(forward(ref, net, bind_weights(ref, w, false), ref.constant(x1)));
    auto frozen = [&](const NetworkWeightsT<double>& wt) {
        Graph<double> e;
        const Var y = forward(e, net, bind_weights(e, wt, false), e.constant(x0));
        return e.value(perturbation_loss(e, y, {e.constant(y1_fixed)}, e.constant(t), cfg, ext).total)[0];
    };
    auto coupled = [&](const NetworkWeightsT<double>& wt) {
        Graph<double> e;
        const auto ps = bind_weights(e, wt, false);
        const Var y = forward(e, net, ps, e.constant(x0));
        const Var z = forward(e, net, ps, e.constant(x1));
        return e.value(perturbation_loss(e, y, {z}, e.constant(t), cfg, ext).total)[0];
    };
    const double h = 1e-6;
    double max_rel = 0.0, max_coupled_gap = 0.0;
    std::mt19937_64 pick(1);
    for (std::size_t k = 0; k < w.params.size(); ++k) {
        const Tensor<double> analytic = g.grad(wa[k]);
        for (int trial = 0; trial < 6; ++trial) {
            const std::size_t i = pick() % analytic.size();
            auto up = w, down = w;
            up.params[k][i] += h;
            down.params[k][i] -= h;
            const double fd = (frozen(up) - frozen(down)) / (2 * h);
            const double fd_coupled = (coupled(up) - coupled(down)) / (2 * h);
            const double diff = std::abs(fd - analytic[i]);
            if (diff > 1e-8) max_rel = std::max(max_rel, diff / std::max(std::abs(fd), std::abs(analytic[i])));
            max_coupled_gap = std::max(max_coupled_gap, std::abs(fd_coupled - analytic[i]));
        }
    }
    CHECK(max_rel < 1e-4);
    // the coupled objective differs, so the detachment is doing something
    CHECK(max_coupled_gap > 1e-4);
}

TEST_CASE("training loop contract")
{
    const auto sample = render_sample(3, 11);
    const NetworkConfig net = fitted_net(sample);
    TrainConfig cfg;
    cfg.steps = 30;
    cfg.deterministic = true;
    cfg.seed = 4;
    const LossConfig loss;
    const auto a = train({sample}, {}, net, init_weights(net, 1), loss, cfg);
    CHECK(a.forward_passes == 4L * cfg.steps);
    REQUIRE(a.log.size() == 30);
    CHECK(a.log.back().heldout_mse.has_value());
    for (const auto& r : a.log) {
        CHECK(r.wallclock_s == 0.0);
        CHECK(std::isfinite(r.loss));
    }

    const auto b = train({sample}, {}, net, init_weights(net, 1), loss, cfg);
    REQUIRE(b.log.size() == a.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].loss == b.log[i].loss);
        CHECK(a.log[i].heldout_mse == b.log[i].heldout_mse);
    }
    for (std::size_t k = 0; k < a.weights.params.size(); ++k) CHECK(a.weights.params[k] == b.weights.params[k]);
    bool evaluated_selected = false;
    for (const auto& r : a.log) evaluated_selected |= r.step == a.selected_step && r.heldout_mse.has_value();
    CHECK(evaluated_selected);

    LossConfig p0 = loss;
    p0.p = 0;
    cfg.steps = 5;
    CHECK(train({sample}, {}, net, init_weights(net, 1), p0, cfg).forward_passes == 5);

    // too few perturbed stacks for p
    TrainingSample thin = sample;
    thin.inputs.resize(2);
    CHECK_THROWS_AS(train({thin}, {}, net, init_weights(net, 1), loss, cfg), std::invalid_argument);
    CHECK_THROWS(train({}, {}, net, init_weights(net, 1), loss, cfg));
}

TEST_CASE("learning-rate decay starts at the base rate")
{
    const auto sample = render_sample(0, 13);
    const NetworkConfig net = fitted_net(sample);
    LossConfig loss;
    loss.p = 0;
    TrainConfig cfg;
    cfg.steps = 20;
    cfg.deterministic = true;
    const auto flat = train({sample}, {}, net, init_weights(net, 1), loss, cfg);
    cfg.final_lr_fraction = 0.01;
    const auto decayed = train({sample}, {}, net, init_weights(net, 1), loss, cfg);
    // the first update uses the full rate, so the second step sees the same weights
    CHECK(flat.log[0].loss == decayed.log[0].loss);
    CHECK(flat.log[1].loss == decayed.log[1].loss);
    CHECK(flat.log.back().loss != decayed.log.back().loss);

    cfg.final_lr_fraction = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.final_lr_fraction = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("non-finite loss aborts with a diagnostic")
{
    auto sample = render_sample(0, 12);
    sample.target[100] = std::numeric_limits<float>::quiet_NaN();
    const NetworkConfig net = small_net(3);
    TrainConfig cfg;
    cfg.steps = 3;
    LossConfig loss;
    loss.p = 0;
    try {
        train({sample}, {}, net, init_weights(net, 1), loss, cfg);
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).find("step 1") != std::string::npos);
    }
}

TEST_CASE("a single frame can be memorized")
{
    const auto sample = render_sample(0, 13);
    for (bool s2d : {true, false}) {
        NetworkConfig net = fitted_net(sample);
        net.use_space_to_depth = s2d;
        TrainConfig cfg;
        cfg.steps = 500;
        cfg.deterministic = true;
        LossConfig loss;
        loss.p = 0; // supervised term only; the perturbation term fights memorization by design
        const auto r = train({sample}, {}, net, init_weights(net, 2), loss, cfg);
        CAPTURE(s2d);
        MESSAGE("overfit train MSE " << r.train_mse << std::string(s2d ? " (space-to-depth)" : " (plain)"));
        CHECK(r.train_mse < 0.02);
        CHECK(evaluate_mse(r.weights, net, {sample}) == doctest::Approx(r.train_mse));

        // 50-step moving average of the loss trends down
        auto window = [&](std::size_t end) {
            double s = 0.0;
            for (std::size_t i = end - 50; i < end; ++i) s += r.log[i].loss;
            return s / 50.0;
        };
        CHECK(window(500) < window(250));
        CHECK(window(250) < window(50));
    }
}
