#include "nsm/training.hpp"

#include "nsm/analysis.hpp"
#include "nsm/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace nsm {

Tensor<double> EdgeBankExtractor::bank()
{
    static const double base[4][9] = {
        {-1, 0, 1, -2, 0, 2, -1, 0, 1},  // d/dx
        {-1, -2, -1, 0, 0, 0, 1, 2, 1},  // d/dy
        {-2, -1, 0, -1, 0, 1, 0, 1, 2},  // along (+x, +y)
        {0, 1, 2, -1, 0, 1, -2, -1, 0},  // along (+x, -y)
    };
    Tensor<double> k(Dims{kKernels, 1, 3, 3});
    for (int o = 0; o < 4; ++o)
        for (int i = 0; i < 9; ++i) {
            k[(2 * o) * 9 + i] = base[o][i] / 8.0;
            k[(2 * o + 1) * 9 + i] = -base[o][i] / 8.0;
        }
    return k;
}

namespace {

template <class T>
std::vector<Var> edge_features(Graph<T>& g, Var img)
{
    const Var bank = g.constant(EdgeBankExtractor::bank().cast<T>());
    auto level = [&](Var x) { return g.relu(g.conv2d(g.pad_replicate(x, 1), bank, Var{}, 1, 0)); };
    return {level(img), level(g.avg_pool2(img))};
}

} // namespace

std::vector<Var> EdgeBankExtractor::features(Graph<float>& g, Var img) const { return edge_features(g, img); }
std::vector<Var> EdgeBankExtractor::features(Graph<double>& g, Var img) const { return edge_features(g, img); }

std::shared_ptr<const PerceptualExtractor> make_extractor(const std::string& id)
{
    if (id == EdgeBankExtractor::kId) return std::make_shared<EdgeBankExtractor>();
    throw std::invalid_argument("unknown perceptual extractor '" + id + "'");
}

void LossConfig::validate() const
{
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    if (p < 0) throw std::invalid_argument("p must be >= 0");
    if (layer_weights.empty()) throw std::invalid_argument("layer_weights must not be empty");
    double total = 0.0;
    for (double w : layer_weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("layer weights must be >= 0");
        total += w;
    }
    if (!(total > 0.0)) throw std::invalid_argument("layer weights must not all be zero");
}

namespace {

template <class T>
struct LossBuilder {
    Graph<T>& g;
    const LossConfig& cfg;
    const PerceptualExtractor& ext;
    std::vector<Var> feats_y;
    bool need_perceptual;

    LossBuilder(Graph<T>& graph, Var y, const LossConfig& c, const PerceptualExtractor& e)
        : g(graph), cfg(c), ext(e), need_perceptual(c.alpha < 1.0)
    {
        if (need_perceptual) {
            feats_y = ext.features(g, y);
            if (feats_y.size() != cfg.layer_weights.size())
                throw std::invalid_argument("extractor " + ext.id() + " yields " + std::to_string(feats_y.size()) +
                                            " scales but " + std::to_string(cfg.layer_weights.size()) +
                                            " layer weights are configured");
        }
    }

    // Adds one supervised term against `ref` into `acc`.
    void term(Var y, Var ref, LossTerms<T>& acc)
    {
        const Var l1 = g.mean_abs_diff(y, ref);
        acc.l1 += g.value(l1)[0];
        Var total = g.scale(l1, static_cast<T>(cfg.alpha));
        if (need_perceptual) {
            const auto feats_r = ext.features(g, ref);
            const double wsum = std::accumulate(cfg.layer_weights.begin(), cfg.layer_weights.end(), 0.0);
            Var perc;
            for (std::size_t s = 0; s < feats_y.size(); ++s) {
                const Var d = g.scale(g.mean_abs_diff(feats_y[s], feats_r[s]), static_cast<T>(cfg.layer_weights[s] / wsum));
                perc = perc.valid() ? g.add(perc, d) : d;
            }
            acc.perceptual += g.value(perc)[0];
            total = g.add(total, g.scale(perc, static_cast<T>(1.0 - cfg.alpha)));
        }
        acc.total = acc.total.valid() ? g.add(acc.total, total) : total;
    }
};

} // namespace

template <class T>
LossTerms<T> supervised_loss(Graph<T>& g, Var y, Var target, const LossConfig& cfg, const PerceptualExtractor& ext)
{
    cfg.validate();
    require_same_shape(g.value(y).shape(), g.value(target).shape(), "supervised_loss");
    LossBuilder<T> b(g, y, cfg, ext);
    LossTerms<T> out;
    b.term(y, target, out);
    return out;
}

template <class T>
LossTerms<T> perturbation_loss(Graph<T>& g, Var x0, const std::vector<Var>& perturbed, Var target, const LossConfig& cfg,
                               const PerceptualExtractor& ext)
{
    cfg.validate();
    if (perturbed.size() != static_cast<std::size_t>(cfg.p))
        throw std::invalid_argument("perturbation_loss expects " + std::to_string(cfg.p) + " perturbed outputs, got " +
                                    std::to_string(perturbed.size()));
    require_same_shape(g.value(x0).shape(), g.value(target).shape(), "perturbation_loss target");
    LossBuilder<T> b(g, x0, cfg, ext);
    LossTerms<T> out;
    b.term(x0, target, out);
    for (const Var& xi : perturbed) {
        require_same_shape(g.value(x0).shape(), g.value(xi).shape(), "perturbation_loss output");
        b.term(x0, g.constant(g.value(xi)), out);
    }
    return out;
}

template LossTerms<float> supervised_loss(Graph<float>&, Var, Var, const LossConfig&, const PerceptualExtractor&);
template LossTerms<double> supervised_loss(Graph<double>&, Var, Var, const LossConfig&, const PerceptualExtractor&);
template LossTerms<float> perturbation_loss(Graph<float>&, Var, const std::vector<Var>&, Var, const LossConfig&,
                                            const PerceptualExtractor&);
template LossTerms<double> perturbation_loss(Graph<double>&, Var, const std::vector<Var>&, Var, const LossConfig&,
                                             const PerceptualExtractor&);

double supervised_loss_value(const Tensor<float>& y, const Tensor<float>& target, const LossConfig& cfg)
{
    Graph<double> g;
    const auto ext = make_extractor(cfg.perceptual);
    const auto terms = supervised_loss(g, g.constant(y.cast<double>()), g.constant(target.cast<double>()), cfg, *ext);
    return g.value(terms.total)[0];
}

void TrainConfig::validate() const
{
    if (steps < 1) throw std::invalid_argument("steps must be >= 1");
    if (!(eval_probability >= 0.0 && eval_probability <= 1.0))
        throw std::invalid_argument("eval_probability must lie in [0, 1]");
    if (keep_best < 1) throw std::invalid_argument("keep_best must be >= 1");
    if (!(adam.lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
    if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0))
        throw std::invalid_argument("final_lr_fraction must lie in (0, 1]");
}

double evaluate_mse(const NetworkWeights& w, const NetworkConfig& net, const std::vector<TrainingSample>& samples)
{
    if (samples.empty()) throw std::invalid_argument("evaluate_mse needs at least one sample");
    double total = 0.0;
    for (const auto& s : samples) total += mse(infer(w, net, s.inputs.at(0)), s.target, s.covered);
    return total / static_cast<double>(samples.size());
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "step,loss,l1,perceptual,heldout_mse,wallclock_s\n";
    f.precision(17);
    for (const auto& r : rows) {
        f << r.step << ',' << r.loss << ',' << r.l1 << ',' << r.perceptual << ',';
        if (r.heldout_mse) f << *r.heldout_mse;
        f << ',' << r.wallclock_s << '\n';
    }
    if (!f) throw std::runtime_error("error writing " + path);
}

namespace {

void check_sample(const TrainingSample& s, const NetworkConfig& net, int p)
{
    if (s.inputs.size() < static_cast<std::size_t>(p) + 1)
        throw std::invalid_argument("sample " + s.id + " has " + std::to_string(s.inputs.size()) +
                                    " feature stacks, p = " + std::to_string(p) + " needs " + std::to_string(p + 1));
    const Tensor<float>& x = s.inputs[0];
    if (x.rank() != 3 || x.channels() != static_cast<std::size_t>(net.in_channels))
        throw ShapeError("sample " + s.id + " has input shape " + shape_string(x.shape()));
    for (const auto& xi : s.inputs) require_same_shape(xi.shape(), x.shape(), "perturbed feature stack");
    require_same_shape(s.target.shape(), Dims{1, x.height(), x.width()}, "target");
    net.validate_input(static_cast<int>(x.height()), static_cast<int>(x.width()));
}

struct Candidate {
    double heldout = 0.0;
    int step = 0;
    NetworkWeights weights;
};

} // namespace

TrainResult train(const std::vector<TrainingSample>& train_set, const std::vector<TrainingSample>& heldout,
                  const NetworkConfig& net, const NetworkWeights& initial, const LossConfig& loss,
                  const TrainConfig& cfg)
{
    net.validate();
    loss.validate();
    cfg.validate();
    check_weights(net, initial);
    if (train_set.empty()) throw std::invalid_argument("training set is empty");
    for (const auto& s : train_set) check_sample(s, net, loss.p);
    for (const auto& s : heldout) check_sample(s, net, 0);
    const auto ext = make_extractor(loss.perceptual);
    const auto& eval_set = heldout.empty() ? train_set : heldout;

    TrainResult result;
    NetworkWeights w = initial;
    AdamState adam{cfg.adam, {}, {}, 0};
    std::mt19937_64 order_rng(cfg.seed);
    std::mt19937_64 eval_rng(cfg.seed ^ 0x5bd1e9955bd1e995ULL);
    std::bernoulli_distribution do_eval(cfg.eval_probability);
    std::vector<std::size_t> order;
    std::size_t pos = 0;
    std::vector<Candidate> best;
    const auto t0 = std::chrono::steady_clock::now();

    for (int step = 1; step <= cfg.steps; ++step) {
        if (pos == order.size()) {
            order.resize(train_set.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::shuffle(order.begin(), order.end(), order_rng);
            pos = 0;
        }
        const TrainingSample& s = train_set[order[pos++]];

        std::vector<Tensor<float>> outs(static_cast<std::size_t>(loss.p));
        parallel_for(0, outs.size(), [&](std::size_t i) { outs[i] = infer(w, net, s.inputs[i + 1]); });

        Graph<float> g;
        const auto params = bind_weights(g, w, true);
        const Var y0 = forward(g, net, params, g.constant(s.inputs[0]));
        std::vector<Var> perturbed;
        for (auto& o : outs) perturbed.push_back(g.constant(std::move(o)));
        const auto terms = perturbation_loss(g, y0, perturbed, g.constant(s.target), loss, *ext);
        result.forward_passes += loss.p + 1;

        const double value = g.value(terms.total)[0];
        if (!std::isfinite(value)) {
            std::ostringstream msg;
            msg << "non-finite loss at step " << step << " on sample '" << s.id << "' (l1 " << terms.l1
                << ", perceptual " << terms.perceptual << ")";
            throw TrainingError(msg.str());
        }
        g.backward(terms.total);
        std::vector<Tensor<float>> grads;
        grads.reserve(params.size());
        for (const Var& p : params) grads.push_back(g.grad(p));
        if (cfg.final_lr_fraction < 1.0) {
            const double t = cfg.steps > 1 ? static_cast<double>(step - 1) / (cfg.steps - 1) : 1.0;
            const double f = cfg.final_lr_fraction + (1.0 - cfg.final_lr_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
            adam.config.lr = cfg.adam.lr * f;
        }
        adam_step(w.params, grads, adam);

        MetricsRow row;
        row.step = step;
        row.loss = value;
        row.l1 = terms.l1;
        row.perceptual = terms.perceptual;
        const bool sampled = do_eval(eval_rng);
        if (sampled || step == cfg.steps) {
            const double m = evaluate_mse(w, net, eval_set);
            row.heldout_mse = m;
            Candidate c{m, step, w};
            const auto at = std::upper_bound(best.begin(), best.end(), m,
                                             [](double v, const Candidate& b) { return v < b.heldout; });
            best.insert(at, std::move(c));
            if (best.size() > static_cast<std::size_t>(cfg.keep_best)) best.pop_back();
        }
        if (!cfg.deterministic)
            row.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(row);
    }

    double best_train = 0.0;
    const Candidate* chosen = nullptr;
    for (const auto& c : best) {
        const double m = evaluate_mse(c.weights, net, train_set);
        if (!chosen || m < best_train) {
            chosen = &c;
            best_train = m;
        }
    }
    result.weights = chosen->weights;
    result.train_mse = best_train;
    result.heldout_mse = chosen->heldout;
    result.selected_step = chosen->step;
    if (!cfg.log_path.empty()) write_metrics_csv(cfg.log_path, result.log);
    return result;
}

} // namespace nsm
