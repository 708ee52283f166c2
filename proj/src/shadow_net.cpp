#include "nsm/shadow_net.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace nsm {

void NetworkConfig::validate() const
{
    if (layers < 2) throw std::invalid_argument("layers must be >= 2");
    if (base_channels < 4) throw std::invalid_argument("base_channels must be >= 4");
    if (in_channels < 1) throw std::invalid_argument("in_channels must be >= 1");
    if (max_channels < base_channels) throw std::invalid_argument("max_channels must be >= base_channels");
    if (layers > 12) throw std::invalid_argument("layers must be <= 12");
    if (input_shift.size() != input_scale.size() ||
        (!input_shift.empty() && input_shift.size() != static_cast<std::size_t>(in_channels)))
        throw std::invalid_argument("input standardization needs one shift and one scale per input channel");
    for (std::size_t c = 0; c < input_shift.size(); ++c)
        if (!std::isfinite(input_shift[c]) || !(std::isfinite(input_scale[c]) && input_scale[c] > 0.0))
            throw std::invalid_argument("input standardization must be finite with positive scales");
    if (!(output_margin >= 0.0 && output_margin < 0.5)) throw std::invalid_argument("output_margin must be in [0, 0.5)");
}

int NetworkConfig::channels(int level) const
{
    long c = base_channels;
    for (int k = 1; k < level && c < max_channels; ++k) c *= 2;
    return static_cast<int>(std::min<long>(c, max_channels));
}

void NetworkConfig::validate_input(int height, int width) const
{
    const int m = size_multiple();
    if (height <= 0 || width <= 0 || height % m != 0 || width % m != 0)
        throw ShapeError("input " + std::to_string(height) + "x" + std::to_string(width) + " is not a multiple of " +
                         std::to_string(m) + " for " + std::to_string(layers) + " layers");
}

namespace {

struct Layer {
    std::string name;
    int in = 0;
    int out = 0;
    int kernel = 1;
};

// Convolutions in the order forward() consumes them.
std::vector<Layer> conv_layers(const NetworkConfig& cfg)
{
    cfg.validate();
    const int first = cfg.first_level();
    const int bottom = cfg.layers - 1;
    const int input = cfg.use_space_to_depth ? 4 * cfg.in_channels : cfg.in_channels;
    std::vector<Layer> out;
    int cin = input;
    for (int k = first; k < bottom; ++k) {
        const std::string p = "enc" + std::to_string(k);
        out.push_back({p + ".conv3", cin, cfg.channels(k), 3});
        out.push_back({p + ".conv1", cfg.channels(k), cfg.channels(k), 1});
        cin = cfg.channels(k);
    }
    const int bottom_out = bottom > first ? cfg.channels(bottom - 1) : cfg.channels(bottom);
    out.push_back({"bottleneck.conv3", cin, cfg.channels(bottom), 3});
    out.push_back({"bottleneck.conv1", cfg.channels(bottom), bottom_out, 1});
    for (int k = bottom - 1; k >= first; --k) {
        const std::string p = "dec" + std::to_string(k);
        const int c = cfg.channels(k);
        out.push_back({p + ".conv3", c, c, 3});
        out.push_back({p + ".conv1", c, k > first ? cfg.channels(k - 1) : c, 1});
    }
    out.push_back({"head", cfg.channels(first), cfg.output_channels(), 1});
    return out;
}

} // namespace

std::vector<ParamSpec> parameter_layout(const NetworkConfig& cfg)
{
    std::vector<ParamSpec> out;
    for (const auto& l : conv_layers(cfg)) {
        const auto o = static_cast<std::size_t>(l.out), i = static_cast<std::size_t>(l.in),
                   k = static_cast<std::size_t>(l.kernel);
        out.push_back({l.name + ".w", Dims{o, i, k, k}});
        out.push_back({l.name + ".b", Dims{o}});
    }
    return out;
}

template <class T>
std::size_t NetworkWeightsT<T>::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& p : params) n += p.size();
    return n;
}

template <class T>
const Tensor<T>& NetworkWeightsT<T>::get(const std::string& name) const
{
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw std::out_of_range("no parameter named " + name);
    return params[static_cast<std::size_t>(it - names.begin())];
}

template <class T>
Tensor<T>& NetworkWeightsT<T>::get(const std::string& name)
{
    return const_cast<Tensor<T>&>(static_cast<const NetworkWeightsT&>(*this).get(name));
}

template struct NetworkWeightsT<float>;
template struct NetworkWeightsT<double>;

NetworkWeights zero_weights(const NetworkConfig& cfg)
{
    NetworkWeights w;
    for (auto& s : parameter_layout(cfg)) {
        w.names.push_back(s.name);
        w.params.emplace_back(s.shape);
    }
    return w;
}

NetworkWeights init_weights(const NetworkConfig& cfg, std::uint64_t seed)
{
    NetworkWeights w = zero_weights(cfg);
    std::mt19937_64 rng(seed);
    for (auto& p : w.params) {
        if (p.rank() != 4) continue;
        const double fan_in = static_cast<double>(p.dim(1) * p.dim(2) * p.dim(3));
        const double bound = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> u(-bound, bound);
        for (auto& v : p.vec()) v = static_cast<float>(u(rng));
    }
    return w;
}

void fit_input_standardization(NetworkConfig& cfg, const std::vector<const Tensor<float>*>& inputs)
{
    if (inputs.empty()) throw std::invalid_argument("fit_input_standardization needs at least one input");
    const std::size_t channels = static_cast<std::size_t>(cfg.in_channels);
    std::vector<double> sum(channels, 0.0), sq(channels, 0.0);
    double count = 0.0;
    for (const Tensor<float>* x : inputs) {
        if (x->rank() != 3 || x->channels() != channels)
            throw ShapeError("standardization input has shape " + shape_string(x->shape()));
        const std::size_t plane = x->plane();
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t i = 0; i < plane; ++i) {
                const double v = (*x)[c * plane + i];
                sum[c] += v;
                sq[c] += v * v;
            }
        count += static_cast<double>(plane);
    }
    cfg.input_shift.assign(channels, 0.0);
    cfg.input_scale.assign(channels, 1.0);
    for (std::size_t c = 0; c < channels; ++c) {
        const double mean = sum[c] / count;
        const double sd = std::sqrt(std::max(0.0, sq[c] / count - mean * mean));
        cfg.input_shift[c] = mean;
        if (sd > 1e-6) cfg.input_scale[c] = 1.0 / sd;
    }
}

template <class T>
void check_weights(const NetworkConfig& cfg, const NetworkWeightsT<T>& w)
{
    const auto layout = parameter_layout(cfg);
    if (layout.size() != w.params.size() || w.names.size() != w.params.size())
        throw ShapeError("expected " + std::to_string(layout.size()) + " parameters, got " +
                         std::to_string(w.params.size()));
    for (std::size_t i = 0; i < layout.size(); ++i) {
        if (w.names[i] != layout[i].name) throw ShapeError("parameter " + w.names[i] + " where " + layout[i].name + " expected");
        require_same_shape(w.params[i].shape(), layout[i].shape, layout[i].name.c_str());
    }
}

template void check_weights(const NetworkConfig&, const NetworkWeightsT<float>&);
template void check_weights(const NetworkConfig&, const NetworkWeightsT<double>&);

void fit_output_prior(NetworkWeights& w, const NetworkConfig& cfg, const std::vector<const Tensor<float>*>& targets)
{
    if (targets.empty()) throw std::invalid_argument("fit_output_prior needs at least one target");
    check_weights(cfg, w);
    // the L1-optimal constant is the median
    std::vector<float> all;
    for (const Tensor<float>* t : targets) all.insert(all.end(), t->vec().begin(), t->vec().end());
    if (all.empty()) throw std::invalid_argument("fit_output_prior needs nonempty targets");
    const auto mid = all.begin() + static_cast<std::ptrdiff_t>(all.size() / 2);
    std::nth_element(all.begin(), mid, all.end());
    // invert y = (1 + 2m) sigmoid(z) - m, keeping z finite when there is no margin
    const double m = cfg.output_margin;
    const double s = std::clamp((static_cast<double>(*mid) + m) / (1.0 + 2.0 * m), 0.01, 0.99);
    w.get("head.b")[0] = static_cast<float>(std::log(s / (1.0 - s)));
}

std::size_t conv_params(int in_channels, int out_channels, int kernel)
{
    return static_cast<std::size_t>(in_channels) * out_channels * kernel * kernel + out_channels;
}

int receptive_field(int layers)
{
    if (layers < 1) throw std::invalid_argument("layers must be >= 1");
    return 3 << layers;
}

int layers_for_penumbra(double p_w)
{
    if (!(p_w >= 1.0)) return 2;
    int l = 2;
    while (receptive_field(l) < p_w) ++l;
    return l;
}

template <class T>
std::vector<Var> bind_weights(Graph<T>& g, const NetworkWeightsT<T>& w, bool trainable)
{
    std::vector<Var> out;
    out.reserve(w.params.size());
    for (const auto& p : w.params) out.push_back(trainable ? g.parameter(p) : g.constant(p));
    return out;
}

template std::vector<Var> bind_weights(Graph<float>&, const NetworkWeightsT<float>&, bool);
template std::vector<Var> bind_weights(Graph<double>&, const NetworkWeightsT<double>&, bool);

template <class T>
Var forward(Graph<T>& g, const NetworkConfig& cfg, const std::vector<Var>& params, Var input)
{
    const auto layers = conv_layers(cfg);
    if (params.size() != 2 * layers.size())
        throw ShapeError("expected " + std::to_string(2 * layers.size()) + " parameter vars, got " +
                         std::to_string(params.size()));
    const Tensor<T>& in = g.value(input);
    if (in.rank() != 3 || in.channels() != static_cast<std::size_t>(cfg.in_channels))
        throw ShapeError("network input must be (" + std::to_string(cfg.in_channels) + ", H, W), got " +
                         shape_string(in.shape()));
    cfg.validate_input(static_cast<int>(in.height()), static_cast<int>(in.width()));

    std::size_t next = 0;
    auto conv = [&](Var x) {
        const Var w = params[next], b = params[next + 1];
        next += 2;
        return g.conv2d(x, w, b);
    };
    auto block = [&](Var x) { return g.relu(conv(g.relu(conv(x)))); };

    const int first = cfg.first_level();
    const int bottom = cfg.layers - 1;
    Var x = input;
    if (!cfg.input_shift.empty()) {
        Tensor<T> scale(in.shape()), offset(in.shape());
        const std::size_t plane = in.plane();
        for (std::size_t c = 0; c < in.channels(); ++c)
            for (std::size_t i = 0; i < plane; ++i) {
                scale[c * plane + i] = static_cast<T>(cfg.input_scale[c]);
                offset[c * plane + i] = static_cast<T>(-cfg.input_shift[c] * cfg.input_scale[c]);
            }
        x = g.add(g.mul(x, g.constant(std::move(scale))), g.constant(std::move(offset)));
    }
    if (cfg.use_space_to_depth) x = g.space_to_depth(x);
    std::vector<Var> skips;
    for (int k = first; k < bottom; ++k) {
        x = block(x);
        skips.push_back(x);
        x = g.avg_pool2(x);
    }
    x = block(x);
    for (int k = bottom - 1; k >= first; --k) {
        x = g.upsample2(x);
        if (k > first) x = g.add(x, skips[static_cast<std::size_t>(k - first)]);
        x = block(x);
    }
    Var y = conv(x);
    // Widened sigmoid: 0 and 1 are reached at finite logits, so an L1 loss
    // stops pushing lit pixels once they get there.
    auto out = [&](Var z) {
        const Var s = g.sigmoid(z);
        if (cfg.output_margin == 0.0) return s;
        const T m = static_cast<T>(cfg.output_margin);
        return g.add(g.scale(s, T(1) + 2 * m), g.constant(Tensor<T>(g.value(s).shape(), -m)));
    };
    if (!cfg.use_space_to_depth) return out(y);

    // Channel 0 carries the smooth part, upsampled bilinearly. The other three
    // fill the 2x2 block offsets (0,1), (1,0), (1,1) as residuals.
    const Tensor<T>& yv = g.value(y);
    Tensor<T> mask(yv.shape(), T(1));
    std::fill(mask.channel(0).begin(), mask.channel(0).end(), T(0));
    const Var base = g.upsample2(g.slice_channels(y, 0, 1));
    const Var detail = g.depth_to_space(g.mul(y, g.constant(std::move(mask))));
    return out(g.add(base, detail));
}

template Var forward(Graph<float>&, const NetworkConfig&, const std::vector<Var>&, Var);
template Var forward(Graph<double>&, const NetworkConfig&, const std::vector<Var>&, Var);

Tensor<float> infer(const NetworkWeights& w, const NetworkConfig& cfg, const Tensor<float>& features)
{
    check_weights(cfg, w);
    Graph<float> g;
    const auto params = bind_weights(g, w, false);
    const Var out = forward(g, cfg, params, g.constant(features));
    Tensor<float> y = g.value(out);
    for (auto& v : y.vec()) v = std::clamp(v, 0.0f, 1.0f);
    return y;
}

NetStats net_stats(const NetworkConfig& cfg, int height, int width)
{
    cfg.validate_input(height, width);
    const auto layers = conv_layers(cfg);
    const int first = cfg.first_level();
    const int bottom = cfg.layers - 1;
    const double full = static_cast<double>(height) * width;

    NetStats s;
    for (int k = first; k <= bottom; ++k) {
        LevelStats st;
        st.level = k;
        st.height = height >> k;
        st.width = width >> k;
        s.levels.push_back(st);
    }
    auto level = [&](int k) -> LevelStats& { return s.levels[static_cast<std::size_t>(k - first)]; };
    auto pixels = [&](int k) { return static_cast<double>(height >> k) * static_cast<double>(width >> k); };
    auto add_conv = [&](int k, const Layer& l) {
        LevelStats& st = level(k);
        st.parameters += conv_params(l.in, l.out, l.kernel);
        const double px = pixels(k);
        st.flops_per_pixel += 2.0 * l.in * l.out * l.kernel * l.kernel * px / full;
        st.temp_storage_pixels += (l.in + l.out) * px;
    };

    std::size_t i = 0;
    for (int k = first; k < bottom; ++k) {
        add_conv(k, layers[i++]);
        add_conv(k, layers[i++]);
        const double c = cfg.channels(k);
        level(k).flops_per_pixel += 4.0 * c * pixels(k + 1) / full;
        level(k).temp_storage_pixels += c * (pixels(k) + pixels(k + 1));
    }
    add_conv(bottom, layers[i++]);
    add_conv(bottom, layers[i++]);
    for (int k = bottom - 1; k >= first; --k) {
        const double c = cfg.channels(k);
        level(k).flops_per_pixel += 7.0 * c * pixels(k) / full;
        level(k).temp_storage_pixels += c * (pixels(k + 1) + pixels(k));
        if (k > first) {
            level(k).flops_per_pixel += c * pixels(k) / full;
            level(k).temp_storage_pixels += 3.0 * c * pixels(k);
        }
        add_conv(k, layers[i++]);
        add_conv(k, layers[i++]);
    }
    add_conv(first, layers[i++]);
    if (cfg.use_space_to_depth) {
        // Bilinear base plus residual add at full resolution.
        level(first).flops_per_pixel += 8.0;
        level(first).temp_storage_pixels += pixels(first) * 5.0 + full * 2.0;
    }
    for (const auto& st : s.levels) {
        s.total_parameters += st.parameters;
        s.total_flops_per_pixel += st.flops_per_pixel;
    }
    return s;
}

} // namespace nsm
