// Command-line driver: dataset generation, training, inference and the analysis reports.

#include "nsm/analysis.hpp"
#include "nsm/config.hpp"
#include "nsm/dataset.hpp"
#include "nsm/io.hpp"
#include "nsm/parallel.hpp"
#include "nsm/shadow_net.hpp"
#include "nsm/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace nsm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliError : std::runtime_error {
    std::string code;
    CliError(std::string c, const std::string& msg) : std::runtime_error(msg), code(std::move(c)) {}
};

std::string one_line(std::string s)
{
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

void require_file(const std::string& path, const char* what)
{
    if (path.empty()) throw CliError("missing-argument", std::string(what) + " is required");
    if (!fs::exists(path)) throw CliError("missing-file", std::string(what) + " '" + path + "' does not exist");
}

void log_config(const std::string& command, const json& cfg)
{
    json j = cfg;
    j["command"] = command;
    j["threads"] = worker_count();
    std::cerr << "config " << j.dump() << '\n';
}

std::string fmt(double v, int precision = 6)
{
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

std::string join(const std::vector<std::string>& v)
{
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
    return out;
}

std::string strip_ext(const std::string& path)
{
    fs::path p(path);
    return p.has_extension() ? p.replace_extension().string() : path;
}

// ---- shared option groups --------------------------------------------------

struct NetOptions {
    int layers = 5;
    int base_channels = 16;
    bool plain = false;

    void add(CLI::App* app)
    {
        app->add_option("--layers", layers, "U-Net depth")->capture_default_str()->check(CLI::Range(1, 10));
        app->add_option("--base-channels", base_channels, "channels at level 1")->capture_default_str()->check(CLI::PositiveNumber);
        app->add_flag("--plain", plain, "plain first layer instead of space-to-depth");
    }
    NetworkConfig config(int in_channels) const
    {
        NetworkConfig c;
        c.layers = layers;
        c.base_channels = base_channels;
        c.use_space_to_depth = !plain;
        c.in_channels = in_channels;
        return c;
    }
};

struct TrainOptions {
    int steps = 2000;
    double lr = 1e-3;
    double lr_final = 1.0;
    double alpha = 0.9;
    int p = -1;
    std::uint64_t seed = 1;
    double eval_probability = 0.01;
    bool deterministic = false;

    void add(CLI::App* app)
    {
        app->add_option("--steps", steps, "optimizer steps")->capture_default_str()->check(CLI::PositiveNumber);
        app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
        app->add_option("--lr-final", lr_final, "final learning rate as a fraction of --lr (cosine decay)")
            ->capture_default_str()
            ->check(CLI::Range(0.0, 1.0));
        app->add_option("--alpha", alpha, "L1 weight of the loss")->capture_default_str()->check(CLI::Range(0.0, 1.0));
        app->add_option("--p", p, "perturbed stacks per sample (default: all in the dataset)");
        app->add_option("--seed", seed, "initialization and ordering seed")->capture_default_str();
        app->add_option("--eval-probability", eval_probability, "held-out evaluation probability per step")
            ->capture_default_str();
        app->add_flag("--deterministic", deterministic, "omit wall-clock times from outputs");
    }
    json to_json() const
    {
        return {{"steps", steps}, {"lr", lr}, {"lr_final", lr_final}, {"alpha", alpha}, {"p", p}, {"seed", seed},
                {"eval_probability", eval_probability}, {"deterministic", deterministic}};
    }
};

DatasetManifest open_dataset(const std::string& root)
{
    require_file(root, "--data");
    return load_manifest(root);
}

std::vector<double> resolve_sizes(const DatasetManifest& m, const std::vector<double>& sizes)
{
    if (sizes.empty()) return m.size_indices;
    for (double s : sizes)
        if (std::find(m.size_indices.begin(), m.size_indices.end(), s) == m.size_indices.end())
            throw CliError("invalid-argument", "size index " + fmt(s) + " is not in the dataset");
    return sizes;
}

int frame_count(const DatasetManifest& m) { return static_cast<int>(m.frames.size()); }

struct Trained {
    NetworkConfig net;
    TrainResult result;
};

Trained run_training(const std::vector<TrainingSample>& train_set, const std::vector<TrainingSample>& heldout,
                     NetworkConfig net, const TrainOptions& t, int p, const std::string& log_path)
{
    std::vector<const Tensor<float>*> xs;
    for (const auto& s : train_set) xs.push_back(&s.inputs[0]);
    fit_input_standardization(net, xs);
    LossConfig loss;
    loss.alpha = t.alpha;
    loss.p = p;
    TrainConfig tc;
    tc.steps = t.steps;
    tc.seed = t.seed;
    tc.adam.lr = t.lr;
    tc.final_lr_fraction = t.lr_final;
    tc.eval_probability = t.eval_probability;
    tc.deterministic = t.deterministic;
    tc.log_path = log_path;
    Trained out{net, {}};
    NetworkWeights w = init_weights(net, t.seed);
    std::vector<const Tensor<float>*> ts;
    for (const auto& s : train_set) ts.push_back(&s.target);
    fit_output_prior(w, net, ts);
    out.result = train(train_set, heldout, net, w, loss, tc);
    return out;
}

// ---- subcommands -----------------------------------------------------------

int cmd_generate(const std::string& scene_path, const std::string& traj_path, GeneratorSettings s, int p,
                 const std::string& out)
{
    require_file(scene_path, "--scene");
    if (!traj_path.empty()) require_file(traj_path, "--traj");
    if (out.empty()) throw CliError("missing-argument", "--out is required");
    SceneConfig cfg = load_scene_config(scene_path);
    if (p >= 0) cfg.perturbation.count = p;
    const Trajectory traj = traj_path.empty() ? static_trajectory(cfg.camera) : load_trajectory(traj_path, cfg);
    log_config("generate", {{"scene", to_json(cfg)},
                            {"trajectory", to_json(traj)},
                            {"frames", s.frames},
                            {"spp", s.spp},
                            {"msaa", s.msaa},
                            {"sigma", s.sigma},
                            {"bias", s.bias},
                            {"seed", s.seed},
                            {"out", out}});
    const auto m = generate_dataset(cfg, traj, s, out);
    std::cout << "frames=" << m.frames.size() << " p=" << m.p << " sizes=" << m.size_indices.size()
              << " hash=" << m.hash << '\n';
    return 0;
}

int cmd_train(const std::string& data, const NetOptions& n, const TrainOptions& t, const std::vector<double>& sizes_in,
              const std::string& out)
{
    if (out.empty()) throw CliError("missing-argument", "--out is required");
    const auto m = open_dataset(data);
    const int p = t.p < 0 ? m.p : t.p;
    if (p > m.p) throw CliError("invalid-argument", "--p " + std::to_string(p) + " exceeds the dataset's " + std::to_string(m.p));
    const auto sizes = resolve_sizes(m, sizes_in);
    json c = t.to_json();
    c["p"] = p;
    c["data"] = data;
    c["dataset_hash"] = m.hash;
    c["sizes"] = sizes;
    c["net"] = to_json(n.config(kFeatureChannels));
    c["out"] = out;
    log_config("train", c);

    LoadOptions opt;
    opt.size_indices = sizes;
    opt.p = p;
    const auto train_set = load_samples(m, data, training_frames(frame_count(m)), opt);
    opt.p = 0;
    const auto heldout = load_samples(m, data, heldout_frames(frame_count(m)), opt);
    const auto r = run_training(train_set, heldout, n.config(kFeatureChannels), t, p, strip_ext(out) + ".metrics.csv");
    save_checkpoint(out, r.net, r.result.weights);
    std::cout << "train_mse=" << fmt(r.result.train_mse) << " heldout_mse=" << fmt(r.result.heldout_mse)
              << " step=" << r.result.selected_step << " train_samples=" << train_set.size()
              << " heldout_samples=" << heldout.size() << '\n';
    return 0;
}

struct LoadedModel {
    NetworkConfig net;
    NetworkWeights weights;
};

LoadedModel open_model(const std::string& path)
{
    require_file(path, "--model");
    auto ck = load_checkpoint(path);
    return {ck.config, std::move(ck.weights)};
}

const TrainingSample& pick(const std::vector<TrainingSample>& samples, int frame)
{
    if (samples.empty()) throw CliError("invalid-argument", "no sample for frame " + std::to_string(frame));
    return samples.front();
}

int cmd_infer(const std::string& data, const std::string& model_path, int frame, double size, const std::string& out,
              bool deterministic)
{
    if (out.empty()) throw CliError("missing-argument", "--out is required");
    const auto m = open_dataset(data);
    const auto model = open_model(model_path);
    if (frame < 0 || frame >= frame_count(m))
        throw CliError("invalid-argument", "--frame " + std::to_string(frame) + " out of range");
    log_config("infer", {{"data", data}, {"dataset_hash", m.hash}, {"model", model_path}, {"net", to_json(model.net)},
                         {"frame", frame}, {"size", size}, {"out", out}, {"deterministic", deterministic}});
    LoadOptions opt;
    opt.size_indices = resolve_sizes(m, {size});
    opt.p = 0;
    const auto samples = load_samples(m, data, {frame}, opt);
    const auto& s = pick(samples, frame);
    const Tensor<float> y = infer(model.weights, model.net, s.inputs[0]);
    write_float_map(out, y);
    write_pgm(strip_ext(out) + ".pgm", y);
    std::cout << "frame=" << frame << " size=" << fmt(size) << " height=" << y.height() << " width=" << y.width()
              << " mse=" << fmt(mse(y, s.target, s.covered)) << '\n';
    return 0;
}

int cmd_eval_temporal(const std::string& data, const std::string& model_path, bool targets, std::vector<double> size,
                      double alpha_t, bool deterministic)
{
    const auto m = open_dataset(data);
    if (!targets && model_path.empty()) throw CliError("missing-argument", "--model or --targets is required");
    const double s = size.empty() ? m.size_indices.back() : resolve_sizes(m, size).front();
    log_config("eval-temporal", {{"data", data}, {"dataset_hash", m.hash}, {"model", model_path}, {"targets", targets},
                                 {"size", s}, {"alpha_t", alpha_t}, {"deterministic", deterministic}});
    std::vector<int> all(m.frames.size());
    std::iota(all.begin(), all.end(), 0);
    LoadOptions opt;
    opt.size_indices = {s};
    opt.p = 0;
    const auto samples = load_samples(m, data, all, opt);
    std::vector<Tensor<float>> frames;
    if (targets) {
        for (const auto& x : samples) frames.push_back(x.target);
    } else {
        const auto model = open_model(model_path);
        for (const auto& x : samples) frames.push_back(infer(model.weights, model.net, x.inputs[0]));
    }
    const auto r = temporal_instability(frames, load_motion(m, data), alpha_t);
    std::cout << "E=" << fmt(r.instability) << " frames=" << r.frames << " valid=" << r.valid_pixels
              << " rejected=" << fmt(r.rejected_fraction) << '\n';
    return 0;
}

int cmd_sensitivity(const std::string& data, const std::string& model_path, int repeats, std::uint64_t seed,
                    const std::string& out, bool deterministic)
{
    const auto m = open_dataset(data);
    const auto model = open_model(model_path);
    if (model.net.in_channels != kFeatureChannels)
        throw CliError("invalid-argument", "model expects " + std::to_string(model.net.in_channels) +
                                               " channels; sensitivity runs on the feature stack");
    log_config("sensitivity", {{"data", data}, {"dataset_hash", m.hash}, {"model", model_path}, {"repeats", repeats},
                               {"seed", seed}, {"out", out}, {"deterministic", deterministic}});
    auto frames = heldout_frames(frame_count(m));
    if (frames.empty()) frames = training_frames(frame_count(m));
    LoadOptions opt;
    opt.p = 0;
    const auto samples = load_samples(m, data, frames, opt);
    std::vector<Tensor<float>> inputs;
    std::vector<std::vector<std::uint8_t>> covered;
    for (const auto& s : samples) {
        inputs.push_back(s.inputs[0]);
        covered.push_back(s.covered);
    }
    SensitivityConfig sc;
    sc.repeats = repeats;
    sc.seed = seed;
    const ChannelModel f = [&](const Tensor<float>& x) { return infer(model.weights, model.net, x); };
    const std::vector<std::string> names(std::begin(kFeatureNames), std::end(kFeatureNames));
    const auto r = channel_sensitivity(f, inputs, covered, names, sc);
    if (!out.empty()) write_sensitivity_csv(out, r);
    std::cout << format_sensitivity(r);
    return 0;
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

int cmd_select_features(const std::string& data, const NetOptions& n, const TrainOptions& t, const std::string& initial,
                        const std::string& pool, SelectionConfig sel, int repeats, const std::string& out)
{
    const auto m = open_dataset(data);
    json c = t.to_json();
    c["data"] = data;
    c["dataset_hash"] = m.hash;
    c["net"] = to_json(n.config(1));
    c["initial"] = split_list(initial);
    c["pool"] = split_list(pool);
    c["threshold"] = sel.threshold;
    c["add_per_round"] = sel.add_per_round;
    c["tie_margin"] = sel.tie_margin;
    c["repeats"] = repeats;
    c["out"] = out;
    log_config("select-features", c);

    const auto train_idx = training_frames(frame_count(m));
    auto eval_idx = heldout_frames(frame_count(m));
    if (eval_idx.empty()) eval_idx = train_idx;
    const CandidateTrainer trainer = [&](const std::vector<std::string>& channels) {
        LoadOptions opt;
        opt.channels = channels;
        opt.noise_seed = t.seed;
        const auto train_set = load_samples(m, data, train_idx, opt);
        const auto heldout = load_samples(m, data, eval_idx, opt);
        const auto r = run_training(train_set, heldout, n.config(static_cast<int>(channels.size())), t, 0, "");
        std::vector<Tensor<float>> inputs;
        std::vector<std::vector<std::uint8_t>> covered;
        for (const auto& s : heldout) {
            inputs.push_back(s.inputs[0]);
            covered.push_back(s.covered);
        }
        SensitivityConfig sc;
        sc.repeats = repeats;
        sc.seed = t.seed;
        const ChannelModel f = [&](const Tensor<float>& x) { return infer(r.result.weights, r.net, x); };
        std::cerr << "trained [" << join(channels) << "] heldout_mse=" << fmt(r.result.heldout_mse) << '\n';
        return CandidateEvaluation{channel_sensitivity(f, inputs, covered, channels, sc), r.result.heldout_mse};
    };
    const auto r = select_features(trainer, split_list(initial), split_list(pool), sel);
    const std::string text = format_selection(r);
    if (!out.empty()) write_text(out, text);
    std::cout << text << "selected=" << join(r.selected) << '\n';
    return 0;
}

int cmd_penumbra(const std::string& data, const std::string& scene_path, std::vector<double> size_in, double bin,
                 const std::string& out)
{
    std::vector<PenumbraFrame> frames;
    json c{{"bin_width", bin}, {"out", out}};
    if (!data.empty()) {
        const auto m = open_dataset(data);
        const double s = size_in.empty() ? m.size_indices.back() : resolve_sizes(m, size_in).front();
        c["data"] = data;
        c["dataset_hash"] = m.hash;
        c["size"] = s;
        log_config("penumbra", c);
        frames = load_penumbra_frames(m, data, s);
    } else {
        require_file(scene_path, "--scene or --data");
        SceneConfig cfg = load_scene_config(scene_path);
        if (!size_in.empty()) cfg.emitter.size_index = size_in.front();
        c["scene"] = to_json(cfg);
        log_config("penumbra", c);
        const Scene scene = cfg.scene();
        frames.push_back(penumbra_frame(render_gbuffer(scene, cfg.camera, cfg.emitter), scene));
    }
    const auto st = penumbra_histogram(frames, bin);
    if (!out.empty()) write_histogram_csv(out, st);
    const int layers = st.p95 > 0.0 ? layers_for_penumbra(st.p95) : 2;
    std::cout << "p95=" << fmt(st.p95) << " max=" << fmt(st.max_width) << " pixels=" << st.widths.size()
              << " skipped=" << st.skipped << " layers=" << layers << " rf=" << receptive_field(layers) << '\n';
    return 0;
}

int cmd_sizing(double p95)
{
    if (!(p95 > 0.0)) throw CliError("invalid-argument", "--p95 must be positive");
    log_config("sizing", {{"p95", p95}});
    const int l = layers_for_penumbra(p95);
    std::cout << "layers=" << l << " rf=" << receptive_field(l) << '\n';
    return 0;
}

int cmd_net_stats(const NetOptions& n, int height, int width)
{
    const auto cfg = n.config(kFeatureChannels);
    log_config("net-stats", {{"net", to_json(cfg)}, {"height", height}, {"width", width}});
    const auto st = net_stats(cfg, height, width);
    std::cout << "level,height,width,parameters,flops_per_pixel,temp_storage_pixels\n";
    for (const auto& l : st.levels)
        std::cout << l.level << ',' << l.height << ',' << l.width << ',' << l.parameters << ','
                  << fmt(l.flops_per_pixel) << ',' << fmt(l.temp_storage_pixels) << '\n';
    std::cout << "total_parameters=" << st.total_parameters << " flops_per_pixel=" << fmt(st.total_flops_per_pixel)
              << " rf=" << receptive_field(cfg.layers) << '\n';
    return 0;
}

int cmd_overfit(const std::string& scene_path, const NetOptions& n, TrainOptions t, GeneratorSettings s, double size,
                double limit, const std::string& out)
{
    require_file(scene_path, "--scene");
    if (out.empty()) throw CliError("missing-argument", "--out is required");
    SceneConfig cfg = load_scene_config(scene_path);
    cfg.perturbation.count = 0;
    cfg.size_indices = {size};
    s.frames = 1;
    t.eval_probability = 0.0;
    json c = t.to_json();
    c["scene"] = to_json(cfg);
    c["net"] = to_json(n.config(kFeatureChannels));
    c["spp"] = s.spp;
    c["msaa"] = s.msaa;
    c["gen_seed"] = s.seed;
    c["limit"] = limit;
    c["out"] = out;
    log_config("overfit-test", c);
    const auto m = generate_dataset(cfg, static_trajectory(cfg.camera), s, out);
    LoadOptions opt;
    opt.p = 0;
    const auto samples = load_samples(m, out, {0}, opt);
    const auto r = run_training(samples, samples, n.config(kFeatureChannels), t, 0,
                                (fs::path(out) / "metrics.csv").string());
    save_checkpoint((fs::path(out) / "model.bin").string(), r.net, r.result.weights);
    const double e = evaluate_mse(r.result.weights, r.net, samples);
    const bool ok = e < limit;
    std::cout << "mode=" << (n.plain ? "plain" : "s2d") << " steps=" << t.steps << " mse=" << fmt(e)
              << " limit=" << fmt(limit) << ' ' << (ok ? "PASS" : "FAIL") << '\n';
    if (!ok) throw CliError("overfit", "mse " + fmt(e) + " not below " + fmt(limit));
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Neural shadow mapping toolkit"};
    app.require_subcommand(1);

    std::string scene, traj, out, data, model;
    bool deterministic = false;
    GeneratorSettings gen;
    int gen_p = -1;
    auto* generate = app.add_subcommand("generate", "render a dataset");
    generate->add_option("--scene", scene, "scene JSON")->required();
    generate->add_option("--traj", traj, "trajectory JSON (default: static camera)");
    generate->add_option("--frames", gen.frames, "frame count")->capture_default_str()->check(CLI::PositiveNumber);
    generate->add_option("--spp", gen.spp, "rays per sub-pixel sample")->capture_default_str()->check(CLI::PositiveNumber);
    generate->add_option("--msaa", gen.msaa, "sub-pixel samples (1, 2, 4 or 8)")->capture_default_str();
    generate->add_option("--sigma", gen.sigma, "target blur in pixels")->capture_default_str();
    generate->add_option("--p", gen_p, "perturbed stacks per frame (default: scene value)");
    generate->add_option("--seed", gen.seed, "generator seed")->capture_default_str();
    generate->add_option("--out", out, "dataset directory")->required();
    generate->add_flag("--deterministic", deterministic, "accepted for uniformity; generation is always deterministic");

    NetOptions net;
    TrainOptions topt;
    std::vector<double> sizes;
    auto* train_cmd = app.add_subcommand("train", "train a network on a dataset");
    train_cmd->add_option("--data", data, "dataset directory")->required();
    net.add(train_cmd);
    topt.add(train_cmd);
    train_cmd->add_option("--size", sizes, "size indices to train on (default: all)");
    train_cmd->add_option("--out", out, "checkpoint path")->required();

    int frame = 0;
    double size = 0.0;
    auto* infer_cmd = app.add_subcommand("infer", "run a checkpoint on one frame");
    infer_cmd->add_option("--data", data, "dataset directory")->required();
    infer_cmd->add_option("--model", model, "checkpoint")->required();
    infer_cmd->add_option("--frame", frame, "frame index")->capture_default_str();
    infer_cmd->add_option("--size", size, "size index")->capture_default_str();
    infer_cmd->add_option("--out", out, "output float map")->required();
    infer_cmd->add_flag("--deterministic", deterministic, "accepted for uniformity; inference is always deterministic");

    bool use_targets = false;
    double alpha_t = 3.0;
    auto* temporal = app.add_subcommand("eval-temporal", "temporal instability over a sequence");
    temporal->add_option("--data", data, "dataset directory")->required();
    temporal->add_option("--model", model, "checkpoint");
    temporal->add_flag("--targets", use_targets, "evaluate the ray-traced targets instead of a model");
    temporal->add_option("--size", sizes, "size index (default: largest)")->expected(0, 1);
    temporal->add_option("--alpha-t", alpha_t, "exponent scale")->capture_default_str();
    temporal->add_flag("--deterministic", deterministic, "accepted for uniformity");

    int repeats = 8;
    std::uint64_t seed = 0;
    auto* sens = app.add_subcommand("sensitivity", "per-channel sensitivity of a checkpoint");
    sens->add_option("--data", data, "dataset directory")->required();
    sens->add_option("--model", model, "checkpoint")->required();
    sens->add_option("--repeats", repeats, "noise repeats")->capture_default_str()->check(CLI::PositiveNumber);
    sens->add_option("--seed", seed, "noise seed")->capture_default_str();
    sens->add_option("--out", out, "CSV report");
    sens->add_flag("--deterministic", deterministic, "accepted for uniformity");

    std::string initial = "d,n.x,n.y,n.z,z,z_f,c_e,c_c";
    std::string pool = "z-z_f,z/z_f,c_c/d,n.n_e,n_e.x,n_e.y,n_e.z";
    SelectionConfig sel;
    auto* select = app.add_subcommand("select-features", "iterative sensitivity-driven channel selection");
    select->add_option("--data", data, "dataset directory")->required();
    net.add(select);
    topt.add(select);
    select->add_option("--initial", initial, "comma-separated starting channels")->capture_default_str();
    select->add_option("--pool", pool, "comma-separated candidates added in order")->capture_default_str();
    select->add_option("--threshold", sel.threshold, "drop threshold on relative sensitivity")->capture_default_str();
    select->add_option("--add-per-round", sel.add_per_round, "pool channels added per round")->capture_default_str();
    select->add_option("--tie-margin", sel.tie_margin, "tie-break margin above the threshold")->capture_default_str();
    select->add_option("--repeats", repeats, "noise repeats")->capture_default_str();
    select->add_option("--out", out, "audit report");

    double bin = 1.0;
    auto* pen = app.add_subcommand("penumbra", "penumbra width histogram and P95");
    pen->add_option("--data", data, "dataset directory");
    pen->add_option("--scene", scene, "scene JSON (single frame from its camera)");
    pen->add_option("--size", sizes, "size index")->expected(0, 1);
    pen->add_option("--bin", bin, "histogram bin width in pixels")->capture_default_str();
    pen->add_option("--out", out, "histogram CSV");
    pen->add_flag("--deterministic", deterministic, "accepted for uniformity");

    double p95 = 0.0;
    auto* sizing = app.add_subcommand("sizing", "network depth for a penumbra P95");
    sizing->add_option("--p95", p95, "95th-percentile penumbra width in pixels")->required();
    sizing->add_flag("--deterministic", deterministic, "accepted for uniformity");

    int height = 1024, width = 2048;
    auto* stats = app.add_subcommand("net-stats", "per-level parameters, FLOPs and storage");
    net.add(stats);
    stats->add_option("--height", height, "frame height")->capture_default_str();
    stats->add_option("--width", width, "frame width")->capture_default_str();
    stats->add_flag("--deterministic", deterministic, "accepted for uniformity");

    double limit = 0.02;
    double overfit_size = 2.0;
    GeneratorSettings ogen;
    ogen.spp = 64;
    ogen.msaa = 4;
    auto* overfit = app.add_subcommand("overfit-test", "memorize one rendered frame");
    overfit->add_option("--scene", scene, "scene JSON")->required();
    net.add(overfit);
    topt.add(overfit);
    overfit->add_option("--spp", ogen.spp, "rays per sub-pixel sample")->capture_default_str();
    overfit->add_option("--msaa", ogen.msaa, "sub-pixel samples")->capture_default_str();
    overfit->add_option("--size", overfit_size, "size index")->capture_default_str();
    overfit->add_option("--limit", limit, "MSE bound")->capture_default_str();
    overfit->add_option("--out", out, "work directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << one_line(e.what()) << '\n';
        return 2;
    }

    try {
        if (generate->parsed()) return cmd_generate(scene, traj, gen, gen_p, out);
        if (train_cmd->parsed()) return cmd_train(data, net, topt, sizes, out);
        if (infer_cmd->parsed()) return cmd_infer(data, model, frame, size, out, deterministic);
        if (temporal->parsed()) return cmd_eval_temporal(data, model, use_targets, sizes, alpha_t, deterministic);
        if (sens->parsed()) return cmd_sensitivity(data, model, repeats, seed, out, deterministic);
        if (select->parsed()) {
            if (topt.p < 0) topt.p = 0;
            return cmd_select_features(data, net, topt, initial, pool, sel, repeats, out);
        }
        if (pen->parsed()) return cmd_penumbra(data, scene, sizes, bin, out);
        if (sizing->parsed()) return cmd_sizing(p95);
        if (stats->parsed()) return cmd_net_stats(net, height, width);
        if (overfit->parsed()) {
            topt.p = 0;
            ogen.seed = topt.seed;
            return cmd_overfit(scene, net, topt, ogen, overfit_size, limit, out);
        }
    } catch (const CliError& e) {
        std::cerr << "error: " << e.code << ": " << one_line(e.what()) << '\n';
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "error: format: " << one_line(e.what()) << '\n';
        return 1;
    } catch (const TrainingError& e) {
        std::cerr << "error: training: " << one_line(e.what()) << '\n';
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: config: " << one_line(e.what()) << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: invalid-argument: " << one_line(e.what()) << '\n';
        return 1;
    } catch (const std::domain_error& e) {
        std::cerr << "error: domain: " << one_line(e.what()) << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: runtime: " << one_line(e.what()) << '\n';
        return 1;
    }
    return 1;
}
