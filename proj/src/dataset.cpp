#include "nsm/dataset.hpp"

#include "nsm/io.hpp"
#include "nsm/rt_oracle.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

namespace nsm {

namespace fs = std::filesystem;
using nlohmann::json;

void GeneratorSettings::validate() const
{
    if (frames < 1) throw std::invalid_argument("frames must be >= 1");
    if (spp < 1) throw std::invalid_argument("spp must be >= 1");
    (void)msaa_pattern(msaa);
    if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
}


namespace {

json settings_json(const GeneratorSettings& s)
{
    return {{"frames", s.frames}, {"spp", s.spp}, {"msaa", s.msaa}, {"sigma", s.sigma}, {"bias", s.bias}, {"seed", s.seed}};
}

GeneratorSettings settings_from_json(const json& j)
{
    GeneratorSettings s;
    s.frames = j.at("frames").get<int>();
    s.spp = j.at("spp").get<int>();
    s.msaa = j.at("msaa").get<int>();
    s.sigma = j.at("sigma").get<double>();
    s.bias = j.at("bias").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string frame_id(int k)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%05d", k);
    return buf;
}

Tensor<float> stack_channels(const std::vector<std::vector<float>>& chans, int h, int w)
{
    Tensor<float> t = Tensor<float>::chw(chans.size(), static_cast<std::size_t>(h), static_cast<std::size_t>(w));
    for (std::size_t c = 0; c < chans.size(); ++c) std::copy(chans[c].begin(), chans[c].end(), t.channel(c).begin());
    return t;
}

// Header-only dimension check of a float map.
void check_map(const std::string& path, std::size_t c, std::size_t h, std::size_t w)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("missing file " + path);
    char magic[4];
    std::uint32_t dims[3] = {0, 0, 0};
    if (!in.read(magic, 4) || !in.read(reinterpret_cast<char*>(dims), sizeof dims))
        throw FormatError(path + ": truncated header");
    if (dims[0] != w || dims[1] != h || dims[2] != c)
        throw FormatError(path + ": dimensions do not match the manifest");
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::uint64_t>(in.tellg());
    if (bytes != 16 + 4ULL * c * h * w) throw FormatError(path + ": size does not match its header (truncated?)");
}

} // namespace

std::string DatasetManifest::compute_hash() const
{
    json j = {{"scene", scene},   {"trajectory", trajectory}, {"settings", settings_json(settings)},
              {"p", p},           {"size_indices", size_indices}, {"height", height},
              {"width", width},   {"bias", bias},             {"gbuffer_channels", gbuffer_channels}};
    return hex64(fnv1a(j.dump()));
}

json to_json(const DatasetManifest& m)
{
    json frames = json::array();
    for (const auto& f : m.frames)
        frames.push_back({{"id", f.id},
                          {"time", f.time},
                          {"seed", f.seed},
                          {"perturbation_seeds", f.perturbation_seeds},
                          {"z_min", f.range.z_min},
                          {"z_max", f.range.z_max},
                          {"focal_px", f.focal_px},
                          {"features", f.feature_files},
                          {"targets", f.target_files},
                          {"gbuffer", f.gbuffer_file},
                          {"motion", f.motion_file}});
    return {{"hash", m.hash},
            {"scene", m.scene},
            {"trajectory", m.trajectory},
            {"settings", settings_json(m.settings)},
            {"p", m.p},
            {"size_indices", m.size_indices},
            {"height", m.height},
            {"width", m.width},
            {"bias", m.bias},
            {"gbuffer_channels", m.gbuffer_channels},
            {"frames", frames}};
}

DatasetManifest manifest_from_json(const json& j)
{
    DatasetManifest m;
    m.hash = j.at("hash").get<std::string>();
    m.scene = j.at("scene");
    m.trajectory = j.at("trajectory");
    m.settings = settings_from_json(j.at("settings"));
    m.p = j.at("p").get<int>();
    m.size_indices = j.at("size_indices").get<std::vector<double>>();
    m.height = j.at("height").get<int>();
    m.width = j.at("width").get<int>();
    m.bias = j.at("bias").get<double>();
    m.gbuffer_channels = j.at("gbuffer_channels").get<std::vector<std::string>>();
    for (const auto& f : j.at("frames")) {
        FrameRecord r;
        r.id = f.at("id").get<std::string>();
        r.time = f.at("time").get<double>();
        r.seed = f.at("seed").get<std::uint64_t>();
        r.perturbation_seeds = f.at("perturbation_seeds").get<std::vector<std::uint64_t>>();
        r.range.z_min = f.at("z_min").get<double>();
        r.range.z_max = f.at("z_max").get<double>();
        r.focal_px = f.at("focal_px").get<double>();
        r.feature_files = f.at("features").get<std::vector<std::string>>();
        r.target_files = f.at("targets").get<std::vector<std::string>>();
        r.gbuffer_file = f.at("gbuffer").get<std::string>();
        r.motion_file = f.at("motion").get<std::string>();
        m.frames.push_back(std::move(r));
    }
    return m;
}

std::string target_file_name(double size_index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "target_%g.pfm", size_index);
    return buf;
}

DatasetManifest generate_dataset(const SceneConfig& cfg, const Trajectory& traj, const GeneratorSettings& settings,
                                 const std::string& root)
{
    settings.validate();
    traj.validate();
    const Scene base = cfg.scene();
    const int p = cfg.perturbation.count;
    DatasetManifest m;
    m.scene = to_json(cfg);
    m.trajectory = to_json(traj);
    m.settings = settings;
    m.p = p;
    m.size_indices = cfg.size_indices;
    m.height = cfg.camera.height;
    m.width = cfg.camera.width;
    m.bias = settings.bias >= 0.0 ? settings.bias : default_depth_bias(base);
    m.gbuffer_channels.push_back("covered");
    fs::create_directories(root);

    const auto [t0, t1] = traj.time_range();
    std::optional<GBuffer> prev_g;
    CameraPose prev_cam;
    for (int k = 0; k < settings.frames; ++k) {
        FrameRecord rec;
        rec.id = frame_id(k);
        rec.time = settings.frames == 1 ? t0 : t0 + (t1 - t0) * k / (settings.frames - 1);
        rec.seed = stream_seed(settings.seed, static_cast<std::uint64_t>(k), 0);
        const fs::path dir = fs::path(root) / rec.id;
        fs::create_directories(dir);
        try {
            const Scene scene = traj.scene_at(base, rec.time);
            CameraPose cam = traj.camera_at(rec.time);
            cam.height = cfg.camera.height;
            cam.width = cfg.camera.width;

            PerturbationSpec spec = cfg.perturbation;
            std::mt19937_64 rng(stream_seed(rec.seed, 1, 0));
            const auto perturbed = sample_perturbation(scene, cam, spec, rng);
            std::vector<std::pair<CameraPose, Emitter>> states{{cam, scene.emitter()}};
            for (const auto& s : perturbed) states.emplace_back(s.camera, s.emitter);
            for (std::size_t i = 1; i < states.size(); ++i) rec.perturbation_seeds.push_back(stream_seed(rec.seed, 1, i));

            GBuffer g0;
            for (std::size_t j = 0; j < states.size(); ++j) {
                const Scene sj = scene.with_emitter(states[j].second);
                const ShadowMap sm = render_shadowmap(sj, states[j].second, cfg.shadow_map);
                GBuffer g = render_gbuffer(sj, states[j].first, states[j].second);
                const FeatureStack fsk = assemble_features(g, sm, 0.0, m.bias);
                const std::string name = "features_" + std::to_string(j) + ".pfm";
                write_float_map((dir / name).string(), fsk.channels);
                rec.feature_files.push_back(rec.id + "/" + name);
                if (j == 0) {
                    const auto cand = candidate_channels(g, sm, 0.0);
                    std::vector<std::vector<float>> chans;
                    std::vector<float> cov(g.pixels());
                    for (std::size_t i = 0; i < cov.size(); ++i) cov[i] = g.covered[i] ? 1.0f : 0.0f;
                    chans.push_back(std::move(cov));
                    for (const auto& c : cand) {
                        if (k == 0) m.gbuffer_channels.push_back(c.name);
                        chans.push_back(c.values);
                    }
                    write_float_map((dir / "gbuffer.pfm").string(), stack_channels(chans, g.height, g.width));
                    rec.gbuffer_file = rec.id + "/gbuffer.pfm";
                    g0 = std::move(g);
                }
            }
            rec.range = occluder_range(scene, scene.emitter().center);
            rec.focal_px = cam.focal_px();

            TraceSettings ts{settings.spp, settings.msaa, rec.seed};
            const auto targets = trace_visibility_multi(scene, cam, scene.emitter().center, cfg.size_indices, ts);
            for (const auto& t : targets) {
                const std::string name = target_file_name(t.size_index);
                write_float_map((dir / name).string(), gaussian_filter(t, settings.sigma).visibility);
                rec.target_files.push_back(rec.id + "/" + name);
            }

            std::vector<std::vector<float>> motion(3, std::vector<float>(g0.pixels(), 0.0f));
            if (prev_g) {
                const MotionField mf = motion_vectors(g0, prev_cam, *prev_g);
                for (std::size_t i = 0; i < g0.pixels(); ++i) {
                    motion[0][i] = mf.vec[i].x();
                    motion[1][i] = mf.vec[i].y();
                    motion[2][i] = mf.valid[i] ? 1.0f : 0.0f;
                }
            }
            write_float_map((dir / "motion.pfm").string(), stack_channels(motion, g0.height, g0.width));
            rec.motion_file = rec.id + "/motion.pfm";
            prev_g = std::move(g0);
            prev_cam = cam;
        } catch (const FrustumError& e) {
            throw FrustumError("frame " + rec.id + ": " + e.what());
        }
        m.frames.push_back(std::move(rec));
    }
    m.hash = m.compute_hash();
    write_text((fs::path(root) / "manifest.json").string(), to_json(m).dump(2) + "\n");
    return m;
}

DatasetManifest load_manifest(const std::string& root)
{
    DatasetManifest m;
    try {
        m = manifest_from_json(json::parse(read_text((fs::path(root) / "manifest.json").string())));
    } catch (const json::exception& e) {
        throw FormatError(root + "/manifest.json: " + e.what());
    }
    if (m.compute_hash() != m.hash) throw FormatError(root + "/manifest.json: hash mismatch");
    const std::size_t h = static_cast<std::size_t>(m.height), w = static_cast<std::size_t>(m.width);
    for (const auto& f : m.frames) {
        if (f.feature_files.size() != static_cast<std::size_t>(m.p) + 1 || f.target_files.size() != m.size_indices.size())
            throw FormatError("frame " + f.id + ": file list does not match the manifest settings");
        for (const auto& p : f.feature_files) check_map((fs::path(root) / p).string(), kFeatureChannels, h, w);
        for (const auto& p : f.target_files) check_map((fs::path(root) / p).string(), 1, h, w);
        check_map((fs::path(root) / f.gbuffer_file).string(), m.gbuffer_channels.size(), h, w);
        check_map((fs::path(root) / f.motion_file).string(), 3, h, w);
    }
    return m;
}

std::vector<int> heldout_frames(int frames, int count)
{
    std::vector<int> out;
    if (frames < 4 || count < 1) return out;
    const int n = std::min(count, frames / 4);
    for (int i = 0; i < n; ++i) out.push_back(static_cast<int>((i + 0.5) * frames / n));
    return out;
}

std::vector<int> training_frames(int frames, int count)
{
    const auto held = heldout_frames(frames, count);
    std::vector<int> out;
    for (int k = 0; k < frames; ++k)
        if (std::find(held.begin(), held.end(), k) == held.end()) out.push_back(k);
    return out;
}

std::vector<TrainingSample> load_samples(const DatasetManifest& m, const std::string& root, const std::vector<int>& frames,
                                         const LoadOptions& opt)
{
    std::vector<std::size_t> sizes;
    if (opt.size_indices.empty()) {
        for (std::size_t s = 0; s < m.size_indices.size(); ++s) sizes.push_back(s);
    } else {
        for (double want : opt.size_indices) {
            const auto it = std::find(m.size_indices.begin(), m.size_indices.end(), want);
            if (it == m.size_indices.end()) throw std::invalid_argument("dataset has no target for size index " + std::to_string(want));
            sizes.push_back(static_cast<std::size_t>(it - m.size_indices.begin()));
        }
    }
    const int p = opt.p < 0 ? m.p : opt.p;
    if (p > m.p) throw std::invalid_argument("dataset holds " + std::to_string(m.p) + " perturbations, " + std::to_string(p) + " requested");
    std::mt19937_64 noise_rng(opt.noise_seed);
    std::uniform_real_distribution<float> u01(0.0f, 1.0f);

    std::vector<TrainingSample> out;
    for (int k : frames) {
        const FrameRecord& f = m.frames.at(static_cast<std::size_t>(k));
        const Tensor<float> gb = read_float_map((fs::path(root) / f.gbuffer_file).string());
        std::vector<std::uint8_t> covered(gb.plane());
        for (std::size_t i = 0; i < covered.size(); ++i) covered[i] = gb.channel(0)[i] > 0.5f;

        std::vector<Tensor<float>> stacks;
        if (opt.channels.empty()) {
            for (int j = 0; j <= p; ++j) stacks.push_back(read_float_map((fs::path(root) / f.feature_files[j]).string()));
        } else {
            Tensor<float> x = Tensor<float>::chw(opt.channels.size(), gb.height(), gb.width());
            for (std::size_t c = 0; c < opt.channels.size(); ++c) {
                auto dst = x.channel(c);
                if (opt.channels[c] == "noise") {
                    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = covered[i] ? u01(noise_rng) : 0.0f;
                    continue;
                }
                const auto it = std::find(m.gbuffer_channels.begin(), m.gbuffer_channels.end(), opt.channels[c]);
                if (it == m.gbuffer_channels.end()) throw std::invalid_argument("unknown channel '" + opt.channels[c] + "'");
                const auto src = gb.channel(static_cast<std::size_t>(it - m.gbuffer_channels.begin()));
                std::copy(src.begin(), src.end(), dst.begin());
            }
            stacks.push_back(std::move(x));
        }

        for (std::size_t s : sizes) {
            const double size = m.size_indices[s];
            TrainingSample ts;
            ts.id = f.id + "/" + target_file_name(size);
            ts.size_index = size;
            ts.covered = covered;
            ts.target = read_float_map((fs::path(root) / f.target_files[s]).string());
            ts.inputs = stacks;
            for (auto& x : ts.inputs) {
                // c_e carries the size index as a constant offset
                const std::size_t ce = opt.channels.empty() ? 2 : x.channels();
                for (std::size_t c = 0; c < x.channels(); ++c) {
                    const bool offset = opt.channels.empty() ? c == ce : opt.channels[c] == "c_e";
                    if (!offset) continue;
                    auto ch = x.channel(c);
                    for (std::size_t i = 0; i < ch.size(); ++i)
                        if (covered[i]) ch[i] += static_cast<float>(size);
                }
            }
            out.push_back(std::move(ts));
        }
    }
    return out;
}

std::vector<PenumbraFrame> load_penumbra_frames(const DatasetManifest& m, const std::string& root, double size_index)
{
    auto index = [&](const std::string& name) {
        const auto it = std::find(m.gbuffer_channels.begin(), m.gbuffer_channels.end(), name);
        if (it == m.gbuffer_channels.end()) throw FormatError("gbuffer lacks channel " + name);
        return static_cast<std::size_t>(it - m.gbuffer_channels.begin());
    };
    const std::size_t di = index("d"), zi = index("z_f");
    std::vector<PenumbraFrame> out;
    for (const auto& f : m.frames) {
        const Tensor<float> gb = read_float_map((fs::path(root) / f.gbuffer_file).string());
        PenumbraFrame pf;
        pf.depth.assign(gb.channel(di).begin(), gb.channel(di).end());
        pf.z_f.assign(gb.channel(zi).begin(), gb.channel(zi).end());
        pf.covered.resize(gb.plane());
        for (std::size_t i = 0; i < pf.covered.size(); ++i) pf.covered[i] = gb.channel(0)[i] > 0.5f;
        pf.focal_px = f.focal_px;
        pf.emitter_radius = emitter_radius(size_index);
        pf.range = f.range;
        out.push_back(std::move(pf));
    }
    return out;
}

std::vector<MotionField> load_motion(const DatasetManifest& m, const std::string& root)
{
    std::vector<MotionField> out;
    for (std::size_t k = 1; k < m.frames.size(); ++k) {
        const Tensor<float> t = read_float_map((fs::path(root) / m.frames[k].motion_file).string());
        MotionField mf;
        mf.height = static_cast<int>(t.height());
        mf.width = static_cast<int>(t.width());
        mf.vec.resize(t.plane());
        mf.valid.resize(t.plane());
        for (std::size_t i = 0; i < t.plane(); ++i) {
            mf.vec[i] = Eigen::Vector2f(t.channel(0)[i], t.channel(1)[i]);
            mf.valid[i] = t.channel(2)[i] > 0.5f;
        }
        out.push_back(std::move(mf));
    }
    return out;
}

} // namespace nsm
